"""How many queries does a masking explainer fundamentally need?

Pure arithmetic, no simulation: support entropy says how many bits a
sparse explanation carries, the capacity envelope says how many bits a
single noisy masked query can carry, and their ratio is a floor on the
query budget.  The same accounting run in reverse gives the finest
feature resolution a fixed budget can certify.
"""

from maskchannel.errors import InvalidArgumentError
from maskchannel.information import (capacity_envelope, critical_resolution,
                                     dense_query_lower_bound, explanation_rate,
                                     sparse_query_lower_bound, support_entropy)

d, k, sigma, p = 12, 2, 0.1, 0.5

h = support_entropy(d, k)
c = capacity_envelope(k, sigma, p)
print(f"explanation: {k} of {d} features        H(S) = {h:.3f} bits")
print(f"one query at sigma={sigma}, p={p}:      C_max = {c:.3f} bits")
print(f"information floor:                  T >= H/C = {h / c:.2f} queries")
print()

# the floor scales very differently for sparse versus dense targets
print(f"sparse lower bound ((k/C) log2(d/k)):  {sparse_query_lower_bound(d, k, c):.2f} queries")
print(f"dense lower bound (8-bit coefficients): {dense_query_lower_bound(d, c, 8.0):.2f} queries")
print()

# turn the budget around: with T queries, how fine may the feature space be?
for t in (5, 10, 25):
    rate = explanation_rate(h, t)
    d_crit = critical_resolution(t, k, c)
    print(f"T = {t:3d}: rate {rate:.3f} bits/query, "
          f"finest certifiable resolution d_crit = {d_crit}")

# entropy only grows like k log2(d), so the certifiable resolution grows
# exponentially in the budget; the search refuses once it stops being a
# meaningful feature count
try:
    critical_resolution(100, k, c)
except InvalidArgumentError as err:
    print(f"T = 100: {err}")
