"""Closed-form information quantities for masked querying.

A hidden k-of-d support carries ``log2 C(d, k)`` bits.  Each noisy query
reveals at most the Gaussian-channel amount, so feasible decoding needs
the cumulative query information to cover the support entropy.  These
functions evaluate that bookkeeping exactly: entropies, per-query
capacity envelopes, minimum-query thresholds, and the largest feature
resolution a fixed budget can support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

from .errors import InvalidArgumentError

#: critical_resolution refuses to search beyond this many features.
RESOLUTION_SEARCH_CAP = 10**15


def support_entropy(d: int, k: int) -> float:
    """log2 of the number of k-subsets of d items, in bits.

    Uses log-gamma, exact to ~1e-12 relative for d up to 1e6.  The
    shared symmetric form ``gammaln(d+1) - (gammaln(k+1) + gammaln(d-k+1))``
    makes ``support_entropy(d, k) == support_entropy(d, d-k)`` hold
    bit-for-bit, and the k in {0, 1, d-1, d} cases are evaluated exactly.
    """
    if d < 0:
        raise InvalidArgumentError(f"d must be >= 0, got {d}")
    if not 0 <= k <= d:
        raise InvalidArgumentError(f"need 0 <= k <= d, got k={k}, d={d}")
    if k in (0, d):
        return 0.0
    if k in (1, d - 1):
        return math.log2(d)
    return float((gammaln(d + 1) - (gammaln(k + 1) + gammaln(d - k + 1))) / math.log(2))


def explanation_rate(entropy_bits: float, t: int) -> float:
    """Bits of hidden message per query: H / T."""
    if t < 1:
        raise InvalidArgumentError(f"t must be >= 1, got {t}")
    if entropy_bits < 0:
        raise InvalidArgumentError(f"entropy_bits must be >= 0, got {entropy_bits}")
    return entropy_bits / t


def per_query_mi_gaussian(signal_variance: float, sigma: float) -> float:
    """Information of one Gaussian query: 0.5 log2(1 + Var(z.phi)/sigma^2)."""
    if signal_variance < 0:
        raise InvalidArgumentError(f"signal_variance must be >= 0, got {signal_variance}")
    if sigma <= 0:
        raise InvalidArgumentError(f"sigma must be > 0 for a finite channel law, got {sigma}")
    return 0.5 * math.log2(1.0 + signal_variance / sigma**2)


def capacity_envelope(k: int, sigma: float, p: float) -> float:
    """Per-query information envelope for the standard-normal sparse prior.

    Under a uniformly random k-of-d support with unit-variance amplitudes,
    a fixed mask z sees signal variance |z| * k / d, so Bernoulli(p)
    masks see p*k on average.  Concavity of the Gaussian capacity in the
    signal variance then bounds the per-query information of the actual
    policy by 0.5 log2(1 + p*k / sigma^2), and summing over queries
    bounds the total extracted information by T times this envelope.
    """
    if k < 0:
        raise InvalidArgumentError(f"k must be >= 0, got {k}")
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"p must lie in (0, 1), got {p}")
    return per_query_mi_gaussian(p * k, sigma)


def dense_query_lower_bound(d: int, c_max: float, dynamic_range_bits: float) -> float:
    """Minimum queries to localize d coordinates at a given amplitude precision.

    Resolving each of d coordinates to ``dynamic_range_bits = log2(B/delta)``
    levels needs more than ``d * dynamic_range_bits / c_max`` queries.
    """
    if d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d}")
    if c_max <= 0:
        raise InvalidArgumentError(f"c_max must be > 0, got {c_max}")
    if dynamic_range_bits <= 0:
        raise InvalidArgumentError(
            f"dynamic_range_bits must be > 0, got {dynamic_range_bits}"
        )
    return d * dynamic_range_bits / c_max


def sparse_query_lower_bound(d: int, k: int, c_max: float) -> float:
    """Minimum queries for support identification: (k / c_max) log2(d / k)."""
    if not 1 <= k <= d:
        raise InvalidArgumentError(f"need 1 <= k <= d, got k={k}, d={d}")
    if c_max <= 0:
        raise InvalidArgumentError(f"c_max must be > 0, got {c_max}")
    return (k / c_max) * math.log2(d / k)


def critical_resolution(t: int, k: int, capacity_bits_per_query: float) -> int:
    """Largest d with support_entropy(d, k) within the budget t * capacity.

    Monotone search: doubles an upper bracket, then bisects.  The search
    refuses budgets whose answer would exceed ``RESOLUTION_SEARCH_CAP``.
    """
    if t < 0:
        raise InvalidArgumentError(f"t must be >= 0, got {t}")
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    if capacity_bits_per_query < 0:
        raise InvalidArgumentError(
            f"capacity_bits_per_query must be >= 0, got {capacity_bits_per_query}"
        )
    budget = t * capacity_bits_per_query
    # d == k always fits: a size-k support among k features carries 0 bits.
    lo = k
    hi = k + 1
    while support_entropy(hi, k) <= budget:
        lo = hi
        hi *= 2
        if lo > RESOLUTION_SEARCH_CAP:
            raise InvalidArgumentError(
                f"budget of {budget:.6g} bits admits resolutions beyond "
                f"{RESOLUTION_SEARCH_CAP}; refusing the search"
            )
    # invariant: entropy(lo) <= budget < entropy(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if support_entropy(mid, k) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class InfoBudget:
    """Entropy, rate, and capacity bookkeeping for one (d, k, T) setting."""

    entropy_bits: float
    rate_bits_per_query: float
    capacity_bound_bits: float
    query_count: int

    def __post_init__(self):
        if self.query_count < 1:
            raise InvalidArgumentError(f"query_count must be >= 1, got {self.query_count}")
        if not math.isclose(self.rate_bits_per_query * self.query_count, self.entropy_bits,
                            rel_tol=1e-12, abs_tol=1e-12):
            raise InvalidArgumentError("rate * query_count must equal entropy_bits")


def info_budget(d: int, k: int, t: int, sigma: float, p: float) -> InfoBudget:
    """Assemble the InfoBudget for one experiment configuration."""
    h = support_entropy(d, k)
    return InfoBudget(
        entropy_bits=h,
        rate_bits_per_query=explanation_rate(h, t),
        capacity_bound_bits=capacity_envelope(k, sigma, p),
        query_count=t,
    )
