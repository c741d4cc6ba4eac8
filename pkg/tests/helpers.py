"""Independent oracles the test suite checks the library against.

Everything in here is deliberately written from scratch against the
mathematical definitions -- different algorithms, different linear
algebra entry points -- so an agreement test actually certifies the
production code instead of comparing it with itself.
"""

from __future__ import annotations

import math
from itertools import combinations, product

import numpy as np


def brute_force_ml(bits: np.ndarray, y: np.ndarray, k: int) -> tuple[int, ...]:
    """Reference ML decoder: lstsq on every k-subset, strict first-min wins.

    Uses ``np.linalg.lstsq`` (SVD based), not the normal equations, so it
    shares no numerics with the production decoder.
    """
    best_rss = math.inf
    best = None
    for sup in combinations(range(bits.shape[1]), k):
        zs = bits[:, sup]
        coef, _, _, _ = np.linalg.lstsq(zs, y, rcond=None)
        r = y - zs @ coef
        rss = float(r @ r)
        if rss < best_rss:
            best_rss = rss
            best = sup
    return best


def invert_ls_oracle(bits: np.ndarray, y: np.ndarray, support, jitter: float) -> np.ndarray:
    """Least squares on a support via explicit matrix inversion.

    For one or two columns the inverse is written out by hand (scalar
    reciprocal / adjugate over determinant); larger supports go through
    ``np.linalg.inv``.  Matches the production kernel's jittered normal
    equations without calling any of its code.
    """
    sup = list(support)
    zs = bits[:, sup]
    g = zs.T @ zs + jitter * np.eye(len(sup))
    rhs = zs.T @ y
    n = len(sup)
    if n == 1:
        return rhs / g[0, 0]
    if n == 2:
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
        inv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]]) / det
        return inv @ rhs
    return np.linalg.inv(g) @ rhs


def refined_ridge(bits: np.ndarray, y: np.ndarray, lam: float,
                  refinements: int = 3) -> np.ndarray:
    """Ridge solution in long double with iterative refinement.

    Solves (Z^T Z + lam I) beta = Z^T y, then applies a few rounds of
    residual correction at extended precision.  Accurate well past 1e-12
    relative on the decoder-scale problems in this suite.
    """
    z = bits.astype(np.longdouble)
    yy = y.astype(np.longdouble)
    a = z.T @ z + np.longdouble(lam) * np.eye(z.shape[1], dtype=np.longdouble)
    rhs = z.T @ yy
    beta = np.linalg.solve(a.astype(float), rhs.astype(float)).astype(np.longdouble)
    for _ in range(refinements):
        resid = rhs - a @ beta
        beta = beta + np.linalg.solve(a.astype(float), resid.astype(float))
    return beta.astype(float)


def lasso_kkt_violation(bits: np.ndarray, y: np.ndarray, lam: float,
                        beta: np.ndarray) -> float:
    """Largest stationarity violation of 0.5|y - Z b|^2 + lam |b|_1 at beta.

    Zero at an exact minimizer: active coordinates need the correlation
    z_j . r to equal lam * sign(beta_j), inactive ones need |z_j . r| <= lam.
    """
    r = y - bits @ beta
    corr = bits.T @ r
    worst = 0.0
    for j in range(bits.shape[1]):
        if beta[j] != 0.0:
            worst = max(worst, abs(corr[j] - lam * math.copysign(1.0, beta[j])))
        else:
            worst = max(worst, abs(corr[j]) - lam)
    return worst


def isotonic_fit(values: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators fit of the best nondecreasing sequence."""
    level = [float(v) for v in values]
    weight = [1.0] * len(level)
    i = 0
    while i < len(level) - 1:
        if level[i] > level[i + 1] + 1e-15:
            merged = (level[i] * weight[i] + level[i + 1] * weight[i + 1])
            weight[i] += weight[i + 1]
            level[i] = merged / weight[i]
            del level[i + 1], weight[i + 1]
            i = max(i - 1, 0)
        else:
            i += 1
    out = []
    for lv, w in zip(level, weight):
        out.extend([lv] * int(w))
    return np.asarray(out)


def integrated_mi_unit_prior(d: int, k: int, sigma: float, t: int,
                             n_eps: int = 40_000, seed: int = 123) -> tuple[float, float]:
    """Numerically integrated I(S; Y^T | Z^T) for the fixed-amplitude prior.

    Enumerates every mask matrix (all 2^(t*d) of them -- callers keep t*d
    tiny; the uniform weighting assumes the Bernoulli(1/2) mask policy)
    and every k-subset exactly; only the Gaussian noise integral is Monte
    Carlo, with a shared antithetic sample.  Returns (bits, mc_se).
    """
    supports = list(combinations(range(d), k))
    m = len(supports)
    mus = np.array([[1.0 if i in sup else 0.0 for i in range(d)] for sup in supports])
    rng = np.random.default_rng(seed)
    half = rng.standard_normal((n_eps // 2, t))
    eps = np.concatenate([half, -half])

    totals = []
    for zbits in product((0.0, 1.0), repeat=t * d):
        z = np.asarray(zbits).reshape(t, d)
        proj = mus @ z.T                                   # (m, t) noiseless responses
        # log-mean over hypotheses j of exp(-|y - proj_j|^2 / 2 sigma^2)
        # with y = proj_i + sigma eps, averaged over i and eps
        per_z = 0.0
        for i in range(m):
            y = proj[i] + sigma * eps                       # (n, t)
            en = ((y[:, None, :] - proj[None, :, :]) ** 2).sum(axis=2) / (2 * sigma**2)
            en_min = en.min(axis=1, keepdims=True)
            log_mix = -en_min[:, 0] + np.log(np.exp(-(en - en_min)).mean(axis=1))
            log_true = -en[:, i]
            per_z += float(np.mean(log_true - log_mix)) / m
        totals.append(per_z / math.log(2.0))
    value = float(np.mean(totals))
    # the eps sample is shared across z, so the spread over z underestimates
    # nothing; report a crude n_eps-driven error of the inner integral
    return value, 1.0 / math.sqrt(n_eps)


def quadrature_mi_single_feature(d: int, sigma: float, t: int, n_z: int = 200,
                                 nodes: int = 24, seed: int = 321,
                                 all_z: bool = False) -> tuple[float, float]:
    """Numerically integrated I(S; Y^T | Z^T) for k = 1, unit amplitudes.

    No Monte Carlo in the noise: for each mask matrix the posterior
    integral is evaluated by tensor Gauss-Hermite quadrature on the span
    of the hypothesis differences (at most d-1 dimensions).  Mask
    matrices are enumerated exactly when ``all_z`` (Bernoulli(1/2)
    weighting) or sampled otherwise.  Returns (bits, spread_se).
    """
    x, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / w.sum()
    if all_z:
        mats = (np.asarray(zbits, float).reshape(t, d)
                for zbits in product((0.0, 1.0), repeat=t * d))
    else:
        rng = np.random.default_rng(seed)
        mats = ((rng.random((t, d)) < 0.5).astype(float) for _ in range(n_z))

    per_z = []
    for z in mats:
        acc = 0.0
        for s in range(d):
            diffs = np.delete(z - z[:, [s]], s, axis=1)
            acc += _gh_mixture_term(diffs, sigma, x, w)
        per_z.append(math.log2(d) - acc / d)
    vals = np.asarray(per_z)
    se = 0.0 if all_z or vals.size < 2 else float(vals.std(ddof=1) / math.sqrt(vals.size))
    return float(vals.mean()), se


def _gh_mixture_term(diffs: np.ndarray, sigma: float, x: np.ndarray,
                     w: np.ndarray) -> float:
    """E_eta log2(1 + sum_j exp(b_j.eta - |v_j|^2 / 2 sigma^2)), eta ~ N(0, I).

    Column j of ``diffs`` is v_j = (noiseless response of hypothesis j)
    minus (that of the truth); zero columns are exact collisions and
    contribute a constant 1 inside the mixture.
    """
    from functools import reduce

    from scipy.special import logsumexp

    norms2 = (diffs * diffs).sum(axis=0)
    u, sv, _ = np.linalg.svd(diffs, full_matrices=False)
    rank = int((sv > 1e-12 * max(1.0, float(sv.max(initial=0.0)))).sum())
    if rank == 0:
        # every alternative coincides with the truth
        return math.log2(1.0 + diffs.shape[1])
    slopes = (u[:, :rank].T @ diffs) / sigma
    eta = np.stack([g.ravel() for g in np.meshgrid(*([x] * rank), indexing="ij")])
    wt = reduce(np.multiply.outer, [w] * rank).ravel()
    expo = eta.T @ slopes - norms2 / (2.0 * sigma * sigma)
    padded = np.concatenate([np.zeros((expo.shape[0], 1)), expo], axis=1)
    return float((logsumexp(padded, axis=1) / math.log(2.0)) @ wt)


def pearson_oracle(a, b) -> float:
    return float(np.corrcoef(np.asarray(a, float), np.asarray(b, float))[0, 1])
