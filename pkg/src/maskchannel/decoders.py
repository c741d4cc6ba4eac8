"""Support decoders for masked query data.

Four decoders recover the active coordinate set from (masks, responses):

* ``ml_decode``       exhaustive likelihood search over all k-subsets
* ``lasso_decode``    l1-penalized fit, top-k support, debiasing refit
* ``ols_decode``      plain or ridge-regularized dense fit, top-k support
* ``ridge_decode``    dense ridge fit at an explicit penalty, top-k support

All least-squares subproblems run through one shared kernel
(:func:`ls_fit_on_support`) so that residual comparisons between
candidate supports are exact, never an artifact of two code paths
rounding differently.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numba import njit

from .errors import EnumerationCapError, InvalidArgumentError, MaskChannelError
from .model import ChannelConfig, MaskBatch, sample_trial
from .rng import TAG_TRIAL, derive

#: fixed ridge jitter added to the Gram diagonal of every on-support fit
LS_JITTER = 1e-10

#: ml_decode refuses to enumerate more candidate supports than this
ML_ENUMERATION_CAP = 10**6

#: relative residual tolerance under which two supports count as tied
ML_TIE_RTOL = 1e-12

#: Gram condition number beyond which ols_decode falls back to ridge
OLS_CONDITION_LIMIT = 1e8

DECODER_NAMES = ("ml", "lasso", "ols", "ridge")


@dataclass(frozen=True)
class DecodeResult:
    """Decoded support with its fitted coefficients and residual."""

    support: tuple[int, ...]
    coefficients: np.ndarray
    residual_ss: float
    tie_broken: bool
    converged: bool = True

    def __post_init__(self):
        sup = tuple(int(i) for i in self.support)
        if list(sup) != sorted(set(sup)):
            raise InvalidArgumentError(f"support must be strictly increasing, got {sup}")
        coef = np.asarray(self.coefficients, dtype=float)
        coef.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "coefficients", coef)


@dataclass(frozen=True)
class LassoSettings:
    """Penalty and iteration controls for the coordinate-descent solver."""

    lambda_: float
    max_iterations: int = 2000
    tolerance: float = 1e-10
    standardize: bool = False

    def __post_init__(self):
        if self.lambda_ < 0:
            raise InvalidArgumentError(f"lambda_ must be >= 0, got {self.lambda_}")
        if self.max_iterations < 1:
            raise InvalidArgumentError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.tolerance <= 0:
            raise InvalidArgumentError(f"tolerance must be > 0, got {self.tolerance}")


@dataclass(frozen=True)
class RecoveryStats:
    """Empirical support-recovery rate with its binomial standard error."""

    rate: float
    std_error: float
    n_success: int
    n_trials: int
    n_decode_errors: int


def default_lasso_penalty(sigma: float, d: int, t: int) -> float:
    """Universal-threshold style default: 0.1 * sigma * sqrt(2 ln d) * sqrt(T)."""
    if d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d}")
    if sigma < 0 or t < 0:
        raise InvalidArgumentError("sigma and t must be >= 0")
    return 0.1 * sigma * math.sqrt(2.0 * math.log(d)) * math.sqrt(t)


def _as_bits(masks) -> np.ndarray:
    return masks.bits if isinstance(masks, MaskBatch) else np.asarray(masks, dtype=float)


def _ls_kernel(bits: np.ndarray, y: np.ndarray, idx) -> tuple[np.ndarray, float]:
    """Jittered normal-equation LS on the given columns; direct residual."""
    idx = list(idx)
    if not idx:
        return np.empty(0), float(y @ y)
    zs = bits[:, idx]
    g = zs.T @ zs
    g[np.diag_indices_from(g)] += LS_JITTER
    beta = np.linalg.solve(g, zs.T @ y)
    resid = y - zs @ beta
    return beta, float(resid @ resid)


def ls_fit_on_support(masks, responses, support) -> tuple[np.ndarray, float]:
    """Least squares restricted to ``support`` columns.

    Solves the normal equations with a fixed ``LS_JITTER`` ridge term on
    the Gram diagonal (well-defined even for collinear or empty designs)
    and returns ``(coefficients, residual_ss)``.  An empty support
    returns ``([], |y|^2)``.
    """
    bits = _as_bits(masks)
    y = np.asarray(responses, dtype=float)
    sup = tuple(int(i) for i in support)
    if y.shape != (bits.shape[0],):
        raise InvalidArgumentError(
            f"responses shape {y.shape} does not match {bits.shape[0]} masks")
    if any(not 0 <= i < bits.shape[1] for i in sup):
        raise InvalidArgumentError(f"support indices must lie in [0, {bits.shape[1]})")
    if len(set(sup)) != len(sup):
        raise InvalidArgumentError(f"support must not repeat indices, got {sup}")
    return _ls_kernel(bits, y, sup)


def _scatter(d: int, support, values: np.ndarray) -> np.ndarray:
    out = np.zeros(d)
    if len(support):
        out[list(support)] = values
    return out


def ml_decode(masks, responses, k: int, enumeration_cap: int = ML_ENUMERATION_CAP) -> DecodeResult:
    """Exhaustive maximum-likelihood support search.

    Fits every k-subset through the shared LS kernel and returns the one
    with the smallest residual.  Candidates are enumerated in
    lexicographic order; residuals within ``ML_TIE_RTOL`` (relative to
    the problem scale) of the minimum count as tied and the first, i.e.
    lexicographically smallest, tied support wins with ``tie_broken``
    set.  Refuses instances with more than ``enumeration_cap`` subsets.
    """
    bits = _as_bits(masks)
    y = np.asarray(responses, dtype=float)
    t, d = bits.shape
    if not 1 <= k <= d:
        raise InvalidArgumentError(f"need 1 <= k <= d, got k={k}, d={d}")
    if y.shape != (t,):
        raise InvalidArgumentError(f"responses shape {y.shape} does not match {t} masks")
    n_candidates = math.comb(d, k)
    if n_candidates > enumeration_cap:
        raise EnumerationCapError(
            f"C({d}, {k}) = {n_candidates} candidate supports exceeds the "
            f"enumeration cap of {enumeration_cap}"
        )
    supports = list(combinations(range(d), k))
    residuals = np.empty(n_candidates)
    for i, sup in enumerate(supports):
        _, residuals[i] = _ls_kernel(bits, y, sup)
    rss_min = float(residuals.min())
    tol = ML_TIE_RTOL * max(rss_min, float(y @ y))
    tied = np.flatnonzero(residuals <= rss_min + tol)
    winner = supports[tied[0]]
    beta, rss = _ls_kernel(bits, y, winner)
    return DecodeResult(
        support=winner,
        coefficients=_scatter(d, winner, beta),
        residual_ss=rss,
        tie_broken=len(tied) > 1,
    )


@njit(cache=True, nogil=True)
def _cd_lasso(z, y, lam, max_iter, threshold):  # pragma: no cover - jitted
    t, d = z.shape
    beta = np.zeros(d)
    r = y.copy()
    col_sq = np.zeros(d)
    for j in range(d):
        s = 0.0
        for i in range(t):
            s += z[i, j] * z[i, j]
        col_sq[j] = s
    n_iter = 0
    converged = False
    while n_iter < max_iter:
        n_iter += 1
        max_delta = 0.0
        for j in range(d):
            cj = col_sq[j]
            if cj == 0.0:
                continue
            old = beta[j]
            rho = cj * old
            for i in range(t):
                rho += z[i, j] * r[i]
            if rho > lam:
                new = (rho - lam) / cj
            elif rho < -lam:
                new = (rho + lam) / cj
            else:
                new = 0.0
            if new != old:
                delta = new - old
                for i in range(t):
                    r[i] -= z[i, j] * delta
                beta[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < threshold:
            converged = True
            break
    return beta, n_iter, converged


def _top_k(beta: np.ndarray, k: int) -> tuple[tuple[int, ...], bool]:
    """Indices of the k largest |beta|; ties resolve toward smaller index."""
    magnitudes = np.abs(beta)
    order = np.argsort(-magnitudes, kind="stable")
    chosen = tuple(int(i) for i in np.sort(order[:k]))
    tie = 0 < k < beta.size and magnitudes[order[k - 1]] == magnitudes[order[k]]
    return chosen, bool(tie)


def lasso_decode(masks, responses, k: int, settings: LassoSettings) -> DecodeResult:
    """l1-penalized support recovery with a debiasing refit.

    Minimizes ``0.5 |y - Z beta|^2 + lambda |beta|_1`` by cyclic
    coordinate descent with soft thresholding.  The sweep stops when the
    largest coordinate change falls below an internal threshold derived
    from ``settings.tolerance`` and the Gram row sums, which guarantees
    every stationarity residual is within ``settings.tolerance`` of its
    target; hitting ``max_iterations`` first returns ``converged=False``
    rather than raising.  The support is the k largest |beta| (ties
    toward smaller indices, flagged), and the reported coefficients and
    residual come from an unpenalized refit on that support.
    """
    bits = _as_bits(masks)
    y = np.asarray(responses, dtype=float)
    t, d = bits.shape
    if not 0 <= k <= d:
        raise InvalidArgumentError(f"need 0 <= k <= d, got k={k}, d={d}")
    if y.shape != (t,):
        raise InvalidArgumentError(f"responses shape {y.shape} does not match {t} masks")

    z = bits
    scale = None
    if settings.standardize:
        norms = np.sqrt(np.einsum("td,td->d", bits, bits))
        scale = np.where(norms > 0, norms, 1.0)
        z = bits / scale

    gram_abs = np.abs(z.T @ z)
    np.fill_diagonal(gram_abs, 0.0)
    row_sums = gram_abs.sum(axis=1)
    internal = settings.tolerance / max(1.0, float(row_sums.max()) if d else 1.0)

    beta, _, converged = _cd_lasso(
        np.ascontiguousarray(z), np.ascontiguousarray(y),
        float(settings.lambda_), int(settings.max_iterations), float(internal))
    if settings.standardize:
        beta = beta / scale

    support, tie = _top_k(beta, k)
    refit, rss = _ls_kernel(bits, y, support)
    return DecodeResult(
        support=support,
        coefficients=_scatter(d, support, refit),
        residual_ss=rss,
        tie_broken=tie,
        converged=bool(converged),
    )


def _dense_top_k(bits: np.ndarray, y: np.ndarray, beta: np.ndarray, k: int) -> DecodeResult:
    support, tie = _top_k(beta, k)
    resid = y - bits @ beta
    return DecodeResult(
        support=support,
        coefficients=beta,
        residual_ss=float(resid @ resid),
        tie_broken=tie,
    )


def ols_decode(masks, responses, k: int) -> DecodeResult:
    """Dense least-squares baseline with automatic ridge fallback.

    Solves the full normal equations when the system is square-or-tall
    and the Gram condition estimate stays below ``OLS_CONDITION_LIMIT``;
    otherwise applies a mean-eigenvalue ridge ``tr(G)/d``, which keeps
    the undersampled fit well-posed without hand tuning.  Support is
    the k largest |beta| of the dense fit; coefficients are the full
    dense vector (not refit).
    """
    bits = _as_bits(masks)
    y = np.asarray(responses, dtype=float)
    t, d = bits.shape
    if not 0 <= k <= d:
        raise InvalidArgumentError(f"need 0 <= k <= d, got k={k}, d={d}")
    if y.shape != (t,):
        raise InvalidArgumentError(f"responses shape {y.shape} does not match {t} masks")
    gram = bits.T @ bits
    b = bits.T @ y
    use_plain = t >= d and np.isfinite(cond := np.linalg.cond(gram)) and cond < OLS_CONDITION_LIMIT
    if use_plain:
        beta = np.linalg.solve(gram, b)
    else:
        lam = max(float(np.trace(gram)) / d, 1e-12)
        beta = np.linalg.solve(gram + lam * np.eye(d), b)
    return _dense_top_k(bits, y, beta, k)


def ridge_decode(masks, responses, k: int, lambda_: float) -> DecodeResult:
    """Dense ridge fit at an explicit penalty; support is the top-k |beta|.

    The full coefficient vector is returned so callers can score it
    against a dense ground truth (e.g. by correlation).
    """
    bits = _as_bits(masks)
    y = np.asarray(responses, dtype=float)
    t, d = bits.shape
    if lambda_ < 0:
        raise InvalidArgumentError(f"lambda_ must be >= 0, got {lambda_}")
    if not 0 <= k <= d:
        raise InvalidArgumentError(f"need 0 <= k <= d, got k={k}, d={d}")
    if y.shape != (t,):
        raise InvalidArgumentError(f"responses shape {y.shape} does not match {t} masks")
    gram = bits.T @ bits + lambda_ * np.eye(d)
    beta = np.linalg.solve(gram, bits.T @ y)
    return _dense_top_k(bits, y, beta, k)


def _make_decoder(name: str, channel: ChannelConfig, t: int,
                  lasso_settings: LassoSettings | None, ridge_lambda: float | None):
    """Bind a decoder name to a (masks, responses) -> DecodeResult callable."""
    k = channel.k
    if name == "ml":
        return lambda m, y: ml_decode(m, y, k)
    if name == "lasso":
        settings = lasso_settings or LassoSettings(
            lambda_=default_lasso_penalty(channel.sigma, channel.d, t))
        return lambda m, y: lasso_decode(m, y, k, settings)
    if name == "ols":
        return lambda m, y: ols_decode(m, y, k)
    if name == "ridge":
        lam = 1.0 if ridge_lambda is None else ridge_lambda
        return lambda m, y: ridge_decode(m, y, k, lam)
    raise InvalidArgumentError(f"unknown decoder {name!r}; expected one of {DECODER_NAMES}")


def run_recovery_trials(channel: ChannelConfig, t: int, n_trials: int, decoders: dict,
                        seed, workers: int = 1) -> tuple[dict, dict]:
    """Shared-data recovery trials for one or more decoders.

    Trial ``i`` draws its ground truth, masks, and noise from substream
    ``(seed, TAG_TRIAL, i)`` and feeds the same dataset to every decoder,
    so cross-decoder comparisons are paired.  Returns
    ``(outcomes, errors)``: boolean success arrays and error tallies per
    decoder name.  A decoder raising on a trial counts as a failure.
    """
    if n_trials < 1:
        raise InvalidArgumentError(f"n_trials must be >= 1, got {n_trials}")
    if t < 0:
        raise InvalidArgumentError(f"t must be >= 0, got {t}")
    names = list(decoders)
    outcomes = {name: np.zeros(n_trials, dtype=bool) for name in names}
    errors = {name: np.zeros(n_trials, dtype=bool) for name in names}

    def run(i: int) -> None:
        phi, data = sample_trial(channel, t, derive(seed, TAG_TRIAL, i))
        truth = phi.support
        for name in names:
            try:
                result = decoders[name](data.masks, data.responses)
            except (MaskChannelError, np.linalg.LinAlgError):
                errors[name][i] = True
                continue
            outcomes[name][i] = result.support == truth

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(n_trials)))
    else:
        for i in range(n_trials):
            run(i)
    return outcomes, {name: int(errors[name].sum()) for name in names}


def support_recovery_probability(decoder: str, channel: ChannelConfig, t: int, n_trials: int,
                                 seed, *, lasso_settings: LassoSettings | None = None,
                                 ridge_lambda: float | None = None,
                                 workers: int = 1) -> RecoveryStats:
    """Empirical P(decoded support == true support) over derived-seed trials.

    The rate's standard error is the binomial ``sqrt(r (1 - r) / n)``.
    Decoder exceptions inside a trial count as failures and are tallied
    in ``n_decode_errors``.
    """
    fn = _make_decoder(decoder, channel, t, lasso_settings, ridge_lambda)
    outcomes, errors = run_recovery_trials(channel, t, n_trials, {decoder: fn}, seed,
                                           workers=workers)
    wins = outcomes[decoder]
    rate = float(wins.mean())
    return RecoveryStats(
        rate=rate,
        std_error=math.sqrt(rate * (1.0 - rate) / n_trials),
        n_success=int(wins.sum()),
        n_trials=n_trials,
        n_decode_errors=errors[decoder],
    )
