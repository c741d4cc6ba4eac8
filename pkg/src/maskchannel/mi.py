"""Monte Carlo estimation of the information extracted by T masked queries.

The estimator targets I(phi; Y^T | Z^T) for the linear Gaussian oracle.
For each of ``n_outer`` independent triples (phi_i, Z_i, Y_i) it compares
the conditional likelihood of the observed responses against a marginal
estimated from ``n_inner`` pre-generated prior support draws:

    I_hat = mean_i log2 [ p(Y_i | Z_i, phi_i) / mean_j p(Y_i | Z_i, S_j) ]

where p(Y | Z, S_j) is the likelihood with the amplitudes on support S_j
integrated out in closed form: the exact Gaussian integral for
standard-normal amplitudes (a rank-k update of the noise covariance,
evaluated through the k x k matrix I + Z_S^T Z_S / sigma^2), the exact
two-point average for signed-unit amplitudes, and the point likelihood
for fixed unit amplitudes.  Averaging single amplitude draws instead
underestimates the marginal so badly once T sigma^-2 is large that the
ratio inflates by tens of bits; integrating the amplitudes per sampled
support removes that failure mode while leaving the estimand unchanged
(the average over supports of the integrated likelihood is the same
marginal p(Y | Z)).  The residual bias from sampling supports is upward
and shrinks as n_inner covers the support space.

The inner average is evaluated in log space with a max-shifted
log-sum-exp; at sigma ~ 0.1 and T beyond a few dozen queries the raw
likelihoods underflow double precision by hundreds of orders of
magnitude, so the log-domain form is a necessity, not a nicety.  The
reported std_error is the sample standard error of the per-triple log
ratios.

For the amplitude-integrating modes, likelihood energies use the Gram
identity ``|Y - Z phi|^2 = |Y|^2 - 2 b.phi + phi^T G phi`` with
``G = Z^T Z`` and ``b = Z^T Y``, which costs O(k^2) per inner sample
instead of O(T).  Fixed unit amplitudes skip the pairwise Gram gather
(quadratic in k, prohibitive for the resolution sweep's large supports)
and evaluate residuals against the masked support sums ``Z 1_S``.

Determinism: outer triple i draws from substream (seed, TAG_MI_OUTER, t, i)
and the inner bank from (seed, TAG_MI_INNER, t).  Work is chunked in
fixed blocks of ``_BLOCK`` outer samples regardless of worker count, and
per-block results are written into index-addressed slots before a fixed
order reduction, so any worker count yields bit-identical estimates.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvalidArgumentError
from .model import AMPLITUDE_MODES, QueryDataset, SparseExplanation
from .rng import TAG_MI_INNER, TAG_MI_OUTER, derive, generator

_BLOCK = 64  # fixed computational chunk; independent of worker count
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class MiConfig:
    """Channel and sampling configuration for the MI estimator."""

    d: int
    k: int
    sigma: float
    p: float = 0.5
    n_outer: int = 2000
    n_inner: int = 2000
    t_grid: tuple[int, ...] = ()
    seed: int = 0
    amplitude_mode: str = "standard-normal"

    def __post_init__(self):
        if not 0 <= self.k <= self.d:
            raise InvalidArgumentError(f"need 0 <= k <= d, got k={self.k}, d={self.d}")
        if self.sigma <= 0:
            raise InvalidArgumentError(
                f"sigma must be > 0 for a nondegenerate likelihood, got {self.sigma}"
            )
        if not 0.0 < self.p < 1.0:
            raise InvalidArgumentError(f"p must lie in (0, 1), got {self.p}")
        if self.n_outer < 1:
            raise InvalidArgumentError(f"n_outer must be >= 1, got {self.n_outer}")
        if self.n_inner < 2:
            raise InvalidArgumentError(f"n_inner must be >= 2, got {self.n_inner}")
        if self.amplitude_mode not in AMPLITUDE_MODES:
            raise InvalidArgumentError(
                f"amplitude_mode must be one of {AMPLITUDE_MODES}, got {self.amplitude_mode!r}"
            )
        grid = tuple(int(t) for t in self.t_grid)
        if any(t < 0 for t in grid):
            raise InvalidArgumentError(f"t_grid entries must be >= 0, got {grid}")
        if list(grid) != sorted(grid) or len(set(grid)) != len(grid):
            raise InvalidArgumentError(f"t_grid must be strictly increasing, got {grid}")
        object.__setattr__(self, "t_grid", grid)


@dataclass(frozen=True)
class MiEstimate:
    """One estimate of I(phi; Y^T | Z^T) in bits."""

    t: int
    value_bits: float
    std_error_bits: float
    n_outer: int
    n_inner: int

    def __post_init__(self):
        if self.t < 0:
            raise InvalidArgumentError(f"t must be >= 0, got {self.t}")
        if self.std_error_bits < 0:
            raise InvalidArgumentError("std_error_bits must be >= 0")


def gaussian_log_likelihood(dataset: QueryDataset, phi: SparseExplanation, sigma: float) -> float:
    """log p(Y | Z, phi) in nats for the linear Gaussian channel.

    Sums the per-query terms -0.5 log(2 pi sigma^2) - (y - z.phi)^2 / (2 sigma^2).
    An empty dataset has log-likelihood exactly 0.
    """
    if sigma <= 0:
        raise InvalidArgumentError(f"sigma must be > 0, got {sigma}")
    if dataset.masks.dim != phi.dim:
        raise InvalidArgumentError(
            f"dataset dim {dataset.masks.dim} does not match phi dim {phi.dim}"
        )
    t = dataset.masks.rows
    if t == 0:
        return 0.0
    resid = dataset.responses - dataset.masks.bits @ phi.to_dense()
    return float(-0.5 * t * math.log(2.0 * math.pi * sigma * sigma)
                 - float(resid @ resid) / (2.0 * sigma * sigma))


def _sample_prior_bank(config: MiConfig, n: int, seed) -> np.ndarray:
    """n i.i.d. uniform support draws as an (n, k) sorted index array.

    The k smallest entries of a row of i.i.d. uniforms index a uniformly
    random k-subset.  Amplitudes are not drawn: the marginal integrates
    them out per support.
    """
    rng = generator(seed)
    d, k = config.d, config.k
    if k == 0:
        return np.empty((n, 0), dtype=np.intp)
    return np.sort(np.argpartition(rng.random((n, d)), k - 1, axis=1)[:, :k], axis=1)


def _inner_log_likelihoods(config: MiConfig, u: np.ndarray, gblk: np.ndarray,
                           y_sq: np.ndarray) -> np.ndarray:
    """Amplitude-integrated log p(Y | Z, S_j) per (outer, inner), constant dropped.

    Handles the two modes with a nondegenerate amplitude prior.  ``u`` is
    the gathered (B, n, k) array of Z^T Y entries on each inner support,
    ``gblk`` the gathered (B, n, k, k) Gram blocks, ``y_sq`` the (B,)
    squared response norms.  The Gaussian constant -T/2 log(2 pi sigma^2)
    is omitted; it cancels against the numerator.
    """
    sigma2 = config.sigma * config.sigma
    inv2s2 = 0.5 / sigma2
    if config.amplitude_mode == "standard-normal":
        # Y | Z, S ~ N(0, sigma^2 I + Z_S Z_S^T); Woodbury through the
        # k x k matrix M = I + Z_S^T Z_S / sigma^2:
        #   log det(Sigma) = T log sigma^2 + log det M
        #   Y^T Sigma^-1 Y = (|Y|^2 - u^T M^-1 u / sigma^2) / sigma^2
        k = u.shape[-1]
        m = gblk / sigma2 + np.eye(k)
        _, logdet = np.linalg.slogdet(m)
        w = np.einsum("bnk,bnk->bn", u, np.linalg.solve(m, u[..., None])[..., 0])
        return -0.5 * (logdet + (y_sq[:, None] - w / sigma2) / sigma2)
    if config.amplitude_mode == "signed-unit":
        # exact average over the 2^k equiprobable sign patterns,
        # accumulated as a streaming log-sum-exp in a fixed pattern order
        k = u.shape[-1]
        run_max = None
        run_sum = None
        for pattern in itertools.product((1.0, -1.0), repeat=k):
            pat = np.asarray(pattern)
            energy = (y_sq[:, None] - 2.0 * (u @ pat)
                      + np.einsum("a,bnac,c->bn", pat, gblk, pat))
            val = -energy * inv2s2
            if run_max is None:
                run_max, run_sum = val, np.ones_like(val)
            else:
                new_max = np.maximum(run_max, val)
                run_sum = run_sum * np.exp(run_max - new_max) + np.exp(val - new_max)
                run_max = new_max
        return run_max + np.log(run_sum) - k * _LN2
    raise InvalidArgumentError(  # pragma: no cover - guarded by the caller
        f"no amplitude integral for mode {config.amplitude_mode!r}")


def _block_log_ratios(config: MiConfig, t: int, block_index: int, block_size: int,
                      inner_sup: np.ndarray, inner_aux: np.ndarray) -> np.ndarray:
    """Per-outer log2 likelihood ratios for one fixed block of outer samples.

    ``inner_aux`` carries the precomputed per-bank structure: flattened
    Gram index pairs for the amplitude-integrating modes, or the dense
    (n, d) support indicator for fixed unit amplitudes.
    """
    d, k = config.d, config.k
    n_in = inner_sup.shape[0]
    inv2s2 = 0.5 / (config.sigma * config.sigma)

    z_blk = np.empty((block_size, t, d))
    y_blk = np.empty((block_size, t))
    phi_blk = np.zeros((block_size, d))
    for j in range(block_size):
        i = block_index * _BLOCK + j
        rng = generator(derive(config.seed, TAG_MI_OUTER, t, i))
        sup = np.sort(rng.choice(d, size=k, replace=False)) if k else np.empty(0, dtype=int)
        if config.amplitude_mode == "standard-normal":
            amps = rng.standard_normal(k)
        elif config.amplitude_mode == "signed-unit":
            amps = rng.choice((-1.0, 1.0), size=k)
        else:
            amps = np.ones(k)
        z = (rng.random((t, d)) < config.p).astype(float)
        phi_blk[j, sup] = amps
        noise = rng.standard_normal(t)
        z_blk[j] = z
        y_blk[j] = z @ phi_blk[j] + config.sigma * noise

    # numerator: log p(Y | Z, phi_true), with the Gaussian constant dropped
    # (it cancels against the identical constant in the marginal).
    resid = y_blk - np.einsum("btd,bd->bt", z_blk, phi_blk)
    log_num = -np.einsum("bt,bt->b", resid, resid) * inv2s2

    if k == 0:
        # the only explanation is the zero vector; ratio is exactly one
        y_sq = np.einsum("bt,bt->b", y_blk, y_blk)
        log_marg = -y_sq * inv2s2
    elif config.amplitude_mode == "unit":
        # point-mass prior: evaluate residuals against the masked support
        # sums Z 1_S for the whole bank in one batched product
        proj = np.matmul(z_blk, inner_aux.T)
        resid_in = y_blk[:, :, None] - proj
        log_inner = -np.einsum("btn,btn->bn", resid_in, resid_in) * inv2s2
        log_marg = logsumexp(log_inner, axis=1) - math.log(n_in)
    else:
        # marginal over the shared inner support bank via the Gram identity
        gram = np.matmul(z_blk.transpose(0, 2, 1), z_blk).reshape(block_size, d * d)
        b_vec = np.einsum("btd,bt->bd", z_blk, y_blk)
        y_sq = np.einsum("bt,bt->b", y_blk, y_blk)
        u = b_vec[:, inner_sup]
        gblk = gram[:, inner_aux].reshape(block_size, n_in, k, k)
        log_inner = _inner_log_likelihoods(config, u, gblk, y_sq)
        log_marg = logsumexp(log_inner, axis=1) - math.log(n_in)
    return (log_num - log_marg) / _LN2


def estimate_mutual_information(config: MiConfig, t: int, workers: int = 1) -> MiEstimate:
    """Estimate the bits extracted by t queries under ``config``.

    ``t == 0`` returns exactly zero: no observations carry no information.
    ``workers`` only schedules fixed blocks concurrently; results are
    bit-identical for any worker count.
    """
    if t < 0:
        raise InvalidArgumentError(f"t must be >= 0, got {t}")
    if workers < 0:
        raise InvalidArgumentError(f"workers must be >= 0, got {workers}")
    if t == 0:
        return MiEstimate(0, 0.0, 0.0, config.n_outer, config.n_inner)

    inner_sup = _sample_prior_bank(config, config.n_inner, derive(config.seed, TAG_MI_INNER, t))
    k = config.k
    if k == 0:
        inner_aux = np.empty((config.n_inner, 0))
    elif config.amplitude_mode == "unit":
        # dense 0/1 indicator of each inner support
        inner_aux = np.zeros((config.n_inner, config.d))
        np.put_along_axis(inner_aux, inner_sup, 1.0, axis=1)
    else:
        # flattened (row, col) Gram index pairs per inner support
        inner_aux = (inner_sup[:, :, None] * config.d
                     + inner_sup[:, None, :]).reshape(-1, k * k)

    n_blocks = (config.n_outer + _BLOCK - 1) // _BLOCK
    sizes = [min(_BLOCK, config.n_outer - b * _BLOCK) for b in range(n_blocks)]
    ratios: list[np.ndarray | None] = [None] * n_blocks

    def run(b: int) -> None:
        ratios[b] = _block_log_ratios(config, t, b, sizes[b], inner_sup, inner_aux)

    if workers == 0:
        workers = min(n_blocks, max(1, os.cpu_count() or 1))
    if workers > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(n_blocks)))
    else:
        for b in range(n_blocks):
            run(b)

    all_ratios = np.concatenate(ratios)
    value = float(np.mean(all_ratios))
    if config.n_outer > 1:
        se = float(np.std(all_ratios, ddof=1) / math.sqrt(config.n_outer))
    else:
        se = 0.0
    return MiEstimate(t, value, se, config.n_outer, config.n_inner)


@dataclass(frozen=True)
class ThresholdScan:
    """Grid scan for the smallest budget whose estimate reaches the entropy."""

    t_it: int | None
    entropy_bits: float
    estimates: tuple[MiEstimate, ...]


def find_information_threshold(config: MiConfig, workers: int = 1) -> ThresholdScan:
    """Scan ``config.t_grid`` for the first T with I_hat(T) >= support entropy.

    Returns the full estimate table; ``t_it`` is None when no grid point
    reaches the entropy.
    """
    from .information import support_entropy

    if not config.t_grid:
        raise InvalidArgumentError("config.t_grid must be nonempty for a threshold scan")
    h = support_entropy(config.d, config.k)
    estimates = []
    t_it = None
    for t in config.t_grid:
        est = estimate_mutual_information(config, t, workers=workers)
        estimates.append(est)
        if t_it is None and est.value_bits >= h:
            t_it = t
    return ThresholdScan(t_it, h, tuple(estimates))
