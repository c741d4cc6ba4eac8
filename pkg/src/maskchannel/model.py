"""Core generative model: sparse ground truth, mask batches, noisy oracles.

The object of study is a hidden vector with ``k`` active coordinates out
of ``d``.  An analyst probes it through binary masks: each query is a
0/1 row vector ``z`` and the oracle answers

    y = z . phi + alpha * z^T Q z + noise,        noise ~ N(0, sigma^2)

where the quadratic term (absent when ``alpha == 0``) models a curved,
non-additive oracle through a fixed symmetric interaction matrix ``Q``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInteractionError, InvalidArgumentError
from .rng import TAG_PHI, TAG_MASK, TAG_NOISE, TAG_CALIBRATION, derive, generator

AMPLITUDE_MODES = ("standard-normal", "signed-unit", "unit")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SparseExplanation:
    """A k-sparse hidden vector: ordered support plus nonzero amplitudes."""

    dim: int
    support: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.dim < 0:
            raise InvalidArgumentError(f"dim must be >= 0, got {self.dim}")
        sup = tuple(int(i) for i in self.support)
        if any(not 0 <= i < self.dim for i in sup):
            raise InvalidArgumentError(f"support indices must lie in [0, {self.dim}), got {sup}")
        if list(sup) != sorted(set(sup)):
            raise InvalidArgumentError(f"support must be strictly increasing, got {sup}")
        amps = np.asarray(self.amplitudes, dtype=float)
        if amps.shape != (len(sup),):
            raise InvalidArgumentError(
                f"amplitudes shape {amps.shape} does not match support size {len(sup)}"
            )
        if len(sup) and (~np.isfinite(amps)).any():
            raise InvalidArgumentError("amplitudes must be finite")
        if len(sup) and (amps == 0.0).any():
            raise InvalidArgumentError("amplitudes must all be nonzero")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "amplitudes", _readonly(amps))

    @property
    def sparsity(self) -> int:
        return len(self.support)

    def to_dense(self) -> np.ndarray:
        """Dense length-d vector with amplitudes scattered onto the support."""
        phi = np.zeros(self.dim)
        if self.support:
            phi[list(self.support)] = self.amplitudes
        return phi


@dataclass(frozen=True)
class MaskBatch:
    """T binary masks over d features, drawn i.i.d. Bernoulli(policy_p)."""

    bits: np.ndarray
    policy_p: float

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=float)
        if bits.ndim != 2:
            raise InvalidArgumentError(f"bits must be a 2-d array, got ndim={bits.ndim}")
        if not np.isin(bits, (0.0, 1.0)).all():
            raise InvalidArgumentError("mask entries must all be 0 or 1")
        if not 0.0 < self.policy_p < 1.0:
            raise InvalidArgumentError(f"policy_p must lie in (0, 1), got {self.policy_p}")
        object.__setattr__(self, "bits", _readonly(bits))

    @property
    def rows(self) -> int:
        return self.bits.shape[0]

    @property
    def dim(self) -> int:
        return self.bits.shape[1]


@dataclass(frozen=True)
class OracleModel:
    """A concrete oracle: ground truth, noise level, optional curvature.

    ``interaction`` must be present exactly when ``alpha > 0``; a linear
    oracle carries no interaction matrix.
    """

    phi_star: SparseExplanation
    sigma: float
    alpha: float = 0.0
    interaction: np.ndarray | None = None

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidArgumentError(f"sigma must be >= 0, got {self.sigma}")
        if self.alpha < 0:
            raise InvalidArgumentError(f"alpha must be >= 0, got {self.alpha}")
        if self.alpha > 0:
            if self.interaction is None:
                raise InvalidArgumentError("alpha > 0 requires an interaction matrix")
            q = np.asarray(self.interaction, dtype=float)
            d = self.phi_star.dim
            if q.shape != (d, d):
                raise InvalidArgumentError(f"interaction must be ({d}, {d}), got {q.shape}")
            if not np.array_equal(q, q.T):
                raise InvalidArgumentError("interaction matrix must be symmetric")
            object.__setattr__(self, "interaction", _readonly(q))
        elif self.interaction is not None:
            raise InvalidArgumentError("interaction matrix is only meaningful when alpha > 0")


@dataclass(frozen=True)
class QueryDataset:
    """Masks plus oracle responses, tagged with the generating noise regime."""

    masks: MaskBatch
    responses: np.ndarray
    oracle_fingerprint: tuple[float, float]  # (sigma, alpha)

    def __post_init__(self):
        y = np.asarray(self.responses, dtype=float)
        if y.shape != (self.masks.rows,):
            raise InvalidArgumentError(
                f"responses shape {y.shape} does not match {self.masks.rows} masks"
            )
        object.__setattr__(self, "responses", _readonly(y))
        object.__setattr__(
            self, "oracle_fingerprint", tuple(float(v) for v in self.oracle_fingerprint)
        )


@dataclass(frozen=True)
class ChannelConfig:
    """Ensemble description used when many trials draw fresh ground truths."""

    d: int
    k: int
    sigma: float
    p: float = 0.5
    amplitude_mode: str = "standard-normal"
    alpha: float = 0.0
    interaction: np.ndarray | None = None

    def __post_init__(self):
        if not 0 <= self.k <= self.d:
            raise InvalidArgumentError(f"need 0 <= k <= d, got k={self.k}, d={self.d}")
        if self.sigma < 0:
            raise InvalidArgumentError(f"sigma must be >= 0, got {self.sigma}")
        if not 0.0 < self.p < 1.0:
            raise InvalidArgumentError(f"p must lie in (0, 1), got {self.p}")
        if self.amplitude_mode not in AMPLITUDE_MODES:
            raise InvalidArgumentError(
                f"amplitude_mode must be one of {AMPLITUDE_MODES}, got {self.amplitude_mode!r}"
            )
        if self.alpha < 0:
            raise InvalidArgumentError(f"alpha must be >= 0, got {self.alpha}")
        if (self.alpha > 0) != (self.interaction is not None):
            raise InvalidArgumentError("interaction must be supplied exactly when alpha > 0")
        if self.interaction is not None:
            object.__setattr__(self, "interaction", _readonly(np.asarray(self.interaction, float)))

    def oracle_for(self, phi: SparseExplanation) -> OracleModel:
        return OracleModel(phi, self.sigma, self.alpha, self.interaction)


def sample_sparse_explanation(d: int, k: int, amplitude_mode: str, seed) -> SparseExplanation:
    """Draw a uniformly random k-subset support with i.i.d. amplitudes.

    Modes: ``standard-normal`` draws N(0,1) amplitudes, ``signed-unit``
    draws uniform +/-1, and ``unit`` fixes every amplitude to +1 (the
    degenerate prior in which the vector and its support are in
    bijection).
    """
    if not 0 <= k <= d:
        raise InvalidArgumentError(f"need 0 <= k <= d, got k={k}, d={d}")
    if amplitude_mode not in AMPLITUDE_MODES:
        raise InvalidArgumentError(
            f"amplitude_mode must be one of {AMPLITUDE_MODES}, got {amplitude_mode!r}"
        )
    rng = generator(seed)
    support = np.sort(rng.choice(d, size=k, replace=False)) if k else np.empty(0, dtype=int)
    if amplitude_mode == "standard-normal":
        amps = rng.standard_normal(k)
        while k and (amps == 0.0).any():  # measure-zero, but the contract says nonzero
            amps[amps == 0.0] = rng.standard_normal(np.count_nonzero(amps == 0.0))
    elif amplitude_mode == "signed-unit":
        amps = rng.choice((-1.0, 1.0), size=k)
    else:
        amps = np.ones(k)
    return SparseExplanation(d, tuple(int(i) for i in support), amps)


def sample_mask_batch(d: int, t: int, p: float, seed) -> MaskBatch:
    """Draw a T x d batch of i.i.d. Bernoulli(p) masks."""
    if d < 1:
        raise InvalidArgumentError(f"d must be >= 1, got {d}")
    if t < 0:
        raise InvalidArgumentError(f"t must be >= 0, got {t}")
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"p must lie in (0, 1), got {p}")
    rng = generator(seed)
    bits = (rng.random((t, d)) < p).astype(float)
    return MaskBatch(bits, p)


def quadratic_form(masks: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise z^T Q z for a stack of masks."""
    return np.einsum("ti,ij,tj->t", masks, q, masks)


def oracle_evaluate(masks: MaskBatch, model: OracleModel, seed) -> QueryDataset:
    """Query the oracle on every mask row and return the dataset.

    Responses are ``z.phi + alpha z^T Q z + eps`` with fresh
    N(0, sigma^2) noise per row drawn from ``seed``.
    """
    if masks.dim != model.phi_star.dim:
        raise InvalidArgumentError(
            f"mask dim {masks.dim} does not match phi dim {model.phi_star.dim}"
        )
    z = masks.bits
    y = z @ model.phi_star.to_dense()
    if model.alpha > 0:
        y = y + model.alpha * quadratic_form(z, model.interaction)
    if model.sigma > 0:
        y = y + model.sigma * generator(seed, TAG_NOISE).standard_normal(masks.rows)
    return QueryDataset(masks, y, (model.sigma, model.alpha))


def sample_trial(channel: ChannelConfig, t: int, seed) -> tuple[SparseExplanation, QueryDataset]:
    """One draw-and-query cycle: fresh ground truth, masks, responses.

    Substreams are derived from ``seed`` per purpose, so two calls with
    the same seed but different downstream consumers see identical data.
    """
    phi = sample_sparse_explanation(channel.d, channel.k, channel.amplitude_mode,
                                    derive(seed, TAG_PHI))
    masks = sample_mask_batch(channel.d, t, channel.p, derive(seed, TAG_MASK))
    data = oracle_evaluate(masks, channel.oracle_for(phi), seed)
    return phi, data


def interference_power(q: np.ndarray, p: float, n_cal: int, seed) -> float:
    """Monte Carlo estimate of E[(z^T Q z)^2] under Bernoulli(p) masks."""
    rng = generator(seed, TAG_CALIBRATION)
    z = (rng.random((n_cal, q.shape[0])) < p).astype(float)
    return float(np.mean(quadratic_form(z, q) ** 2))


def scale_interaction_matrix(q_raw: np.ndarray, phi_star: SparseExplanation, p: float,
                             n_cal: int, seed) -> np.ndarray:
    """Rescale Q so its quadratic power matches the linear signal power.

    Returns ``c * q_raw`` with ``c > 0`` chosen so the Monte Carlo
    estimates (over ``n_cal`` shared Bernoulli(p) mask draws) satisfy
    ``E[(z^T (cQ) z)^2] == E[(z . phi_star)^2]``.  Because the estimate
    scales exactly as c^2, the match is exact on the calibration sample;
    on fresh samples it holds to the Monte Carlo error of ``n_cal``.
    """
    q = np.asarray(q_raw, dtype=float)
    d = phi_star.dim
    if q.shape != (d, d):
        raise InvalidArgumentError(f"q_raw must be ({d}, {d}), got {q.shape}")
    if not np.array_equal(q, q.T):
        raise InvalidArgumentError("q_raw must be symmetric")
    if phi_star.sparsity == 0:
        raise InvalidArgumentError("phi_star must have a nonempty support to calibrate against")
    if not 0.0 < p < 1.0:
        raise InvalidArgumentError(f"p must lie in (0, 1), got {p}")
    if n_cal < 1:
        raise InvalidArgumentError(f"n_cal must be >= 1, got {n_cal}")
    rng = generator(seed, TAG_CALIBRATION)
    z = (rng.random((n_cal, d)) < p).astype(float)
    signal_power = float(np.mean((z @ phi_star.to_dense()) ** 2))
    quad_power = float(np.mean(quadratic_form(z, q) ** 2))
    if quad_power == 0.0:
        raise DegenerateInteractionError(
            "interaction matrix has zero quadratic power under the mask policy; "
            "it cannot be calibrated"
        )
    if signal_power == 0.0:
        raise DegenerateInteractionError(
            "phi_star has zero signal power on the calibration masks; cannot calibrate"
        )
    c = float(np.sqrt(signal_power / quad_power))
    return c * q
