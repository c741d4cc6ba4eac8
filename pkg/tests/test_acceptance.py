"""End-to-end acceptance gate.

Eight verdicts, one test each, printing ``criterion N (...): PASS|FAIL``
(visible with ``pytest -s`` or in captured output).  The heavyweight
sweeps behind the middle criteria run once at module scope and are
shared by the tests that read them.
"""

import math
from contextlib import contextmanager

import numpy as np
import pytest

from helpers import (brute_force_ml, invert_ls_oracle, lasso_kkt_violation,
                     quadrature_mi_single_feature)
from maskchannel.cli import main
from maskchannel.decoders import (LS_JITTER, LassoSettings, _cd_lasso, lasso_decode,
                                  ls_fit_on_support, ml_decode)
from maskchannel.errors import InvalidArgumentError
from maskchannel.experiments import (run_achievability_sweep, run_curvature_sweep,
                                     run_noise_sweep, run_resolution_sweep)
from maskchannel.information import capacity_envelope, support_entropy
from maskchannel.mi import MiConfig, estimate_mutual_information
from maskchannel.model import ChannelConfig, sample_trial
from maskchannel.rng import derive


@contextmanager
def _verdict(num: int, name: str):
    try:
        yield
    except BaseException:
        print(f"criterion {num} ({name}): FAIL")
        raise
    print(f"criterion {num} ({name}): PASS")


# ---------------------------------------------------------------------------
# shared sweeps (computed once; worker count never changes values)


@pytest.fixture(scope="module")
def achievability():
    return run_achievability_sweep(d=12, k=2, sigma=0.1, p=0.5, t_grid=range(2, 61),
                                   n_trials=500, n_outer=2000, n_inner=2000,
                                   seed=0, workers=4)


@pytest.fixture(scope="module")
def waterfall():
    return run_noise_sweep(d=40, k=3, t=25, p=0.5,
                           sigma_grid=np.geomspace(0.05, 6.0, 12),
                           n_trials=400, seed=0)


@pytest.fixture(scope="module")
def error_floor():
    return run_curvature_sweep(d=40, k=3, t=25, p=0.5,
                               alpha_grid=(0.05, 0.1, 0.2, 0.4, 0.7, 1.0,
                                           1.5, 2.0, 3.0, 4.0, 6.0, 8.0),
                               n_trials=400, q_seed=1, seed=0)


@pytest.fixture(scope="module")
def resolution():
    return run_resolution_sweep(width=64, height=64, salient_rect=(4, 4, 33, 33),
                                d_grid=(4, 9, 16, 25, 36, 64, 100, 144, 196, 240),
                                t=120, sigma=80.0, p=0.5, lambda_ridge=2.0,
                                n_trials=200, mi_n_outer=500, mi_n_inner=500,
                                seed=0, workers=4)


# ---------------------------------------------------------------------------


def test_criterion_1_entropy_exactness():
    with _verdict(1, "support entropy exactness"):
        assert abs(support_entropy(12, 2) - math.log2(66)) <= 1e-9
        # exactness against integer binomials wherever they are exact
        for d in (3, 17, 64, 128, 300):
            for k in range(0, d + 1, max(1, d // 7)):
                assert abs(support_entropy(d, k) - math.log2(math.comb(d, k))) <= 1e-9
        # symmetry H(d, k) = H(d, d-k) up to d = 10^4
        for d in (10, 100, 999, 4096, 9973, 10_000):
            for k in {0, 1, 2, 5, d // 3, d // 2, d - 1, d}:
                assert support_entropy(d, k) == pytest.approx(
                    support_entropy(d, d - k), abs=1e-9)
        # strict growth in d at fixed k up to d = 10^4
        for k in (1, 3, 7):
            prev = -1.0
            for d in range(k, 10_001, 53):
                h = support_entropy(d, k)
                assert h > prev
                prev = h


def test_criterion_2_mi_estimator_calibration(achievability):
    with _verdict(2, "information estimator calibration"):
        # four-hypothesis degenerate configuration: the numerically
        # integrated value is 2 bits to 1e-3 and the estimate agrees
        integrated, int_se = quadrature_mi_single_feature(4, 0.01, 50, n_z=200)
        assert abs(integrated - 2.0) <= 1e-3
        est = estimate_mutual_information(
            MiConfig(d=4, k=1, sigma=0.01, p=0.5, n_outer=600, n_inner=600,
                     seed=0, amplitude_mode="unit"), 50, workers=4)
        assert abs(est.value_bits - integrated) <= 3 * est.std_error_bits + int_se
        # per-query envelope: at no budget does the estimate exceed
        # T times the single-query capacity bound
        c_env = capacity_envelope(2, 0.1, 0.5)
        for row in achievability.rows:
            e = row.mi_estimate
            assert e.value_bits <= e.t * c_env + 3 * e.std_error_bits


def test_criterion_3_achievability_transition(achievability):
    with _verdict(3, "achievability transition and algorithmic gap"):
        rows = {int(r.sweep_value): r for r in achievability.rows}
        assert rows[4].decoder_stats["ml"].rate <= 0.2
        t_it = achievability.t_it
        assert t_it is not None
        assert rows[2 * t_it].decoder_stats["ml"].rate >= 0.9
        # pointwise ordering within two paired-binomial standard errors
        for t, row in rows.items():
            if not 6 <= t <= 60:
                continue
            for hi, lo in (("ml", "lasso"), ("lasso", "ols")):
                diff = row.outcomes[hi].astype(float) - row.outcomes[lo].astype(float)
                se = float(diff.std(ddof=1)) / math.sqrt(diff.size)
                assert diff.mean() >= -2 * se, f"{hi} below {lo} at T={t}"
        gap = [t for t, row in rows.items()
               if row.decoder_stats["ml"].rate >= 0.9
               and row.decoder_stats["lasso"].rate <= 0.7]
        assert gap, "no budget where exhaustive search works but the relaxation fails"


def _crossing_snr(rows, name):
    """Interpolated SNR where P_err crosses 0.5, with a delta-method se."""
    pts = [(r.power_stats.snr_db, 1.0 - r.decoder_stats[name].rate,
            r.decoder_stats[name].std_error) for r in rows]
    pts.sort()
    for (x1, e1, s1), (x2, e2, s2) in zip(pts, pts[1:]):
        if e1 >= 0.5 >= e2 and e1 > e2:
            h, gap = x2 - x1, e1 - e2
            cross = x1 + (e1 - 0.5) / gap * h
            d1 = (0.5 - e2) * h / gap**2
            d2 = (e1 - 0.5) * h / gap**2
            return cross, math.hypot(d1 * s1, d2 * s2)
    raise AssertionError(f"{name} error never crosses 0.5")


def test_criterion_4_noise_waterfall(waterfall):
    with _verdict(4, "noise waterfall"):
        snrs = [r.power_stats.snr_db for r in waterfall]
        assert min(snrs) <= -10 and max(snrs) >= 25
        for row in waterfall:
            sparse_err = 1.0 - row.decoder_stats["sparse"].rate
            if row.power_stats.snr_db <= -10:
                assert sparse_err >= 0.9
            if row.power_stats.snr_db >= 25:
                assert sparse_err <= 0.1
        cross_sparse, se_s = _crossing_snr(waterfall, "sparse")
        cross_dense, se_d = _crossing_snr(waterfall, "dense")
        assert cross_dense - cross_sparse > 2 * math.hypot(se_s, se_d)


def test_criterion_5_curvature_error_floor(error_floor):
    with _verdict(5, "curvature error floor"):
        by_alpha = {row.sweep_value: row for row in error_floor}
        for alpha in (4.0, 8.0):
            for name in ("sparse", "dense"):
                assert 1.0 - by_alpha[alpha].decoder_stats[name].rate >= 0.05
        assert 1.0 - by_alpha[0.05].decoder_stats["sparse"].rate <= 0.1
        assert abs(by_alpha[1.0].power_stats.sir_db) <= 0.5


def test_criterion_6_resolution_collapse(resolution):
    with _verdict(6, "resolution collapse"):
        rows = sorted(resolution, key=lambda r: r.sweep_value)
        ds = [int(r.sweep_value) for r in rows]
        smallest_three = [r for r in rows if r.sweep_value >= 4][:3]
        assert len(smallest_three) == 3
        assert all(r.correlation >= 0.9 for r in smallest_three)
        d_corr = max(int(r.sweep_value) for r in rows
                     if r.correlation is not None and r.correlation >= 0.8)
        d_feas = max(int(r.sweep_value) for r in rows if r.metadata["feasible"])
        one_past = ds.index(d_feas) + 1
        limit = ds[one_past] if one_past < len(ds) else ds[-1]
        assert d_corr <= limit, (
            f"recovery survives to d={d_corr} but the information budget "
            f"already fails past d={d_feas}")


def test_criterion_7_decoder_oracle_equivalence():
    with _verdict(7, "decoder oracle equivalence"):
        for i in range(200):
            d, k = 4 + i % 3, 1 + i % 2
            phi, data = sample_trial(ChannelConfig(d=d, k=k, sigma=0.4), 8, derive(7, i))
            assert (ml_decode(data.masks, data.responses, k).support
                    == brute_force_ml(data.masks.bits, data.responses, k))
        for i in range(200):
            _, data = sample_trial(ChannelConfig(d=7, k=2, sigma=0.3), 10, derive(70, i))
            beta, _ = ls_fit_on_support(data.masks, data.responses, (1, 5))
            ref = invert_ls_oracle(data.masks.bits, data.responses, (1, 5), LS_JITTER)
            assert np.allclose(beta, ref, atol=1e-10)
        settings = LassoSettings(lambda_=0.8, tolerance=1e-10)
        for i in range(200):
            d = 5 + i % 4
            _, data = sample_trial(ChannelConfig(d=d, k=2, sigma=0.5), 12, derive(21, i))
            assert lasso_decode(data.masks, data.responses, 2, settings).converged
            raw, _, _ = _cd_lasso(np.ascontiguousarray(data.masks.bits),
                                  np.ascontiguousarray(data.responses), 0.8,
                                  settings.max_iterations, 1e-12)
            violation = lasso_kkt_violation(data.masks.bits, data.responses, 0.8, raw)
            assert violation <= 10 * settings.tolerance + 1e-9


SMALL_RUNS = {
    "achievability": ["--d", "8", "--k", "2", "--sigma", "0.1", "--t-grid", "2,6,10",
                      "--trials", "40", "--n-outer", "200", "--n-inner", "200"],
    "noise-sweep": ["--d", "12", "--k", "2", "--t", "10", "--sigma-grid", "0.1,1.0",
                    "--trials", "60"],
    "curvature-sweep": ["--d", "10", "--k", "2", "--t", "12", "--alpha-grid", "0.5,2",
                        "--trials", "60"],
    "resolution-sweep": ["--width", "16", "--height", "16", "--rect", "0,0,9,9",
                         "--d-grid", "4,16", "--t", "25", "--sigma", "2.0",
                         "--lambda", "2.0", "--trials", "10",
                         "--n-outer", "200", "--n-inner", "200"],
    "mi-estimate": ["--d", "10", "--k", "2", "--sigma", "0.2", "--t", "12",
                    "--n-outer", "300", "--n-inner", "300"],
    "threshold": ["--d", "6", "--k", "1", "--sigma", "0.2", "--t-grid", "2,6,10",
                  "--n-outer", "300", "--n-inner", "300"],
    "bounds": [],
}


def test_criterion_8_manifest_rerun_determinism(tmp_path):
    with _verdict(8, "byte-identical manifest reruns"):
        for sub, args in SMALL_RUNS.items():
            base = tmp_path / sub / "base"
            assert main([sub, *args, "--out", str(base), "--workers", "1"]) == 0
            table = base / f"{sub}.csv"
            manifest = base / f"{sub}-manifest.json"
            original = table.read_bytes()
            for workers in ("1", "4"):
                redo = tmp_path / sub / f"w{workers}"
                rc = main(["rerun", str(manifest), "--out", str(redo),
                           "--workers", workers])
                assert rc == 0
                again = (redo / table.name).read_bytes()
                assert again == original, f"{sub} output differs at workers={workers}"
