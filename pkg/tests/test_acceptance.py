"""End-to-end acceptance checks: reference values, statistical properties,
full-scale reconstruction accuracy, and performance budgets."""

import time

import numpy as np
import pytest

from macaw.channel import (OFDMConfig, awc_steering, nmse, swc_q_bar, vec,
                           wideband_path)
from macaw.estimator import (EstimatorConfig, estimate, estimate_curvature,
                             refine_stage1, refine_stage2, stage1_jacobian,
                             stage2_jacobian, _steering_and_weights)
from macaw.geometry import EffectivePathParams, UPAConfig
from macaw.harness import bound_experiment, rayleigh_report, sweep, table2
from macaw.scenario import gen_scenario, table1_defaults
from macaw.similarity import bound
from macaw.sketch import ObservationSet, make_srft, observe


class TestRayleighExamples:
    """Criterion 1: reference sphericity distances within 1%, under 1 s."""

    def test_plane_wave_cylinder_case(self):
        t0 = time.perf_counter()
        rep = rayleigh_report(source_distance=np.inf)
        assert time.perf_counter() - t0 < 1.0
        assert rep["s"] == pytest.approx(108.7, rel=0.01)

    def test_spherical_source_case(self):
        t0 = time.perf_counter()
        rep = rayleigh_report(source_distance=15.0)
        assert time.perf_counter() - t0 < 1.0
        assert rep["s"] == pytest.approx(33.0, rel=0.01)


class TestBoundCurve:
    """Criterion 2: closed-form similarity bound reference values."""

    def test_reference_point(self):
        assert bound(0.59) == pytest.approx(0.90, abs=0.005)

    def test_zero_is_exactly_one(self):
        assert bound(0.0) == 1.0


class TestBoundExperiment:
    """Criterion 3: 1000 stratified samples vs the bound, under 10 min."""

    def test_bin_minima_and_median_trend(self):
        t0 = time.perf_counter()
        rows = bound_experiment(n_samples=1000, n_bins=20, seed=0)
        elapsed = time.perf_counter() - t0
        assert elapsed < 600.0
        assert len(rows) == 1000
        bins = {}
        for r in rows:
            bins.setdefault(r["bin"], []).append(r)
        n_bins = len(bins)
        ok = sum(
            1 for b in bins.values()
            if min(r["cos_sim"] - r["bound"] for r in b) >= -0.03)
        assert ok >= 0.95 * n_bins
        medians = [np.median([r["cos_sim"] for r in bins[b]])
                   for b in sorted(bins)]
        assert all(medians[i + 1] <= medians[i] + 1e-9
                   for i in range(n_bins - 1))


class TestNoiselessEndToEnd:
    """Criterion 4: full-scale noiseless reconstruction to machine level."""

    @pytest.mark.parametrize("seed", [0, 1])
    def test_full_scale_oracle(self, seed):
        cfg = table1_defaults(seed=seed)
        sc = gen_scenario(cfg)
        h = sc.channel()
        op = make_srft(cfg.upa.n_y, cfg.upa.n_z, cfg.n_measurements,
                       seed=100 + seed)
        obs = observe(h, op, None)
        est_cfg = EstimatorConfig(n_paths=cfg.n_scatterers, r_min=cfg.r_min)
        t0 = time.perf_counter()
        _, h_hat, _ = estimate(obs, est_cfg, cfg.upa, cfg.ofdm)
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0
        assert nmse(h_hat, h) < 1e-8


class TestSnrSweep:
    """Criterion 5: 25-trial ensemble accuracy across the SNR range, < 1 h."""

    def test_mean_accuracy_and_median_trend(self):
        snr_list = [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0]
        t0 = time.perf_counter()
        rows = sweep(table1_defaults(seed=0), snr_list, trials=25, seed=0)
        elapsed = time.perf_counter() - t0
        assert elapsed < 3600.0
        agg = {r["snr_db"]: r for r in rows if r["label"] == "aggregate"}
        assert agg[10.0]["nmse"] <= 1e-3
        assert agg[-10.0]["nmse"] <= 5e-2
        medians = [agg[s]["nmse_median"] for s in snr_list]
        assert all(medians[i + 1] <= medians[i] + 1e-12
                   for i in range(len(snr_list) - 1))


@pytest.fixture(scope="module")
def table():
    rows = []
    for exp in (1, 2, 3, 4):
        rows.extend(table2(exp, trials=10, seed=0, snr_db=10.0))
    return rows


class TestModelDeviationTable:
    """Criterion 6: baseline-vs-pipeline trends over the four sweeps."""

    def test_swc_fit_decreasing_with_scatterer_distance(self, table):
        vals = [r["swc_fitting_nmse"] for r in table if r["experiment"] == 1]
        assert vals[0] > vals[1] > vals[2]

    def test_swc_fit_increasing_with_curvature(self, table):
        vals = [r["swc_fitting_nmse"] for r in table if r["experiment"] == 4]
        assert vals[0] < vals[1] < vals[2]

    def test_swc_fit_exact_for_flat_scatterer(self, table):
        flat = [r for r in table if r["label"] == "curv_0"][0]
        assert flat["swc_fitting_nmse"] < 1e-4

    def test_pipeline_accurate_in_every_cell(self, table):
        assert len(table) == 12
        for r in table:
            assert r["macaw_nmse"] < 1e-3, r["label"]


class TestEstimatorMicroOracles:
    """Criterion 7: stage-level numerical contracts."""

    def test_curvature_plugin_oracle(self):
        # (a) synthetic curvature recovered within two interpolated bins
        cfg = EstimatorConfig(r_min=1.7)
        n = 128
        lag = n // 3
        bin_err = 2.0 / (cfg.fft_zero_pad * n) / lag
        rng = np.random.default_rng(0)
        q_max = 0.01 ** 2 / (0.02 * 1.7)
        for _ in range(10):
            evals = rng.uniform(0.05 * q_max, 0.9 * q_max, 2)
            ang = rng.uniform(0, np.pi)
            rot = np.array([[np.cos(ang), -np.sin(ang)],
                            [np.sin(ang), np.cos(ang)]])
            q = rot @ np.diag(evals) @ rot.T
            k = rng.uniform(-0.3, 0.3, 2)
            c = awc_steering(k, q, n, n)
            est = estimate_curvature(c, cfg, 0.01, 0.02)
            assert np.max(np.abs(est.q_bar_hat - q)) < 2 * bin_err

    def test_stage1_jacobian_vs_finite_differences(self):
        # (b) spatial-stage derivative columns match central differences
        n = 16
        op = make_srft(n, n, 128, seed=1)
        weights = _steering_and_weights(n, n)
        x0 = np.array([0.12, -0.07, 3e-4, 5e-5, 2e-4])
        alpha = 0.8 - 0.3j

        def model(x):
            c = vec(awc_steering(np.array([x[0], x[1]]),
                                 np.array([[x[2], x[3]], [x[3], x[4]]]),
                                 n, n))
            return c, -alpha * op.apply(c)  # residual part that varies

        c0, _ = model(x0)
        j = stage1_jacobian(c0, alpha, op, weights)
        for i in range(5):
            step = 1e-7
            xp, xm = x0.copy(), x0.copy()
            xp[i] += step
            xm[i] -= step
            fd = (model(xp)[1] - model(xm)[1]) / (2 * step)
            rel = np.linalg.norm(j[:, i] - fd) / np.linalg.norm(fd)
            assert rel < 1e-5

    def test_stage2_jacobian_vs_finite_differences(self):
        n = 8
        ofdm = OFDMConfig(carrier_f=15e9, bandwidth=100e6, n_subcarriers=8)
        op = make_srft(n, n, 32, seed=2)
        weights = {"s": np.ones(n * n), **_steering_and_weights(n, n)}
        split = ofdm.split_factor
        xs = [np.array([1500.0, 0.1, -0.05, 2e-4, 1e-5, 3e-4]),
              np.array([1650.0, -0.2, 0.15, 1e-4, 0.0, 2e-4])]
        alphas = np.array([0.9 + 0.2j, 0.6 - 0.4j])

        def wide(x):
            p = EffectivePathParams(k_bar=np.array([x[1], x[2]]),
                                    q_bar=np.array([[x[3], x[4]], [x[4], x[5]]]),
                                    s_bar=float(x[0]))
            return wideband_path(p, ofdm, n, n)

        def resid_part(xs_cur):
            out = 0.0
            for x, a in zip(xs_cur, alphas):
                out = out - a * op.apply(wide(x)).reshape(-1, order="F")
            return out

        hs = [wide(x) for x in xs]
        j = stage2_jacobian(hs, alphas, op, split, weights)
        col = 0
        for p_idx in range(2):
            for i in range(6):
                step = 1e-6 if i == 0 else 1e-8
                xs_p = [x.copy() for x in xs]
                xs_m = [x.copy() for x in xs]
                xs_p[p_idx][i] += step
                xs_m[p_idx][i] -= step
                fd = (resid_part(xs_p) - resid_part(xs_m)) / (2 * step)
                rel = np.linalg.norm(j[:, col] - fd) / np.linalg.norm(fd)
                assert rel < 1e-5, (p_idx, i, rel)
                col += 1

    def test_sketch_semi_orthogonality(self):
        # (c) rows of the measurement operator are orthonormal
        for seed in range(5):
            op = make_srft(16, 16, 100, seed=seed)
            w = op.dense()
            assert np.max(np.abs(w @ w.conj().T - np.eye(100))) < 1e-10

    def test_adjoint_identity(self):
        # (d) <W x, y> == <x, W^H y>
        rng = np.random.default_rng(3)
        for seed in range(5):
            op = make_srft(16, 16, 100, seed=seed)
            x = rng.standard_normal(256) + 1j * rng.standard_normal(256)
            y = rng.standard_normal(100) + 1j * rng.standard_normal(100)
            lhs = np.vdot(y, op.apply(x))
            rhs = np.vdot(op.apply_adjoint(y), x)
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    def test_lm_residual_monotonicity(self):
        # (e) accepted refinement steps never increase the objective
        n = 16
        op = make_srft(n, n, 128, seed=4)
        rng = np.random.default_rng(4)
        k_true = np.array([0.1, 0.2])
        q_true = np.array([[2e-4, 3e-5], [3e-5, 1e-4]])
        y = op.apply(vec(awc_steering(k_true, q_true, n, n)))
        cfg = EstimatorConfig()
        checked = 0
        for _ in range(100):
            init = EffectivePathParams(
                k_bar=k_true + rng.uniform(-0.01, 0.01, 2),
                q_bar=q_true + rng.uniform(-2e-5, 2e-5, (2, 2)),
                s_bar=0.0, alpha=1.0)
            init = EffectivePathParams(
                k_bar=init.k_bar,
                q_bar=0.5 * (init.q_bar + init.q_bar.T),
                s_bar=0.0, alpha=1.0)
            hist = []
            refine_stage1(y, op, init, cfg, cost_history=hist)
            assert all(hist[i + 1] <= hist[i] for i in range(len(hist) - 1))
            checked += 1
        assert checked == 100

    def test_lm_stage2_monotonicity(self):
        n = 16
        ofdm = OFDMConfig(carrier_f=15e9, bandwidth=100e6, n_subcarriers=16)
        op = make_srft(n, n, 64, seed=5)
        p = EffectivePathParams(k_bar=np.array([0.15, -0.1]),
                                q_bar=np.array([[2e-4, 0.0], [0.0, 1e-4]]),
                                s_bar=1500.0, alpha=1.0)
        h = wideband_path(p, ofdm, n, n)
        obs = observe(h, op, None)
        rng = np.random.default_rng(5)
        for _ in range(20):
            init = EffectivePathParams(
                k_bar=p.k_bar + rng.uniform(-5e-3, 5e-3, 2),
                q_bar=p.q_bar, s_bar=p.s_bar + rng.uniform(-0.1, 0.1),
                alpha=1.0)
            hist = []
            refine_stage2(obs, ofdm, [init], EstimatorConfig(),
                          cost_history=hist)
            assert all(hist[i + 1] <= hist[i] for i in range(len(hist) - 1))


class TestComplexityScaling:
    """Criterion 8: wall time follows N log N within a factor of two."""

    def test_n_log_n_fit(self):
        coeffs = []
        for n in (32, 64, 128):
            ofdm = OFDMConfig(carrier_f=15e9, bandwidth=100e6,
                              n_subcarriers=64)
            upa = UPAConfig(n_y=n, n_z=n, d_ant=0.01)
            k1 = np.array([0.2, -0.1])
            k2 = np.array([-0.15, 0.25])
            ps = [EffectivePathParams(k1, swc_q_bar(k1, 1 / 5, 0.01, 0.02),
                                      1560.0, 0.9 + 0.3j),
                  EffectivePathParams(k2, swc_q_bar(k2, 1 / 12, 0.01, 0.02),
                                      1720.0, 0.5 - 0.4j)]
            h = sum(wideband_path(p, ofdm, n, n) for p in ps)
            op = make_srft(n, n, max(n * n // 16, 64), seed=11)
            obs = observe(h, op, None)
            cfg = EstimatorConfig(n_paths=2, r_min=1.7)
            times = []
            for _ in range(3):
                t0 = time.perf_counter()
                estimate(obs, cfg, upa, ofdm)
                times.append(time.perf_counter() - t0)
            n_tot = n * n
            coeffs.append(min(times) / (n_tot * np.log(n_tot)))
        assert max(coeffs) / min(coeffs) < 2.0
