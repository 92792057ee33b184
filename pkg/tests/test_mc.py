import math

import numpy as np
import pytest
from scipy.integrate import quad

from roughsabr import (BACHELIER, BetaSpec, DomainError, ForwardVarianceCurve,
                       McConfig, ModelParams, SCHEME_EXACT, SCHEME_HYBRID,
                       mc_smile, simulate_paths, simulate_volterra)
from roughsabr import mc as mc_mod

FLAT = ForwardVarianceCurve.flat(0.04)


def lognormal_params(H=0.3, eta=1.0, rho=-0.5):
    return ModelParams(H=H, eta=eta, rho=rho, beta=BetaSpec.lognormal())


class TestConfigValidation:
    def test_defaults(self):
        cfg = McConfig(n_paths=1000, n_steps=256, horizon=0.25)
        assert cfg.scheme == SCHEME_HYBRID
        assert cfg.antithetic is True
        assert cfg.exact_block_width == 2
        assert cfg.dt == 0.25 / 256

    @pytest.mark.parametrize("kw", [
        dict(n_paths=3, n_steps=8, horizon=1.0),
        dict(n_paths=0, n_steps=8, horizon=1.0),
        dict(n_paths=8, n_steps=8, horizon=1.0, scheme="euler"),
        dict(n_paths=8, n_steps=8, horizon=1.0, exact_block_width=0),
        dict(n_paths=8, n_steps=2, horizon=1.0),
        dict(n_paths=8, n_steps=8, horizon=-1.0),
        dict(n_paths=8, n_steps=8192, horizon=1.0, scheme=SCHEME_EXACT),
        dict(n_paths=8, n_steps=8, horizon=1.0, chunk_paths=3),
    ])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            McConfig(**kw)

    def test_odd_paths_ok_without_antithetic(self):
        McConfig(n_paths=7, n_steps=8, horizon=1.0, antithetic=False)


class TestCovarianceOracles:
    """All analytic covariance entries cross-checked against quadrature."""

    ALPHA = -0.3   # H = 0.2
    DT = 0.01

    def test_block_covariance_against_quadrature(self):
        a, dt, w = self.ALPHA, self.DT, 3
        cov = mc_mod._block_covariance(a, dt, w)
        assert cov.shape == (w + 1, w + 1)
        assert cov[0, 0] == pytest.approx(dt, rel=1e-15)
        for m in range(1, w + 1):
            oracle = quad(lambda u: (m * dt - u) ** a, 0.0, dt, epsrel=1e-12)[0]
            assert cov[0, m] == pytest.approx(oracle, rel=1e-10)
            assert cov[m, 0] == cov[0, m]
        for kk in range(1, w + 1):
            for ll in range(kk, w + 1):
                oracle = quad(lambda u: (kk * dt - u) ** a * (ll * dt - u) ** a,
                              0.0, dt, epsrel=1e-12, limit=200)[0]
                assert cov[kk, ll] == pytest.approx(oracle, rel=1e-9)

    def test_block_covariance_positive_definite(self):
        # alpha = 0 (H = 1/2) is excluded: there the block is rank one by
        # construction (every I coincides with dW) and is never factorized
        for a in (-0.45, -0.3, -0.1):
            cov = mc_mod._block_covariance(a, 1e-3, 2)
            assert np.all(np.linalg.eigvalsh(cov) > 0.0)

    def test_block_cholesky_factorizes(self):
        L = mc_mod._block_cholesky(self.ALPHA, self.DT, 2)
        cov = mc_mod._block_covariance(self.ALPHA, self.DT, 2)
        np.testing.assert_allclose(L @ L.T, cov, rtol=1e-12, atol=1e-18)
        assert not L.flags.writeable

    def test_tail_weights_are_interval_kernel_averages(self):
        a, dt, w, n = self.ALPHA, 0.02, 2, 12
        c = mc_mod._tail_weights(a, dt, w, n)
        assert c.shape == (n + 1,)
        assert np.all(c[:w + 1] == 0.0)
        for k in range(w + 1, n + 1):
            oracle = quad(lambda u: u ** a, (k - 1) * dt, k * dt,
                          epsrel=1e-13)[0] / dt
            assert c[k] == pytest.approx(oracle, rel=1e-12)

    def test_joint_covariance_against_quadrature(self):
        a, dt, n = self.ALPHA, 0.25, 3
        cov = mc_mod._joint_covariance(a, dt, n)
        assert cov.shape == (2 * n, 2 * n)
        # order: dW_0..dW_{n-1}, V_1..V_n with V_j = int_0^{t_j} (t_j-u)^a dW
        for i in range(n):
            for j in range(1, n + 1):
                tj = j * dt
                lo, hi = i * dt, min((i + 1) * dt, tj)
                oracle = 0.0
                if hi > lo:
                    oracle = quad(lambda u: (tj - u) ** a, lo, hi,
                                  epsrel=1e-12, points=[tj] if lo < tj <= hi else None,
                                  limit=200)[0]
                assert cov[i, n + j - 1] == pytest.approx(oracle, rel=1e-9, abs=1e-14)
        for j in range(1, n + 1):
            tj = j * dt
            var_oracle = tj ** (2 * a + 1) / (2 * a + 1)
            assert cov[n + j - 1, n + j - 1] == pytest.approx(var_oracle, rel=1e-12)
        for j in range(1, n + 1):
            for m in range(j + 1, n + 1):
                tj, tm = j * dt, m * dt
                oracle = quad(lambda u: (tj - u) ** a * (tm - u) ** a, 0.0, tj,
                              epsrel=1e-11, limit=400)[0]
                assert cov[n + j - 1, n + m - 1] == pytest.approx(oracle, rel=1e-8)

    def test_markovian_alpha_zero_degenerates(self):
        cov = mc_mod._block_covariance(0.0, self.DT, 2)
        # kernel == 1: every I equals dW, all entries dt
        np.testing.assert_allclose(cov, self.DT, rtol=1e-14)


class TestVolterraSimulation:
    def test_shapes_and_grid(self):
        cfg = McConfig(n_paths=64, n_steps=16, horizon=1.0)
        dw, dz, v = simulate_volterra(lognormal_params(), cfg)
        assert dw.shape == (64, 16) and dz.shape == (64, 16)
        assert v.shape == (64, 17)
        assert np.all(v[:, 0] == 0.0)

    def test_markovian_case_is_cumsum_both_schemes(self):
        p = lognormal_params(H=0.5)
        for scheme in (SCHEME_HYBRID, SCHEME_EXACT):
            cfg = McConfig(n_paths=32, n_steps=24, horizon=0.5, scheme=scheme)
            dw, _, v = simulate_volterra(p, cfg)
            np.testing.assert_array_equal(v[:, 1:], np.cumsum(dw, axis=1))

    def test_antithetic_pairing(self):
        cfg = McConfig(n_paths=64, n_steps=16, horizon=1.0, antithetic=True)
        dw, dz, v = simulate_volterra(lognormal_params(), cfg)
        np.testing.assert_array_equal(dw[1::2], -dw[0::2])
        np.testing.assert_array_equal(dz[1::2], -dz[0::2])
        np.testing.assert_array_equal(v[1::2], -v[0::2])

    def test_correlation_structure_of_dz(self):
        p = lognormal_params(rho=-0.8)
        cfg = McConfig(n_paths=20000, n_steps=4, horizon=0.1, antithetic=False)
        dw, dz, _ = simulate_volterra(p, cfg)
        corr = np.corrcoef(dw[:, 0], dz[:, 0])[0, 1]
        assert corr == pytest.approx(-0.8, abs=0.02)
        assert np.std(dz[:, 0]) == pytest.approx(math.sqrt(cfg.dt), rel=0.03)

    def test_worker_count_does_not_change_output(self):
        p = lognormal_params(H=0.1)
        cfg = McConfig(n_paths=4096, n_steps=32, horizon=0.5, chunk_paths=1024)
        a = simulate_volterra(p, cfg, workers=1)
        b = simulate_volterra(p, cfg, workers=3)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_path_prefix_stable_as_n_paths_grows(self):
        p = lognormal_params(H=0.1)
        small = McConfig(n_paths=512, n_steps=16, horizon=0.5, chunk_paths=256)
        big = McConfig(n_paths=1024, n_steps=16, horizon=0.5, chunk_paths=256)
        dw_s, _, v_s = simulate_volterra(p, small)
        dw_b, _, v_b = simulate_volterra(p, big)
        np.testing.assert_array_equal(dw_s, dw_b[:512])
        np.testing.assert_array_equal(v_s, v_b[:512])

    def test_seed_changes_draws(self):
        p = lognormal_params()
        a = simulate_volterra(p, McConfig(n_paths=8, n_steps=8, horizon=1.0, seed=0))
        b = simulate_volterra(p, McConfig(n_paths=8, n_steps=8, horizon=1.0, seed=1))
        assert not np.array_equal(a[0], b[0])

    @pytest.mark.parametrize("scheme", [SCHEME_HYBRID, SCHEME_EXACT])
    def test_terminal_variance_matches_theory(self, scheme):
        # Var V_T = T^{2H} / (2H); fixed seed keeps the estimate deterministic
        p = lognormal_params(H=0.2)
        cfg = McConfig(n_paths=40000, n_steps=64, horizon=1.0, seed=7,
                       scheme=scheme)
        _, _, v = simulate_volterra(p, cfg)
        target = 1.0 / 0.4
        assert np.var(v[:, -1]) == pytest.approx(target, rel=0.05)

    def test_intermediate_variance_profile(self):
        p = lognormal_params(H=0.2)
        cfg = McConfig(n_paths=40000, n_steps=64, horizon=1.0, seed=7)
        _, _, v = simulate_volterra(p, cfg)
        t = np.arange(1, 65) / 64.0
        sample = np.var(v[:, 1:], axis=0)
        theory = t ** 0.4 / 0.4
        assert np.max(np.abs(sample / theory - 1.0)) < 0.08

    def test_hybrid_without_fft_matches_fft(self):
        # same draws, two convolution code paths
        p = lognormal_params(H=0.1)
        base = dict(n_paths=256, n_steps=64, horizon=0.5)
        v_mat = simulate_volterra(p, McConfig(**base, fft_min_steps=10 ** 9))[2]
        v_fft = simulate_volterra(p, McConfig(**base, fft_min_steps=1))[2]
        np.testing.assert_allclose(v_mat, v_fft, rtol=1e-11, atol=1e-13)

    def test_refined_tail_reserved(self):
        cfg = McConfig(n_paths=8, n_steps=8, horizon=1.0, refined_tail=True)
        with pytest.raises(NotImplementedError):
            simulate_volterra(lognormal_params(), cfg)


class TestSimulatePaths:
    def test_lognormal_batch_layout(self):
        cfg = McConfig(n_paths=128, n_steps=16, horizon=0.25)
        batch = simulate_paths(lognormal_params(), FLAT, 100.0, cfg)
        assert batch.time_grid.shape == (17,)
        assert batch.time_grid[0] == 0.0 and batch.time_grid[-1] == 0.25
        assert np.all(batch.spot[:, 0] == 100.0)
        assert np.all(batch.alpha[:, 0] == 0.2)
        assert batch.metadata["absorbed_fraction"] == 0.0
        assert np.all(batch.spot > 0.0)

    def test_lognormal_martingale(self):
        cfg = McConfig(n_paths=60000, n_steps=32, horizon=0.25, seed=3)
        batch = simulate_paths(lognormal_params(), FLAT, 100.0, cfg)
        term = batch.spot[:, -1]
        se = term.std() / math.sqrt(term.size)
        assert abs(term.mean() - 100.0) < 4.0 * se

    def test_normal_backbone_allows_negative_spot(self):
        p = ModelParams(H=0.3, eta=1.0, rho=0.0, beta=BetaSpec.normal())
        curve = ForwardVarianceCurve.flat(2500.0)  # normal vol 50
        cfg = McConfig(n_paths=4000, n_steps=16, horizon=1.0, seed=1)
        batch = simulate_paths(p, curve, 10.0, cfg)
        assert np.any(batch.spot[:, -1] < 0.0)
        term = batch.spot[:, -1]
        se = term.std() / math.sqrt(term.size)
        assert abs(term.mean() - 10.0) < 4.0 * se

    def test_power_backbone_absorption(self):
        p = ModelParams(H=0.3, eta=1.0, rho=0.0, beta=BetaSpec.power(0.5))
        curve = ForwardVarianceCurve.flat(4.0)
        cfg = McConfig(n_paths=2000, n_steps=64, horizon=1.0, seed=2)
        batch = simulate_paths(p, curve, 0.01, cfg)
        frac = batch.metadata["absorbed_fraction"]
        assert 0.0 < frac <= 1.0
        hit = batch.absorbed > 0.0
        assert np.all(batch.spot[hit, -1] == 0.0)
        assert np.all(batch.spot[~hit] > 0.0)

    def test_alpha_consistent_with_variance_curve(self):
        # E[alpha_t^2] = xi0(t): the exponential correction is a true
        # martingale normalizer
        p = lognormal_params(H=0.2, eta=1.5)
        curve = ForwardVarianceCurve.piecewise([0.0, 0.5], [0.04, 0.09])
        cfg = McConfig(n_paths=60000, n_steps=32, horizon=1.0, seed=11)
        batch = simulate_paths(p, curve, 1.0, cfg)
        xi = curve.values_at(batch.time_grid)
        sample = np.mean(batch.alpha ** 2, axis=0)
        assert np.max(np.abs(sample / xi - 1.0)) < 0.05


SMILE_PARAMS = lognormal_params(H=0.2, rho=-0.6)
SMILE_CFG = McConfig(n_paths=20000, n_steps=64, horizon=0.25, seed=5)


@pytest.fixture(scope="module")
def estimate():
    strikes = [90.0, 95.0, 100.0, 105.0, 110.0]
    return mc_smile(SMILE_PARAMS, FLAT, 100.0, 0.25, strikes, SMILE_CFG)


class TestMcSmile:
    PARAMS = SMILE_PARAMS
    CFG = SMILE_CFG

    def test_row_count_excludes_internal_anchor(self, estimate):
        assert estimate.strike.shape == (5,)
        assert estimate.iv.shape == (5,)

    def test_atm_row_normalized_exactly_one(self, estimate):
        assert estimate.strike[2] == 100.0
        assert estimate.iv_normalized[2] == 1.0
        assert estimate.iv[2] == estimate.atm_vol

    def test_vols_near_formula_level(self, estimate):
        assert estimate.atm_vol == pytest.approx(0.2, abs=0.01)
        assert np.all(estimate.iv[0] > estimate.iv[-1])  # negative skew

    def test_flags_ok(self, estimate):
        assert all(flag == "ok" for flag in estimate.flag)

    def test_standard_errors_positive_and_small(self, estimate):
        assert np.all(estimate.iv_se > 0.0)
        assert np.all(estimate.iv_se < 0.01)
        assert estimate.atm_vol_se < 0.005

    def test_below_intrinsic_strike_flagged_not_fatal(self):
        strikes = [100.0, 400.0]   # the far strike never pays at this scale
        est = mc_smile(self.PARAMS, FLAT, 100.0, 0.25, strikes,
                       McConfig(n_paths=2000, n_steps=16, horizon=0.25, seed=5))
        assert est.flag[0] == "ok"
        assert est.flag[1] == "below_intrinsic"
        assert math.isnan(est.iv[1]) and math.isnan(est.iv_se[1])
        assert est.metadata["n_excluded"] == 1

    def test_deterministic_across_runs(self):
        strikes = [95.0, 100.0, 105.0]
        cfg = McConfig(n_paths=4000, n_steps=32, horizon=0.25, seed=9)
        a = mc_smile(self.PARAMS, FLAT, 100.0, 0.25, strikes, cfg)
        b = mc_smile(self.PARAMS, FLAT, 100.0, 0.25, strikes, cfg, workers=2)
        np.testing.assert_array_equal(a.iv, b.iv)
        np.testing.assert_array_equal(a.price, b.price)

    def test_tau_must_sit_on_grid(self):
        cfg = McConfig(n_paths=64, n_steps=64, horizon=0.25, seed=0)
        mc_smile(self.PARAMS, FLAT, 100.0, 0.125, [100.0], cfg)  # on grid
        with pytest.raises(DomainError):
            mc_smile(self.PARAMS, FLAT, 100.0, 0.1234, [100.0], cfg)

    def test_tau_beyond_horizon_rejected(self):
        cfg = McConfig(n_paths=64, n_steps=16, horizon=0.25, seed=0)
        with pytest.raises(DomainError):
            mc_smile(self.PARAMS, FLAT, 100.0, 0.5, [100.0], cfg)

    def test_input_validation(self):
        cfg = McConfig(n_paths=64, n_steps=16, horizon=0.25, seed=0)
        with pytest.raises(DomainError):
            mc_smile(self.PARAMS, FLAT, -1.0, 0.25, [100.0], cfg)
        with pytest.raises(DomainError):
            mc_smile(self.PARAMS, FLAT, 100.0, 0.25, [], cfg)

    def test_bachelier_quote_convention(self):
        p = ModelParams(H=0.2, eta=1.0, rho=-0.6, beta=BetaSpec.normal())
        curve = ForwardVarianceCurve.flat(25.0)
        cfg = McConfig(n_paths=20000, n_steps=32, horizon=0.25, seed=4)
        est = mc_smile(p, curve, 100.0, 0.25, [95.0, 100.0, 105.0], cfg,
                       quote_convention=BACHELIER)
        assert est.metadata["quote_convention"] == BACHELIER
        assert est.atm_vol == pytest.approx(5.0, abs=0.2)

    def test_csv_and_metadata_serialization(self, estimate, tmp_path):
        csv_path = tmp_path / "mc.csv"
        estimate.write_csv(csv_path)
        lines = csv_path.read_text().strip().split("\n")
        assert lines[0] == "strike,k,y,iv,iv_se,iv_normalized,price,price_se,flag"
        assert len(lines) == 6
        meta_path = tmp_path / "mc.meta.json"
        estimate.write_metadata(meta_path)
        text = meta_path.read_text()
        assert '"seed": 5' in text
        assert '"scheme": "hybrid"' in text


class TestSchemeCrossValidation:
    def test_smile_estimates_agree_within_errors(self):
        # same model through two independent path constructions
        p = lognormal_params(H=0.1, rho=-0.6)
        strikes = [92.0, 100.0, 108.0]
        hybrid = mc_smile(p, FLAT, 100.0, 0.25, strikes,
                          McConfig(n_paths=30000, n_steps=128, horizon=0.25,
                                   seed=21, scheme=SCHEME_HYBRID))
        exact = mc_smile(p, FLAT, 100.0, 0.25, strikes,
                         McConfig(n_paths=30000, n_steps=128, horizon=0.25,
                                  seed=22, scheme=SCHEME_EXACT))
        for i in range(3):
            gap = abs(hybrid.iv[i] - exact.iv[i])
            combined = math.hypot(hybrid.iv_se[i], exact.iv_se[i])
            assert gap < 4.0 * combined + 1e-4
