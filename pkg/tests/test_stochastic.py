import numpy as np
import pytest
from scipy.integrate import dblquad, quad
from scipy.stats import kstest

from gfkit.kernels import ou_kernel
from gfkit.stochastic import (
    BridgeResult,
    HalfLine,
    SdeSpec,
    UnsupportedConfigurationError,
    absorption_probability,
    bridge_check_boundary,
    bridge_check_forcing,
    bridge_check_initial,
    feynman_kac_estimate,
    first_passage_density,
    sample_paths,
)
from gfkit.strain import ConstantStrain


def ou_spec(k0=1.0, nu=1.0, x0=1.0, horizon=1.0):
    return SdeSpec(lambda x, s: -k0 * x, nu, x0, 0.0, horizon)


class TestSamplePaths:
    def test_deterministic_ode_limit(self):
        k0, x0, t, dt = 1.2, 2.0, 1.0, 1e-3
        spec = SdeSpec(lambda x, s: -k0 * x, 0.0, x0, 0.0, t)
        ens = sample_paths(spec, 16, dt, seed=0)
        exact = x0 * np.exp(-k0 * t)
        assert np.all(np.abs(ens.terminal_values - exact) < 5 * k0 * k0 * x0 * dt)

    def test_wiener_terminal_variance(self):
        nu, t = 1.0, 0.75
        spec = SdeSpec(None, nu, 0.0, 0.0, t)
        ens = sample_paths(spec, 100_000, 5e-3, seed=42)
        var = ens.terminal_values.var(ddof=1)
        se = var * np.sqrt(2.0 / (ens.n_paths - 1))
        assert abs(var - 2 * nu * t) < 3 * se

    def test_ou_terminal_matches_stationary_kernel(self):
        k0, nu = 1.0, 1.0
        spec = ou_spec(k0, nu, x0=0.5, horizon=12.0)
        ens = sample_paths(spec, 20_000, 5e-3, seed=7)
        stat = kstest(ens.terminal_values, "norm", args=(0.0, np.sqrt(nu / k0)))
        # 95% critical value for the one-sample KS statistic
        assert stat.statistic < 1.358 / np.sqrt(ens.n_paths)

    def test_bit_identical_across_chunk_sizes(self):
        spec = ou_spec(horizon=0.5)
        a = sample_paths(spec, 1000, 1e-2, seed=3, chunk_size=64)
        b = sample_paths(spec, 1000, 1e-2, seed=3, chunk_size=1000)
        assert np.array_equal(a.terminal_values, b.terminal_values)
        assert np.array_equal(a.exit_times, b.exit_times)

    def test_prefix_stability_in_path_count(self):
        spec = ou_spec(horizon=0.5)
        a = sample_paths(spec, 500, 1e-2, seed=3)
        b = sample_paths(spec, 800, 1e-2, seed=3)
        assert np.array_equal(a.terminal_values, b.terminal_values[:500])

    def test_nan_drift_aborts(self):
        spec = SdeSpec(lambda x, s: np.full_like(x, np.nan), 1.0, 0.0, 0.0, 1.0)
        with pytest.raises(ValueError, match="NaN"):
            sample_paths(spec, 8, 0.1, seed=0)

    def test_half_line_exit_time_interpolated(self):
        spec = SdeSpec(None, 0.5, 1.0, 0.0, 4.0)
        ens = sample_paths(spec, 4000, 1e-2, seed=11, domain=HalfLine(0.0))
        hit = ens.absorbed
        assert 0 < hit.sum() < ens.n_paths
        # interpolated times are strictly inside steps, not only multiples of dt
        frac = ens.exit_times[hit] / ens.dt
        assert np.any(np.abs(frac - np.round(frac)) > 1e-6)
        assert np.all(ens.terminal_values[hit] == 0.0)


class TestFeynmanKac:
    def test_constant_forcing_zero_variance(self):
        t = 0.8
        spec = SdeSpec(None, 1.0, 0.3, 0.0, t)
        res = feynman_kac_estimate(
            spec, None, lambda x, s: np.ones_like(x), 500, 1e-2, seed=1
        )
        assert res.value == pytest.approx(t, rel=1e-12)
        assert res.std_error == pytest.approx(0.0, abs=1e-14)

    def test_driftless_mean_is_start_point(self):
        spec = SdeSpec(None, 1.0, -0.7, 0.0, 1.0)
        res = feynman_kac_estimate(spec, lambda x: x, None, 50_000, 5e-3, seed=2)
        assert abs(res.value - (-0.7)) < 3 * res.std_error

    def test_couette_weighted_growth_exact(self):
        # constant initial vorticity c0 with stretch weight exp(k0 t)
        c0, k0, t = 1.4, 1.0, 0.6
        spec = SdeSpec(lambda x, s: k0 * x, 0.05, 0.2, 0.0, t)
        res = feynman_kac_estimate(
            spec,
            lambda x: np.full_like(x, c0),
            None,
            200,
            1e-2,
            seed=3,
            weight=np.exp(k0 * t),
        )
        assert res.value == pytest.approx(c0 * np.exp(k0 * t), rel=1e-12)
        assert res.std_error == pytest.approx(0.0, abs=1e-12)


class TestBridgeInitial:
    def test_normalization(self):
        nu, t = 1.0, 0.5
        spec = SdeSpec(None, nu, 0.2, 0.0, t)

        def kern(xp):
            return np.exp(-((xp - 0.2) ** 2) / (4 * nu * t)) / np.sqrt(4 * np.pi * nu * t)

        res = bridge_check_initial(lambda x: np.ones_like(x), kern, spec, 2000, 1e-2, seed=4)
        assert res.quadrature_value == pytest.approx(1.0, abs=1e-9)
        assert res.mc_value == pytest.approx(1.0, abs=1e-12)

    def test_martingale_mean(self):
        nu, t, x0 = 0.7, 0.8, 1.1
        spec = SdeSpec(None, nu, x0, 0.0, t)

        def kern(xp):
            return np.exp(-((xp - x0) ** 2) / (4 * nu * t)) / np.sqrt(4 * np.pi * nu * t)

        res = bridge_check_initial(lambda x: x, kern, spec, 50_000, 5e-3, seed=5)
        assert res.quadrature_value == pytest.approx(x0, abs=1e-9)
        assert res.sigmas < 3

    def test_ou_second_moment(self):
        k0, nu, x0, t = 1.0, 0.5, 1.5, 0.7
        spec = ou_spec(k0, nu, x0, t)
        real = ConstantStrain(k0)
        res = bridge_check_initial(
            lambda x: x * x,
            lambda xp: ou_kernel(real, nu, xp, x0, t),
            spec,
            50_000,
            2e-3,
            seed=6,
        )
        mean = x0 * np.exp(-k0 * t)
        var = nu / k0 * (1 - np.exp(-2 * k0 * t))
        assert res.quadrature_value == pytest.approx(var + mean * mean, rel=1e-7)
        assert res.sigmas < 3

    def test_incompatible_kernel_rejected(self):
        spec = SdeSpec(None, 1.0, 0.0, 0.0, 1.0)
        with pytest.raises(ValueError, match="mass"):
            bridge_check_initial(
                lambda x: x, lambda xp: 2 * np.exp(-(xp**2) / 4) / np.sqrt(4 * np.pi), spec, 100, 0.1, 0
            )


class TestBridgeForcing:
    @staticmethod
    def heat_family(nu, x0):
        def family(xp, s):
            return np.exp(-((xp - x0) ** 2) / (4 * nu * s)) / np.sqrt(4 * np.pi * nu * s)

        return family

    def test_unit_forcing(self):
        t = 0.9
        spec = SdeSpec(None, 1.0, 0.0, 0.0, t)
        res = bridge_check_forcing(
            lambda x, s: np.ones_like(x), self.heat_family(1.0, 0.0), spec, 1000, 1e-2, seed=7
        )
        assert res.quadrature_value == pytest.approx(t, rel=1e-8)
        assert res.mc_value == pytest.approx(t, rel=1e-12)

    def test_linear_forcing_martingale(self):
        t, x0 = 0.6, 0.8
        spec = SdeSpec(None, 1.0, x0, 0.0, t)
        res = bridge_check_forcing(
            lambda x, s: x, self.heat_family(1.0, x0), spec, 50_000, 5e-3, seed=8
        )
        assert res.quadrature_value == pytest.approx(x0 * t, rel=1e-7)
        assert res.sigmas < 3

    def test_quadratic_forcing_analytic(self):
        nu, t, x0 = 0.5, 0.8, 0.4
        spec = SdeSpec(None, nu, x0, 0.0, t)
        res = bridge_check_forcing(
            lambda x, s: x * x, self.heat_family(nu, x0), spec, 50_000, 2e-3, seed=9
        )
        analytic = x0 * x0 * t + nu * t * t  # int_0^t (x0^2 + 2 nu s) ds
        assert res.quadrature_value == pytest.approx(analytic, rel=1e-7)
        assert res.sigmas < 3
        assert abs(res.mc_value - analytic) < 3 * res.mc_std_error + 5e-3 * analytic


class TestBridgeBoundary:
    def test_drift_unsupported(self):
        spec = ou_spec()
        with pytest.raises(UnsupportedConfigurationError):
            bridge_check_boundary(lambda s: np.ones_like(s), spec, 0.0, 100, 0.1, 0)

    def test_eventual_absorption(self):
        nu, d = 1.0, 0.6
        spec = SdeSpec(None, nu, d, 0.0, 200.0)
        res = bridge_check_boundary(
            lambda s: np.ones_like(s), spec, 0.0, 20_000, 2e-2, seed=10
        )
        expect = absorption_probability(d, nu, 200.0)
        assert expect > 0.95
        assert res.quadrature_value == pytest.approx(expect, rel=1e-6)
        assert res.sigmas < 3

    def test_finite_horizon_absorption_matches_erfc(self):
        nu, d, t = 0.5, 1.0, 2.0
        spec = SdeSpec(None, nu, d, 0.0, t)
        res = bridge_check_boundary(
            lambda s: np.ones_like(s), spec, 0.0, 50_000, 5e-3, seed=11
        )
        expect = absorption_probability(d, nu, t)
        assert res.quadrature_value == pytest.approx(expect, rel=1e-6)
        assert abs(res.mc_value - expect) < 3 * res.mc_std_error + 0.003

    def test_exit_time_expectation(self):
        nu, d, t = 1.0, 0.8, 3.0
        spec = SdeSpec(None, nu, d, 0.0, t)
        res = bridge_check_boundary(lambda s: s, spec, 0.0, 50_000, 5e-3, seed=12)
        assert res.sigmas < 3.5


class TestWeakConvergence:
    def test_bias_shrinks_linearly_in_dt(self):
        # strong contraction makes the Euler-Maruyama variance bias visible
        k0, nu, t, n = 2.0, 1.0, 1.0, 150_000
        target = nu / k0 * (1 - np.exp(-2 * k0 * t))
        biases = {}
        for dt in (0.1, 0.05, 0.025):
            ens = sample_paths(ou_spec(k0, nu, 0.0, t), n, dt, seed=13)
            biases[dt] = ens.terminal_values.var(ddof=1) - target
        assert abs(biases[0.1]) > abs(biases[0.025])
        assert biases[0.1] / biases[0.05] == pytest.approx(2.0, rel=0.35)


class TestGaussianIdentities:
    def test_lognormal_identity_white_noise(self):
        # <exp(-int k')> = exp(var/2) with var = k_tilde * t for the
        # discretized white-noise strain
        k_tilde, t, dt, n = 0.4, 1.0, 2e-3, 100_000
        rng_streams = np.empty((n, int(t / dt)))
        from gfkit.strain import DeltaCorrelated, StrainModel, path_h, sample_strain_matrix

        m = StrainModel(k0=1.0, fluctuation=DeltaCorrelated(k_tilde))
        k = sample_strain_matrix(m, t, dt, seed=14, n_paths=n)
        z = path_h(k, dt) - m.k0 * t
        w = np.exp(-z)
        se = w.std(ddof=1) / np.sqrt(n)
        assert abs(w.mean() - np.exp(0.5 * k_tilde * t)) < 3 * se

    def test_double_integral_identity_exponential_correlation(self):
        # (1/2) int int R(|s-s'|) = int (t-s) R(|s|) for smooth stationary R;
        # the square is split along the diagonal kink of |s - s'| so each
        # dblquad piece is smooth
        var0, tau_c, t = 0.3, 0.6, 1.4

        def corr(tau):
            return var0 * np.exp(-abs(tau) / tau_c)

        lower, _ = dblquad(
            lambda sp, s: corr(s - sp), 0, t, 0, lambda s: s, epsabs=1e-12, epsrel=1e-12
        )
        upper, _ = dblquad(
            lambda sp, s: corr(sp - s), 0, t, lambda s: s, t, epsabs=1e-12, epsrel=1e-12
        )
        single, _ = quad(lambda s: (t - s) * corr(s), 0, t, epsabs=1e-13)
        assert 0.5 * (lower + upper) == pytest.approx(single, abs=1e-10)
