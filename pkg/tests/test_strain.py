import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfkit.strain import (
    CallableStrain,
    ConstantStrain,
    DeltaCorrelated,
    ExponentialCorrelated,
    NoFluctuation,
    SampledStrainPath,
    StrainModel,
    StrainStabilityWarning,
    integrated_correlation,
    path_h,
    path_p,
    sample_strain_matrix,
    strain_h,
    strain_p,
    strain_path_sample,
    stretch_moment,
)

# Nested-quadrature oracle value (mpmath, 30 digits) for
# k(t) = 1 + 0.5 sin(2t) at t = 1.
P_SINUSOIDAL_T1 = 0.32403546630558610783


class TestStrainH:
    def test_constant(self):
        assert strain_h(ConstantStrain(2.0), 0.5) == pytest.approx(1.0, abs=1e-15)

    def test_zero_strain(self):
        r = CallableStrain(lambda t: 0.0)
        for t in (0.0, 0.3, 2.0):
            assert strain_h(r, t) == pytest.approx(0.0, abs=1e-14)

    def test_sinusoidal_vs_quadrature_oracle(self):
        r = CallableStrain(lambda t: 1.0 + np.sin(t))
        assert strain_h(r, np.pi) == pytest.approx(np.pi + 2.0, abs=1e-10)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            strain_h(ConstantStrain(1.0), -0.1)


class TestStrainP:
    def test_constant_closed_form(self):
        r = ConstantStrain(1.0)
        t = 2.0
        assert strain_p(r, t) == pytest.approx((1 - np.exp(-2 * t)) / 2, rel=1e-14)

    def test_long_time_limit(self):
        # saturates at 1/(2 k0)
        assert strain_p(ConstantStrain(1.0), 50.0) == pytest.approx(0.5, abs=1e-12)

    def test_p_at_zero(self):
        assert strain_p(ConstantStrain(3.0), 0.0) == 0.0
        assert strain_p(CallableStrain(lambda t: 1 + 0.5 * np.sin(2 * t)), 0.0) == 0.0

    def test_sinusoidal_vs_nested_quadrature_oracle(self):
        r = CallableStrain(lambda t: 1.0 + 0.5 * np.sin(2.0 * t))
        assert strain_p(r, 1.0) == pytest.approx(P_SINUSOIDAL_T1, abs=1e-8)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            strain_p(ConstantStrain(1.0), -1e-9)

    @given(
        ks=st.lists(st.floats(0.0, 5.0), min_size=1, max_size=30),
        frac=st.floats(0.0, 1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_p_bounded_by_t_for_nonnegative_k(self, ks, frac):
        path = SampledStrainPath(np.array(ks), dt=0.1)
        t = frac * path.t_end
        assert path.p(t) <= t + 1e-12


class TestSampledStrainPath:
    def test_matches_constant_closed_form(self):
        path = SampledStrainPath(np.full(100, 1.3), dt=0.01)
        ref = ConstantStrain(1.3)
        for t in (0.0, 0.25, 0.5, 1.0):
            assert path.h(t) == pytest.approx(ref.h(t), rel=1e-12, abs=1e-14)
            assert path.p(t) == pytest.approx(ref.p(t), rel=1e-12, abs=1e-14)

    def test_query_beyond_horizon_rejected(self):
        path = SampledStrainPath(np.ones(10), dt=0.1)
        with pytest.raises(ValueError):
            path.h(1.5)


class TestModelValidation:
    def test_k0_positive(self):
        with pytest.raises(ValueError):
            StrainModel(k0=0.0)

    def test_weight_restricted(self):
        with pytest.raises(ValueError):
            StrainModel(k0=1.0, boundary_delta_weight=0.7)

    def test_stability_warning(self):
        with pytest.warns(StrainStabilityWarning):
            StrainModel(k0=1.0, fluctuation=DeltaCorrelated(k_tilde=1.5))


class TestSampling:
    def test_no_fluctuation_is_constant(self):
        m = StrainModel(k0=2.0)
        path = strain_path_sample(m, t_end=1.0, dt=0.1, seed=7)
        assert np.all(path.k_values == 2.0)

    def test_reproducible_and_stream_isolated(self):
        m = StrainModel(k0=1.0, fluctuation=DeltaCorrelated(0.2))
        a = sample_strain_matrix(m, 1.0, 0.01, seed=42, n_paths=50)
        b = sample_strain_matrix(m, 1.0, 0.01, seed=42, n_paths=80)
        assert np.array_equal(a, b[:50])

    def test_delta_integral_variance(self):
        # var(int_0^t k') = k_tilde * t for the white-noise discretization
        k_tilde, t, dt = 0.3, 1.0, 0.005
        m = StrainModel(k0=1.0, fluctuation=DeltaCorrelated(k_tilde))
        k = sample_strain_matrix(m, t, dt, seed=11, n_paths=100_000)
        z = (path_h(k, dt) - m.k0 * t)
        var = z.var()
        se = var * np.sqrt(2.0 / (z.size - 1))
        assert abs(var - k_tilde * t) < 3 * se

    def test_exponential_acf(self):
        var0, tau_c, dt = 0.04, 0.5, 0.05
        m = StrainModel(k0=1.0, fluctuation=ExponentialCorrelated(var0, tau_c))
        k = sample_strain_matrix(m, 40.0, dt, seed=3, n_paths=400)
        kp = k - m.k0
        for lag_steps in (2, 6, 12):
            prod = kp[:, :-lag_steps] * kp[:, lag_steps:]
            est = prod.mean()
            se = prod.std() / np.sqrt(prod.shape[0])  # rows are independent
            expected = var0 * np.exp(-lag_steps * dt / tau_c)
            assert abs(est - expected) < 3 * se

    def test_exponential_white_noise_limit(self):
        # tau_c -> 0 with variance*tau_c = k_tilde/2 fixed reproduces the
        # white-noise integral variance k_tilde * t (OU integral variance
        # formula: var = 2*variance*(tau_c t - tau_c^2(1 - exp(-t/tau_c)))).
        k_tilde, t = 0.4, 2.0
        for tau_c in (0.1, 0.01, 0.001):
            var0 = k_tilde / (2 * tau_c)
            ivar = 2 * var0 * (tau_c * t - tau_c**2 * (1 - np.exp(-t / tau_c)))
            assert ivar == pytest.approx(k_tilde * t, rel=2 * tau_c / t + 1e-12)
        m = StrainModel(k0=30.0, fluctuation=ExponentialCorrelated(k_tilde / 0.02, 0.01))
        k = sample_strain_matrix(m, t, 0.002, seed=5, n_paths=60_000)
        z = path_h(k, 0.002) - m.k0 * t
        ivar_exact = 2 * integrated_correlation(m, t)
        var = z.var()
        se = var * np.sqrt(2.0 / (z.size - 1))
        assert abs(var - ivar_exact) < 3 * se
        assert ivar_exact == pytest.approx(k_tilde * t, rel=0.02)


class TestClosedFormMoments:
    def test_integrated_correlation_none(self):
        assert integrated_correlation(StrainModel(1.0), 3.0) == 0.0

    def test_integrated_correlation_delta_weights(self):
        m_half = StrainModel(1.0, DeltaCorrelated(0.2), boundary_delta_weight=0.5)
        m_full = StrainModel(1.0, DeltaCorrelated(0.2), boundary_delta_weight=1.0)
        assert integrated_correlation(m_half, 2.0) == pytest.approx(0.2)
        assert integrated_correlation(m_full, 2.0) == pytest.approx(0.4)

    def test_integrated_correlation_exponential_quadrature(self):
        from scipy.integrate import quad

        m = StrainModel(1.0, ExponentialCorrelated(variance=0.09, tau_c=0.7))
        t = 1.7
        ref, _ = quad(lambda s: (t - s) * 0.09 * np.exp(-s / 0.7), 0, t, epsabs=1e-13)
        assert integrated_correlation(m, t) == pytest.approx(ref, abs=1e-12)

    def test_stretch_moment_reduces_to_deterministic(self):
        m = StrainModel(1.5)
        assert stretch_moment(m, 2.0, -1.0) == pytest.approx(np.exp(-3.0), rel=1e-14)

    def test_stretch_moment_vs_lognormal_mc(self):
        m = StrainModel(1.0, DeltaCorrelated(0.25))
        t, dt = 1.0, 0.002
        k = sample_strain_matrix(m, t, dt, seed=9, n_paths=100_000)
        w = np.exp(-path_h(k, dt))
        est, se = w.mean(), w.std(ddof=1) / np.sqrt(w.size)
        assert abs(est - stretch_moment(m, t, -1.0)) < 3 * se


def test_path_p_matches_scalar_path():
    m = StrainModel(1.0, DeltaCorrelated(0.1))
    k = sample_strain_matrix(m, 0.5, 0.01, seed=21, n_paths=4)
    vec = path_p(k, 0.01)
    for i in range(4):
        assert vec[i] == pytest.approx(SampledStrainPath(k[i], 0.01).p(0.5), rel=1e-13)
