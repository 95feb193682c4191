import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from vacuumqkd.constants import HBAR, K_B, SINGULAR_GUARD
from vacuumqkd.field import (
    DetectorParams,
    Label,
    PairingError,
    bogolyubov,
    effective_longitudinal,
    longitudinal_mode,
    make_pair,
    transverse_mode,
    transverse_profile,
    unruh_temperature,
    validate_pair,
)

B_PARAMS = DetectorParams.from_widths(14e9, 10e9, 5e9, 0.5e9)


class TestDetectorParams:
    def test_rejects_nonpositive(self):
        for bad in (dict(a=0), dict(omega_do=-1), dict(d=0), dict(s=math.inf)):
            kw = dict(a=1.0, omega_do=1.0, d=1.0, s=1.0) | bad
            with pytest.raises(ValueError):
                DetectorParams(**kw)

    def test_from_widths_squares(self):
        p = DetectorParams.from_widths(1.0, 2.0, 3.0, 4.0)
        assert (p.d, p.s) == (9.0, 16.0)

    def test_pair_validation(self):
        f, p = make_pair(1.0, 2.0, 3.0, 4.0, epsilon=0.3, tau=0.1)
        validate_pair(f, p)
        assert p.label is Label.PAST and p.epsilon == -0.3 and p.tau == -0.1
        with pytest.raises(PairingError):
            validate_pair(f, f)
        with pytest.raises(PairingError):
            validate_pair(f, DetectorParams(1.0, 2.0, 3.0, 4.0, epsilon=0.3, tau=-0.1, label="past"))
        with pytest.raises(PairingError):
            validate_pair(f, p.with_omega(2.5))


class TestBogolyubov:
    def test_ratio_at_unit_frequency(self):
        a_c, b_c = bogolyubov(1.0, 0.3, 1.0, 1.0)
        assert abs(b_c) / abs(a_c) == pytest.approx(0.0432139, rel=1e-6)
        assert abs(b_c) / abs(a_c) == pytest.approx(math.exp(-math.pi), rel=1e-15)

    def test_high_frequency_norm(self):
        a_c, _ = bogolyubov(1e3, 0.0, 1.0, 1.0)
        assert abs(a_c) * math.sqrt(2 * math.pi) == pytest.approx(1.0, rel=1e-12)

    def test_zero_wavenumber_is_real(self):
        a_c, _ = bogolyubov(2.0, 0.0, 3.0, 1.5)
        assert a_c.imag == 0.0 and a_c.real > 0

    @given(st.floats(1e-3, 1e3), st.floats(-0.999, 0.999), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
    def test_normalization_invariant(self, omega_d, frac, omega_s, a):
        a_c, b_c = bogolyubov(omega_d, frac * omega_s, omega_s, a)
        lhs = abs(a_c) ** 2 * -math.expm1(-2 * math.pi * omega_d / a) * 2 * math.pi * omega_s
        assert lhs == pytest.approx(1.0, rel=1e-12)
        assert abs(b_c) == pytest.approx(math.exp(-math.pi * omega_d / a) * abs(a_c), rel=1e-14)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            bogolyubov(1.0, 1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            bogolyubov(1.0, 0.0, 1.0, 0.0)


class TestModes:
    def test_peak_value(self):
        p = DetectorParams(1.0, 3.0, 2.0, 0.5)
        assert longitudinal_mode(3.0, p) == pytest.approx((2.0 * math.pi) ** -0.25)
        assert transverse_mode(0.0, p) == pytest.approx((0.5 * math.pi) ** -0.25)
        assert transverse_mode(0.5, p) == pytest.approx(math.exp(-0.5) * transverse_mode(0.0, p))

    def test_unit_norms_by_scipy(self):
        p = DetectorParams(1.0, 3.0, 2.0, 0.5, epsilon=0.7)
        lon, _ = integrate.quad(lambda k: abs(longitudinal_mode(k, p)) ** 2, -np.inf, np.inf, epsabs=1e-13)
        per_axis, _ = integrate.quad(lambda k: transverse_mode(k * k, p) ** 2, -np.inf, np.inf, epsabs=1e-13)
        plane, _ = integrate.quad(lambda k: transverse_profile(k * k, p) ** 2 * 2 * math.pi * k, 0, np.inf,
                                  epsabs=1e-13)
        assert lon == pytest.approx(1.0, abs=1e-9)
        assert per_axis == pytest.approx(1.0, abs=1e-9)
        assert plane == pytest.approx(1.0, abs=1e-9)

    def test_profile_is_product_of_axes(self):
        p = DetectorParams(1.0, 3.0, 2.0, 0.5)
        k2, k3 = 0.3, -0.8
        assert transverse_profile(k2**2 + k3**2, p) == pytest.approx(transverse_mode(k2**2, p) * transverse_mode(k3**2, p))

    def test_figure_scale_suppression(self):
        # Exponent convention: d = 5e9 enters as (k - k0)^2 / (2 d).
        p = DetectorParams(14e9, 10e9, 5e9, 0.5e9)
        ratio = abs(longitudinal_mode(0.0, p)) ** 2 / abs(longitudinal_mode(10e9, p)) ** 2
        assert ratio == 0.0  # e^{-2e10} underflows

    @given(st.floats(-5, 5), st.floats(-3, 3))
    def test_epsilon_conjugation(self, k, eps):
        p = DetectorParams(1.0, 1.0, 1.0, 1.0, epsilon=eps)
        q = DetectorParams(1.0, 1.0, 1.0, 1.0, epsilon=-eps)
        assert longitudinal_mode(k, p) == pytest.approx(np.conj(longitudinal_mode(k, q)), abs=1e-15)


class TestEffectiveLongitudinal:
    def test_on_axis_prefactor_one(self):
        p = DetectorParams(1.0, 2.0, 1.5, 1.0)
        out = effective_longitudinal(2.5, 0.0, p, K=4.0)
        assert out.value == pytest.approx(2.0 * (longitudinal_mode(2.5, p) + longitudinal_mode(-2.5, p)))
        assert not out.clamped

    def test_boundary_clamped_and_suppressed(self):
        p = DetectorParams(14e9, 10e9, 5e9, 0.5e9)
        k_perp = 3e4
        out = effective_longitudinal(k_perp, k_perp**2, p)
        peak = effective_longitudinal(p.omega_do, 0.0, p)
        assert out.clamped
        assert abs(out.value) < 1e-100 * abs(peak.value)

    def test_magnitude_independent_of_epsilon(self):
        p = DetectorParams(1.0, 2.0, 1.5, 1.0)
        q = DetectorParams(1.0, 2.0, 1.5, 1.0, epsilon=0.4)
        ob, kk = np.array([1.0, 2.0, 3.0]), np.array([0.2, 1.0, 4.0])
        mp = abs(effective_longitudinal(ob, kk, p).value)
        mq = abs(effective_longitudinal(ob, kk, q).value)
        # epsilon enters only through the relative phase of f(u) and f(-u).
        assert np.allclose(mp[2] > 0, True) and np.all(np.isfinite(mq))
        big = DetectorParams(1.0, 20.0, 1.5, 1.0, epsilon=0.4)
        big0 = DetectorParams(1.0, 20.0, 1.5, 1.0)
        assert abs(effective_longitudinal(20.0, 1.0, big).value) == pytest.approx(
            abs(effective_longitudinal(20.0, 1.0, big0).value), rel=1e-12)

    def test_rejects_inside_light_cone(self):
        with pytest.raises(ValueError):
            effective_longitudinal(1.0, 4.0, B_PARAMS)

    def test_guard_constant(self):
        assert SINGULAR_GUARD == 1e-12


class TestUnruh:
    def test_value(self):
        assert unruh_temperature(14e9) == pytest.approx(1.70e-2, rel=5e-3)
        assert unruh_temperature(14e9) == pytest.approx(14e9 * HBAR / (2 * math.pi * K_B), rel=1e-15)

    def test_limits(self):
        assert unruh_temperature(0.0) == 0.0
        assert unruh_temperature(2e9) == pytest.approx(2 * unruh_temperature(1e9), rel=1e-15)
