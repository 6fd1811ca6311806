"""Pulse shapes, mixing angles, and counterdiabatic envelopes.

Every closed-form claim is checked against an independent oracle: finite
differences for derivatives, quadrature for areas, and the hyperbolic-secant
form for the counterdiabatic pulse of two equal Gaussians.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qutrit_ctrl import (
    FractionalParams,
    GaussianPulse,
    PulseError,
    cd_envelope,
    drive_floor_mask,
    fractional_schedule,
    global_adiabaticity,
    mixing_angle,
    pulse_area,
    stirap_schedule,
    two_photon_cd_envelope,
)
from qutrit_ctrl.pulses import (
    EnvelopeSum,
    adiabaticity_metric,
    detuned_cd_terms,
    envelope_peak,
    mixing_angle_rates,
    rabi_magnitude,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)


class TestGaussianPulse:
    def test_value_matches_closed_form(self):
        g = GaussianPulse(peak=0.1, center=-30.0, sigma=25.0)
        rng = np.random.default_rng(7)
        t = rng.uniform(-150.0, 90.0, 200)
        expected = 0.1 * np.exp(-((t + 30.0) ** 2) / (2.0 * 25.0**2))
        np.testing.assert_allclose(g.value(t), expected, rtol=0, atol=1e-16)

    def test_derivative_against_central_difference(self):
        """Analytic derivative vs O(h^2) finite difference at 200 random times."""
        g = GaussianPulse(peak=1.0 / 6.0, center=0.0, sigma=36.0)
        rng = np.random.default_rng(11)
        t = rng.uniform(-180.0, 180.0, 200)
        h = 1e-4 * 36.0
        fd = (g.value(t + h) - g.value(t - h)) / (2.0 * h)
        np.testing.assert_allclose(g.derivative(t), fd, atol=1e-8)

    def test_envelope_sum_is_linear(self):
        g1 = GaussianPulse(0.2, 0.0, 36.0)
        g2 = GaussianPulse(0.05, -72.0, 36.0)
        s = EnvelopeSum((g1, g2))
        t = np.linspace(-200.0, 150.0, 401)
        np.testing.assert_allclose(s.value(t), g1.value(t) + g2.value(t), rtol=1e-15)
        h = 1e-3
        fd = (s.value(t + h) - s.value(t - h)) / (2.0 * h)
        np.testing.assert_allclose(s.derivative(t), fd, atol=1e-9)


class TestPulseArea:
    def test_gaussian_area_is_sqrt_2pi_sigma_peak(self):
        """Quadrature against the exact Gaussian integral sqrt(2 pi) sigma Omega.

        The window truncates the tails at five sigma, so the relative
        deviation sits at the erfc(5/sqrt(2)) level, a few parts in 1e7.
        """
        sched = stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0)
        area = pulse_area(sched.env01, sched.window)
        assert abs(area - SQRT_2PI * 36.0 * 0.1) < 1e-5
        assert abs(area - 9.0239) < 1e-3

    def test_area_of_stronger_drive(self):
        sched = stirap_schedule(1.0 / 6.0, 1.0 / 6.0, sigma=36.0, t_s=-72.0)
        area = pulse_area(sched.env01, sched.window)
        assert abs(area - SQRT_2PI * 6.0) < 2e-5
        # The strong-drive figure quotes this as approximately 5 pi.
        assert abs(area - 5.0 * math.pi) / (5.0 * math.pi) < 0.10

    def test_weak_drive_area_is_3pi_within_ten_percent(self):
        sched = stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0)
        area = pulse_area(sched.env01, sched.window)
        assert abs(area - 3.0 * math.pi) / (3.0 * math.pi) < 0.10

    def test_envelope_peak_recovers_gaussian_peak(self):
        sched = stirap_schedule(0.1, 0.15, sigma=36.0, t_s=-72.0)
        assert abs(envelope_peak(sched.env01, sched.window) - 0.1) < 1e-5
        assert abs(envelope_peak(sched.env12, sched.window) - 0.15) < 1e-5


class TestStirapSchedule:
    def test_counterintuitive_centers(self):
        sched = stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0)
        t = np.linspace(*sched.window, 2001)
        # 1-2 drive peaks first (counterintuitive ordering), 0-1 peaks at 0.
        assert abs(t[np.argmax(sched.env12.value(t))] + 72.0) < 0.5
        assert abs(t[np.argmax(sched.env01.value(t))]) < 0.5

    def test_narrow_window_rejected(self):
        """A four-sigma pad leaves visible envelope at the edges."""
        with pytest.raises(PulseError, match="decayed"):
            stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0, pad=4.0)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(PulseError):
            stirap_schedule(0.1, 0.1, sigma=0.0, t_s=-72.0)

    def test_zero_separation_rejected_for_cd(self):
        sched = stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0)
        assert sched.t_s == -72.0
        with pytest.raises(PulseError):
            cd_envelope(stirap_schedule(0.1, 0.1, 36.0, t_s=0.0), 0.0)


class TestMixingAngle:
    def setup_method(self):
        self.sched = stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0)

    def test_midpoint_is_pi_over_4(self):
        assert mixing_angle(self.sched, -36.0) == pytest.approx(math.pi / 4, abs=1e-15)

    def test_limits(self):
        t0, t1 = self.sched.window
        assert mixing_angle(self.sched, t0) < 0.01
        assert mixing_angle(self.sched, t1) > math.pi / 2 - 0.01

    def test_monotone_for_plain_counterintuitive_pair(self):
        t = np.linspace(*self.sched.window, 4001)
        theta = mixing_angle(self.sched, t)
        assert np.all(np.diff(theta) >= 0)

    def test_forward_fill_through_underflowed_tail(self):
        """Angles hold their last defined value once both Gaussians underflow."""
        t = np.array([100.0, 3000.0])
        theta = mixing_angle(self.sched, t)
        assert theta[1] == theta[0]

    def test_scalar_in_dead_zone_rejected(self):
        with pytest.raises(PulseError, match="both drives are zero"):
            mixing_angle(self.sched, 3000.0)

    def test_dead_start_rejected(self):
        with pytest.raises(PulseError, match="no earlier defined value"):
            mixing_angle(self.sched, np.array([-3000.0, 0.0]))


class TestMixingAngleRates:
    def setup_method(self):
        self.sched = stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0)

    def test_theta_dot_against_finite_difference(self):
        rng = np.random.default_rng(3)
        t = rng.uniform(-150.0, 80.0, 100)
        h = 1e-4
        fd = (mixing_angle(self.sched, t + h) - mixing_angle(self.sched, t - h)) / (
            2.0 * h
        )
        theta_dot, _ = mixing_angle_rates(self.sched, 0.1, t)
        np.testing.assert_allclose(theta_dot, fd, atol=1e-6)

    def test_phi_dot_against_finite_difference(self):
        """dPhi/dt vs differenced Phi = (1/2) atan2(Omega_r, delta)."""
        delta = 0.1
        rng = np.random.default_rng(4)
        t = rng.uniform(-150.0, 80.0, 100)
        h = 1e-4

        def phi(tt):
            return 0.5 * np.arctan2(rabi_magnitude(self.sched, tt), delta)

        fd = (phi(t + h) - phi(t - h)) / (2.0 * h)
        _, phi_dot = mixing_angle_rates(self.sched, delta, t)
        np.testing.assert_allclose(phi_dot, fd, atol=1e-6)

    def test_resonant_drive_has_no_bright_rotation(self):
        t = np.linspace(-200.0, 100.0, 301)
        _, phi_dot = mixing_angle_rates(self.sched, 0.0, t)
        np.testing.assert_array_equal(phi_dot, 0.0)

    def test_rates_vanish_where_drives_are_off(self):
        theta_dot, phi_dot = mixing_angle_rates(self.sched, 0.1, 5000.0)
        assert theta_dot == 0.0
        assert phi_dot == 0.0


class TestCdEnvelope:
    """Two equal Gaussians separated by t_s give a sech-shaped CD pulse."""

    def setup_method(self):
        self.sched = stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0)
        self.rate = 72.0 / 36.0**2  # |t_s| / sigma^2 = 2 / sigma here

    def test_peak_amplitude_and_position(self):
        peak = cd_envelope(self.sched, -36.0)
        assert abs(peak) == pytest.approx(2.0 / 36.0, abs=1e-15)
        off = cd_envelope(self.sched, -36.0 + 10.0)
        assert abs(off) < abs(peak)

    def test_is_positive_imaginary_for_counterintuitive_order(self):
        val = cd_envelope(self.sched, -30.0)
        assert val.real == 0.0
        assert val.imag > 0.0

    def test_quotient_matches_sech(self):
        """|Omega_cd(t)| * cosh(rate (t - t_s/2)) is constant to 1e-10."""
        rng = np.random.default_rng(5)
        t = rng.uniform(-220.0, 120.0, 500)
        mag = np.abs(cd_envelope(self.sched, t))
        sech = 1.0 / np.cosh(self.rate * (t + 36.0))
        np.testing.assert_allclose(mag / self.rate, sech, atol=1e-10)

    def test_area_is_pi(self):
        """The integral of rate * sech(rate u) over the window is pi.

        Tail truncation at the window edges costs about 2e-4, well inside
        the 1e-3 pi tolerance.
        """
        t = np.linspace(*self.sched.window, 40001)
        area = np.trapezoid(np.abs(cd_envelope(self.sched, t)), t)
        assert abs(area - math.pi) < 1e-3 * math.pi

    def test_unequal_peaks_rejected(self):
        with pytest.raises(PulseError):
            cd_envelope(stirap_schedule(0.1, 0.12, 36.0, -72.0), 0.0)


class TestTwoPhotonCdEnvelope:
    def test_peak_magnitude_closed_form(self):
        """m = sqrt(2 delta02 rate / (lam cosh)); peak at t = t_s/2."""
        mag, phase = two_photon_cd_envelope(-72.0, 36.0, 0.5, math.sqrt(2.0), -36.0)
        expected = math.sqrt(2.0 * 0.5 * (72.0 / 36.0**2) / math.sqrt(2.0))
        assert mag == pytest.approx(expected, rel=1e-14)
        assert abs(mag - 0.198) < 5e-4
        assert phase == pytest.approx(-math.pi / 4, abs=1e-15)

    def test_scales_as_sqrt_delta02(self):
        t = np.linspace(-200.0, 100.0, 101)
        lo, _ = two_photon_cd_envelope(-72.0, 36.0, 0.25, 1.0, t)
        hi, _ = two_photon_cd_envelope(-72.0, 36.0, 0.5, 1.0, t)
        np.testing.assert_allclose(hi, math.sqrt(2.0) * lo, rtol=1e-12)

    def test_composes_back_to_cd_magnitude(self):
        """Adiabatic elimination round trip.

        Driving at amplitude m(t) produces an effective 0-2 coupling whose
        magnitude must equal the ideal CD envelope it was derived from.
        The wide schedule keeps the drive small against delta02 so the
        second-order formula is the whole story.
        """
        from qutrit_ctrl import effective_coupling

        sched = stirap_schedule(0.1, 0.1, sigma=80.0, t_s=-160.0)
        rng = np.random.default_rng(6)
        t = rng.uniform(-400.0, 200.0, 200)
        mag, _ = two_photon_cd_envelope(-160.0, 80.0, 0.5, 1.0, t)
        eff = effective_coupling(mag, 0.5, 1.0)
        np.testing.assert_allclose(np.abs(eff), np.abs(cd_envelope(sched, t)), atol=1e-12)
        assert np.all(np.real(eff) <= 0.0)

    def test_parameter_validation(self):
        with pytest.raises(PulseError):
            two_photon_cd_envelope(72.0, 36.0, 0.5, 1.0, 0.0)
        with pytest.raises(PulseError):
            two_photon_cd_envelope(-72.0, 36.0, -0.5, 1.0, 0.0)
        with pytest.raises(PulseError):
            two_photon_cd_envelope(-72.0, 36.0, 0.5, 0.0, 0.0)


class TestFractionalSchedule:
    def setup_method(self):
        self.base = stirap_schedule(1.0 / 6.0, 1.0 / 6.0, sigma=36.0, t_s=-72.0)

    def test_defaults_and_segments(self):
        frac = FractionalParams()
        sched = fractional_schedule(self.base, frac)
        assert len(sched.segments) == 2
        # Default hold time is ten sigma.
        assert sched.window[1] > 360.0

    def test_segments_sum_to_combined_envelopes(self):
        sched = fractional_schedule(self.base, FractionalParams(eta=0.9))
        rng = np.random.default_rng(8)
        t = rng.uniform(sched.window[0], sched.window[1], 300)
        (a01, a12), (b01, b12) = sched.segments
        np.testing.assert_allclose(
            a01.value(t) + b01.value(t), sched.env01.value(t), atol=1e-15
        )
        np.testing.assert_allclose(
            a12.value(t) + b12.value(t), sched.env12.value(t), atol=1e-15
        )

    @pytest.mark.parametrize("eta", [math.pi / 4, 1.0])
    def test_mirror_symmetry(self, eta):
        """The double sequence reflects: env01(t_s + tau - t) = env12(t).

        Holds for every partial angle because the second sub-sequence swaps
        the roles of the two drives with matching weights.
        """
        sched = fractional_schedule(self.base, FractionalParams(eta=eta))
        mirror = self.base.t_s + 360.0
        rng = np.random.default_rng(9)
        t = rng.uniform(sched.window[0], sched.window[1], 300)
        np.testing.assert_allclose(
            sched.env01.value(mirror - t), sched.env12.value(t), rtol=1e-12, atol=1e-18
        )

    @pytest.mark.parametrize("eta", [math.pi / 4, 0.7])
    def test_partial_angle_endpoints(self, eta):
        """The drive ratio starts at cot(eta) and ends at tan(eta).

        Equivalently Theta runs from pi/2 - eta to eta, which is what makes
        the first half produce the partial superposition and the reversed
        half complete the population exchange.
        """
        sched = fractional_schedule(self.base, FractionalParams(eta=eta))
        t0, t1 = sched.window
        # A sigma beyond the window the competing Gaussian is ~e^-14 down,
        # leaving the pure weight ratio of the dominant pair.
        theta_i = mixing_angle(sched, t0 - 36.0)
        theta_f = mixing_angle(sched, t1 + 36.0)
        assert theta_i == pytest.approx(math.pi / 2 - eta, abs=1e-6)
        assert theta_f == pytest.approx(eta, abs=1e-6)

    def test_hold_time_must_clear_the_first_half(self):
        with pytest.raises(PulseError):
            fractional_schedule(self.base, FractionalParams(tau=36.0))

    def test_refractioning_rejected(self):
        once = fractional_schedule(self.base, FractionalParams())
        with pytest.raises(PulseError):
            fractional_schedule(once, FractionalParams())

    def test_eta_range_validated(self):
        with pytest.raises(PulseError):
            FractionalParams(eta=-0.1)
        with pytest.raises(PulseError):
            FractionalParams(eta=math.pi / 2 + 0.1)


class TestDetunedCdTerms:
    def setup_method(self):
        self.sched = stirap_schedule(0.1, 0.1, sigma=36.0, t_s=-72.0)

    def test_resonant_limit_reduces_to_theta_dot(self):
        t = np.linspace(-180.0, 100.0, 201)
        a01, a12, a02 = detuned_cd_terms(self.sched, 0.0, t)
        np.testing.assert_array_equal(a01, 0.0)
        np.testing.assert_array_equal(a12, 0.0)
        theta_dot, _ = mixing_angle_rates(self.sched, 0.0, t)
        np.testing.assert_allclose(a02, theta_dot, rtol=1e-14)

    def test_detuned_terms_follow_the_bright_angle(self):
        t = np.linspace(-180.0, 100.0, 201)
        delta = 0.1
        a01, a12, _ = detuned_cd_terms(self.sched, delta, t)
        theta = mixing_angle(self.sched, t)
        _, phi_dot = mixing_angle_rates(self.sched, delta, t)
        np.testing.assert_allclose(a01, phi_dot * np.sin(theta), atol=1e-15)
        np.testing.assert_allclose(a12, -phi_dot * np.cos(theta), atol=1e-15)


class TestDriveFloorMask:
    def test_half_point_at_the_floor(self):
        assert drive_floor_mask(1e-3, 1.0) == pytest.approx(0.5, abs=1e-12)

    def test_open_and_closed_limits(self):
        assert drive_floor_mask(1e-2, 1.0) > 1.0 - 1e-8
        assert drive_floor_mask(1e-4, 1.0) < 1e-7

    @given(
        mag=st.floats(min_value=0.0, max_value=10.0),
        peak=st.floats(min_value=1e-6, max_value=10.0),
        floor=st.floats(min_value=1e-6, max_value=0.5),
    )
    @settings(max_examples=200, deadline=None)
    def test_bounded_between_zero_and_one(self, mag, peak, floor):
        m = drive_floor_mask(mag, peak, floor=floor)
        assert 0.0 <= m <= 1.0

    def test_monotone_in_magnitude(self):
        mags = np.linspace(0.0, 0.02, 400)
        mask = drive_floor_mask(mags, 1.0)
        assert np.all(np.diff(mask) >= 0)


class TestAdiabaticity:
    def test_global_metric_scales_inversely_with_drive(self):
        """The angle swept is amplitude independent; the gap grows with it."""
        strong = stirap_schedule(1.0 / 6.0, 1.0 / 6.0, 36.0, -72.0)
        weak = stirap_schedule(1.0 / 60.0, 1.0 / 60.0, 36.0, -72.0)
        assert global_adiabaticity(weak) == pytest.approx(
            10.0 * global_adiabaticity(strong), rel=1e-10
        )

    def test_local_metric_at_midpoint(self):
        sched = stirap_schedule(0.1, 0.1, 36.0, -72.0)
        theta_dot, _ = mixing_angle_rates(sched, 0.0, -36.0)
        r = rabi_magnitude(sched, -36.0)
        assert adiabaticity_metric(sched, -36.0) == pytest.approx(
            math.sqrt(2.0) * abs(theta_dot) / r, rel=1e-12
        )
