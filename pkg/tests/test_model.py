"""Rotating-frame Hamiltonians and the instantaneous eigenbasis.

The analytic eigensystem is validated against a dense Hermitian
eigensolver; the carrier-frame builder is validated by integrating a
Rabi flip and a two-photon oscillation and comparing against the
effective second-order picture.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qutrit_ctrl import (
    DriveDetunings,
    IntegratorConfig,
    QutritParams,
    basis_state,
    build_carrier_hamiltonian,
    build_effective_hamiltonian,
    build_rwa_hamiltonian,
    instantaneous_eigensystem,
    integrate,
    populations,
)
from qutrit_ctrl.model import DegenerateDriveError, DriveTone


class TestStatesAndPopulations:
    def test_basis_states_are_orthonormal(self):
        for i in range(3):
            for j in range(3):
                ovl = np.vdot(basis_state(i), basis_state(j))
                assert ovl == (1.0 if i == j else 0.0)

    def test_level_out_of_range(self):
        with pytest.raises(ValueError):
            basis_state(3)

    @given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
    @settings(max_examples=100, deadline=None)
    def test_populations_of_normalized_state_sum_to_one(self, parts):
        psi = np.array(parts[:3]) + 1j * np.array(parts[3:])
        norm = np.linalg.norm(psi)
        if norm < 1e-3:
            return
        p = populations(psi / norm)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) < 1e-12


class TestRwaHamiltonian:
    def test_matrix_layout(self):
        det = DriveDetunings(delta01=0.05, delta12=-0.05, delta02=0.5)
        h = build_rwa_hamiltonian(0.1, 0.2, det)
        expected = 0.5 * np.array(
            [
                [0.0, 0.1, 0.0],
                [0.1, 2 * 0.05, 0.2],
                [0.0, 0.2, 2 * (0.05 - 0.05)],
            ]
        )
        np.testing.assert_allclose(h, expected, atol=1e-16)

    def test_hermitian_for_random_draws(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            o1, o2 = rng.uniform(0, 0.5, 2)
            d1, d2 = rng.uniform(-0.5, 0.5, 2)
            h = build_rwa_hamiltonian(o1, o2, DriveDetunings(d1, d2, 0.5))
            np.testing.assert_array_equal(h, h.conj().T)


class TestInstantaneousEigensystem:
    def test_against_dense_eigensolver(self):
        """Closed-form eigenpairs vs numpy.linalg.eigh on 50 random draws."""
        rng = np.random.default_rng(13)
        for _ in range(50):
            o1, o2 = rng.uniform(0.01, 0.5, 2)
            d1 = rng.uniform(-0.5, 0.5)
            det = DriveDetunings(d1, -d1, 0.5)
            h = build_rwa_hamiltonian(o1, o2, det)
            basis = instantaneous_eigensystem(o1, o2, d1)
            w = np.sort(np.linalg.eigvalsh(h))
            analytic = np.sort([basis.omega_minus, basis.omega_dark, basis.omega_plus])
            np.testing.assert_allclose(analytic, w, atol=1e-12)
            for vec, val in (
                (basis.vec_plus, basis.omega_plus),
                (basis.vec_minus, basis.omega_minus),
                (basis.vec_dark, basis.omega_dark),
            ):
                assert np.max(np.abs(h @ vec - val * vec)) < 1e-12
                assert abs(np.linalg.norm(vec) - 1.0) < 1e-12

    def test_resonant_symmetric_splitting(self):
        """Equal resonant drives split the bright pair by Omega/sqrt(2).

        With Omega01 = Omega12 = Omega and delta01 = 0 the bright doublet
        sits at +/- Omega/sqrt(2) around the dark state at zero; the dense
        eigensolver above pins the same values independently.
        """
        basis = instantaneous_eigensystem(0.1, 0.1, 0.0)
        assert basis.omega_dark == 0.0
        assert basis.omega_plus == pytest.approx(0.1 / math.sqrt(2.0), abs=1e-15)
        assert basis.omega_minus == pytest.approx(-0.1 / math.sqrt(2.0), abs=1e-15)

    def test_mixing_angles(self):
        basis = instantaneous_eigensystem(0.3, 0.4, 0.0)
        assert basis.theta == pytest.approx(math.atan2(0.3, 0.4), abs=1e-15)
        assert basis.phi == pytest.approx(math.pi / 4, abs=1e-15)

    def test_dark_state_has_no_intermediate_component(self):
        basis = instantaneous_eigensystem(0.3, 0.4, 0.2)
        assert basis.vec_dark[1] == 0.0
        np.testing.assert_allclose(
            basis.vec_dark,
            [math.cos(basis.theta), 0.0, -math.sin(basis.theta)],
            atol=1e-15,
        )

    def test_degenerate_drive_rejected(self):
        with pytest.raises(DegenerateDriveError):
            instantaneous_eigensystem(0.0, 0.0, 0.1)
        with pytest.raises(DegenerateDriveError):
            instantaneous_eigensystem(-0.1, 0.2, 0.0)


class TestDriveDetunings:
    def test_two_photon_resonant_constructor(self):
        det = DriveDetunings.two_photon_resonant(0.1)
        assert det.delta01 == 0.1
        assert det.delta12 == -0.1
        assert det.delta02 == 0.5
        assert det.is_two_photon_resonant

    def test_resonance_requirement(self):
        det = DriveDetunings(delta01=0.1, delta12=0.0, delta02=0.5)
        assert not det.is_two_photon_resonant
        with pytest.raises(ValueError):
            det.require_two_photon_resonance()

    def test_custom_two_photon_offset(self):
        det = DriveDetunings.two_photon_resonant(0.0, delta02=0.45)
        assert det.delta02 == 0.45


class TestQutritParams:
    def test_transmon_ladder_values(self):
        q = QutritParams()
        assert q.anharmonicity == 1.0
        assert q.omega02 == 19.0

    def test_inverted_ladder_rejected(self):
        with pytest.raises(ValueError):
            QutritParams(omega01=9.0, omega12=10.0)


class TestEffectiveHamiltonian:
    def test_reduces_to_rwa_without_two_photon_terms(self):
        det = DriveDetunings(0.1, -0.1, 0.5)
        h_rwa = build_rwa_hamiltonian(0.2, 0.3, det)
        h_eff = build_effective_hamiltonian(
            0.2, 0.3, 0.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), det
        )
        np.testing.assert_allclose(h_eff, h_rwa, atol=1e-16)

    def test_effective_coupling_and_shifts_enter_where_expected(self):
        det = DriveDetunings(0.1, -0.1, 0.5)
        eps = (0.01, -0.02, 0.01)
        phases = (0.3, -0.2, 0.7)
        h = build_effective_hamiltonian(0.2, 0.3, 0.05, eps, phases, det)
        np.testing.assert_array_equal(h, h.conj().T)
        assert h[0, 2] == pytest.approx(0.5 * 0.05 * np.exp(1j * 0.7), abs=1e-15)
        assert h[0, 1] == pytest.approx(0.5 * 0.2 * np.exp(1j * 0.3), abs=1e-15)
        assert h[1, 2] == pytest.approx(0.5 * 0.3 * np.exp(1j * -0.2), abs=1e-15)
        np.testing.assert_allclose(
            np.real(np.diag(h)), [0.01, 0.1 - 0.02, 0.1 - 0.1 + 0.01], atol=1e-15
        )


class TestCarrierHamiltonian:
    def test_hermitian_at_random_times(self):
        tones = (
            DriveTone("01", lambda t: 0.05, 0.0),
            DriveTone("02", lambda t: 0.1 * np.exp(0.2j), 0.5),
        )
        rng = np.random.default_rng(14)
        for t in rng.uniform(-100, 100, 25):
            h = build_carrier_hamiltonian(tones, QutritParams(), float(t))
            np.testing.assert_allclose(h, h.conj().T, atol=1e-16)

    def test_two_photon_tone_couples_both_ladder_steps(self):
        """One 0-2 tone drives 0-1 at rate delta02 and 1-2 at delta02 - Delta.

        The phases of the matrix elements must rotate at those detunings,
        with the 1-2 element carrying the transmon weight lambda.
        """
        lam = math.sqrt(2.0)
        q = QutritParams(lam=lam)
        tones = (DriveTone("02", lambda t: 0.1, 0.45),)
        h0 = build_carrier_hamiltonian(tones, q, 0.0)
        h1 = build_carrier_hamiltonian(tones, q, 0.7)
        assert abs(h0[0, 1]) == pytest.approx(0.05, abs=1e-15)
        assert abs(h0[1, 2]) == pytest.approx(lam * 0.05, abs=1e-15)
        assert h0[0, 2] == 0.0
        rate01 = np.angle(h1[0, 1] / h0[0, 1]) / 0.7
        rate12 = np.angle(h1[1, 2] / h0[1, 2]) / 0.7
        assert abs(rate01) == pytest.approx(0.45, abs=1e-12)
        assert abs(rate12) == pytest.approx(1.0 - 0.45, abs=1e-12)
        assert rate01 == pytest.approx(-rate12 - 0.1, abs=1.0)  # opposite sides of Delta

    def test_resonant_carrier_pi_flip(self):
        """A resonant 0-1 tone of area pi inverts |0> -> |1>."""
        omega = 0.05
        tones = (DriveTone("01", lambda t: omega, 0.0),)

        def h(t):
            return build_carrier_hamiltonian(tones, QutritParams(), t)

        traj = integrate(
            h,
            basis_state(0),
            (0.0, math.pi / omega),
            IntegratorConfig(rel_tol=1e-10, abs_tol=1e-12),
        )
        assert traj.final_populations()[1] == pytest.approx(1.0, abs=1e-8)

    def test_two_photon_rabi_matches_effective_coupling(self):
        """Carrier two-photon oscillation vs |Omega_eff| = m^2 / (2 delta02).

        lam = 1 keeps the 0-2 resonance unshifted (the level-0 and level-2
        Stark shifts cancel), so the first |2> maximum of the carrier run
        should land at pi / |Omega_eff| within a few percent; the residue
        is the counter-rotating correction of order (m / delta02)^2.
        """
        m = 0.1
        q = QutritParams(lam=1.0)
        tones = (DriveTone("02", lambda t: m, 0.5),)

        def h(t):
            return build_carrier_hamiltonian(tones, q, t)

        t_pi = math.pi / (m**2 / (2 * 0.5))
        traj = integrate(
            h,
            basis_state(0),
            (0.0, 1.35 * t_pi),
            IntegratorConfig(rel_tol=1e-9, abs_tol=1e-11, max_step=0.5,
                             sample_stride=1.0),
        )
        p2 = traj.populations()[:, 2]
        k = int(np.argmax(p2))
        assert p2[k] > 0.9
        assert traj.times[k] == pytest.approx(t_pi, rel=0.05)
