import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qderaser.cascade import HBAR, CascadeParams, DetectorModel, psi, rho_of_t
from qderaser.eraser import (
    XI,
    FreqTaggedPhoton,
    compensating_omega,
    decay_paths,
    erase,
    erased_emission,
    qwp_pair_transform,
    rf_frequency,
    rotating_hwp,
    shift_photon,
    which_path_distinguishability,
)
from qderaser.polarization import (
    Basis,
    apply_local,
    basis_ket,
    concurrence,
    jones_hwp,
    same_up_to_phase,
    two_photon,
)

s2 = 1 / np.sqrt(2)


def overlap(a, b):
    return abs(np.vdot(a, b))


class TestQuarterWave:
    def test_t0(self):
        assert same_up_to_phase(qwp_pair_transform(psi(0, 7.0)), XI)

    def test_degenerate(self):
        for t in (0.3, 5.0):
            assert same_up_to_phase(qwp_pair_transform(psi(t, 0.0)), XI)

    def test_half_period(self):
        delta = 4.0
        out = qwp_pair_transform(psi(np.pi * HBAR / delta, delta))
        assert same_up_to_phase(out, (two_photon("LR") - two_photon("RL")) * s2)

    def test_general_phase(self):
        delta, t = 6.0, 0.77
        phase = np.exp(-1j * delta * t / HBAR)
        want = (two_photon("LR") + phase * two_photon("RL")) * s2
        assert same_up_to_phase(qwp_pair_transform(psi(t, delta)), want)


class TestRotatingPlate:
    def test_t0(self):
        assert np.array_equal(rotating_hwp(0.0, 3.0), jones_hwp(0.0))

    def test_involution(self):
        j = rotating_hwp(0.4, 2.2)
        assert np.allclose(j @ j, np.eye(2))

    def test_quarter_turn(self):
        omega = 1.0
        t = np.pi / 4 / omega
        out = rotating_hwp(t, omega) @ basis_ket(Basis.R)
        assert overlap(basis_ket(Basis.L), out) == pytest.approx(1)
        assert np.vdot(basis_ket(Basis.L), out) == pytest.approx(-1j)  # e^{-i pi/2}

    def test_unitary(self):
        for t in np.linspace(0, 3, 7):
            j = rotating_hwp(t, 1.7)
            assert np.max(np.abs(j.conj().T @ j - np.eye(2))) < 1e-12


class TestErase:
    def test_examples(self):
        p = CascadeParams(20.0)
        for t in (0.0, 0.13, 1.0, 7.3):
            assert overlap(XI, erase(t, p)) == pytest.approx(1, abs=1e-12)

    def test_degenerate(self):
        p = CascadeParams(0.0)
        assert same_up_to_phase(erase(0.5, p, omega=0.0), qwp_pair_transform(psi(0.5, 0.0)))

    def test_wrong_frequency_oscillates(self):
        p = CascadeParams(20.0)
        ts = np.linspace(0, 0.5, 200)
        fid = np.array([overlap(XI, erase(t, p, omega=p.delta / (2 * HBAR))) ** 2 for t in ts])
        assert fid.min() < 0.01
        assert fid.max() > 0.99

    def test_same_instant_plates_do_not_erase(self):
        # both plates read at the same time leave the phase untouched
        p = CascadeParams(20.0)
        omega = compensating_omega(p.delta)
        t = 0.07
        j = rotating_hwp(t, omega)
        out = apply_local(j, j, qwp_pair_transform(psi(t, p.delta)))
        assert overlap(XI, out) ** 2 < 0.99

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 20), st.floats(0, 100), st.floats(-5, 5))
    def test_independent_of_times(self, t, delta, t_xx):
        p = CascadeParams(delta)
        out = erase(t, p, t_xx=t_xx)
        assert abs(overlap(XI, out) ** 2 - 1) < 1e-10
        assert overlap(erase(0.0, p, t_xx=t_xx), out) == pytest.approx(1, abs=1e-10)

    def test_erased_emission_matches_time_domain(self):
        p = CascadeParams(13.0)
        for omega in (None, 2.0):
            em = erased_emission(p, omega=omega, t_xx=0.4)
            for t in (0.0, 0.3, 2.1):
                assert np.allclose(em.ket(t), erase(t, p, omega=omega, t_xx=0.4), atol=1e-12)

    def test_erased_emission_is_constant(self):
        p = CascadeParams(13.0)
        em = erased_emission(p)
        assert same_up_to_phase(em.ket(0.0), em.ket(3.7))
        assert same_up_to_phase(em.ket(0.0), XI)

    def test_erased_density_entangled(self):
        p = CascadeParams(13.0)
        rho, _ = rho_of_t(1.0, p, DetectorModel(1.0), emission=erased_emission(p))
        assert concurrence(rho) == pytest.approx(1, abs=1e-9)


class TestFrequencyPicture:
    def test_validation(self):
        with pytest.raises(ValueError):
            FreqTaggedPhoton(((Basis.H, 0.0, 1.0),))
        with pytest.raises(ValueError):
            FreqTaggedPhoton(((Basis.R, 0.0, 0.5),))
        with pytest.raises(ValueError):
            FreqTaggedPhoton(((Basis.R, 0.0, s2), (Basis.R, 0.0, s2)))

    def test_up_conversion(self):
        omega = 5.0 / (2 * HBAR)
        out = shift_photon(FreqTaggedPhoton.single(Basis.R), omega)
        (pol, _, amp), = out.modes
        assert pol is Basis.L
        assert out.detuning_ueV[0] == pytest.approx(5.0)
        assert abs(amp) == pytest.approx(1)

    def test_zero_omega_flips_only(self):
        p = FreqTaggedPhoton(((Basis.R, 1.5, s2), (Basis.L, -2.0, 1j * s2)))
        out = shift_photon(p, 0.0)
        assert [(m[0], m[1]) for m in out.modes] == [(Basis.L, 1.5), (Basis.R, -2.0)]

    def test_two_mode_superposition(self):
        delta = 10.0
        half = delta / 2 / HBAR
        p = FreqTaggedPhoton(((Basis.R, half, s2), (Basis.L, -half, s2)))
        out = shift_photon(p, compensating_omega(delta))
        assert [m[0] for m in out.modes] == [Basis.L, Basis.R]
        assert out.detuning_ueV == pytest.approx((delta, -delta))
        assert sum(abs(m[2]) ** 2 for m in out.modes) == pytest.approx(1)

    @pytest.mark.parametrize("angle0", [0.0, 0.3])
    def test_time_domain_equivalence(self, angle0):
        p = FreqTaggedPhoton(((Basis.R, 1.1, 0.6), (Basis.L, -0.4, 0.8j)))
        omega = 2.3
        out = shift_photon(p, omega, angle0)
        for t in np.linspace(-1, 2, 9):
            want = rotating_hwp(t, omega, angle0) @ p.field(t)
            assert np.allclose(out.field(t), want, atol=1e-12)

    def test_paths(self):
        paths = decay_paths(CascadeParams(10.0))
        (xx_h, x_h), (xx_v, x_v) = paths["H"], paths["V"]
        assert x_h.detuning_ueV[0] == pytest.approx(-5.0)
        assert x_v.detuning_ueV[0] == pytest.approx(5.0)
        assert {x_h.modes[0][0], x_v.modes[0][0]} == {Basis.R, Basis.L}
        assert {xx_h.modes[0][0], xx_v.modes[0][0]} == {Basis.R, Basis.L}

    def test_which_path_examples(self):
        p = CascadeParams(10.0)
        assert which_path_distinguishability(p, 0.0) == pytest.approx(10.0)
        assert which_path_distinguishability(p, p.delta / (8 * HBAR)) == pytest.approx(5.0)

    @settings(max_examples=300, deadline=None)
    @given(st.one_of(st.just(0.0), st.floats(1e-300, 1000)))
    def test_compensated_gap_exactly_zero(self, delta):
        # exactness relies on delta/(4 hbar) staying a normal float
        p = CascadeParams(delta)
        omega = delta / (4 * HBAR)
        for arm in ("x", "xx", "both"):
            assert which_path_distinguishability(p, omega, arm) == 0.0


class TestRF:
    def test_examples(self):
        assert rf_frequency(10.0) == pytest.approx(604.5, abs=0.1)
        assert rf_frequency(0.0) == 0.0
        assert rf_frequency(1.0) == pytest.approx(60.45, abs=0.01)

    def test_omega_consistency(self):
        delta = 7.0
        assert 2 * np.pi * rf_frequency(delta) * 1e-3 == pytest.approx(compensating_omega(delta), rel=1e-12)

    def test_negative(self):
        with pytest.raises(ValueError):
            rf_frequency(-1.0)
