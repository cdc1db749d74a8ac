import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_density
from qderaser.cascade import HBAR, CascadeParams, DetectorModel, convolved_rates, psi, rho_of_t
from qderaser.polarization import PHI_PLUS, concurrence, density, two_photon
from qderaser.eraser import XI
from qderaser.tomography import (
    DESIGN,
    GROUPS,
    NotHermitian,
    ProjectionConsistencyWarning,
    ProjectionCSVError,
    ProjectionSet36,
    linear_reconstruct,
    measure_projections,
    project_physical,
    read_projection_csv,
    reconstruct,
    write_projection_csv,
)

seeds = st.integers(0, 2**32 - 1)


def test_design_full_rank():
    assert DESIGN.shape == (36, 16)
    assert np.linalg.matrix_rank(DESIGN) == 16
    assert len(GROUPS) == 9


class TestMeasure:
    def test_hh(self):
        p = measure_projections(density(two_photon("HH")))
        assert p["H", "H"] == pytest.approx(1)
        assert p["H", "V"] == pytest.approx(0)
        assert p["D", "D"] == pytest.approx(0.25)

    def test_mixed(self):
        p = measure_projections(np.eye(4) / 4, total=3.0)
        assert np.allclose(p.rates, 0.75)

    def test_bell(self):
        p = measure_projections(density(PHI_PLUS), total=2.0)
        assert p["D", "D"] == pytest.approx(1.0)
        assert p["A", "A"] == pytest.approx(1.0)
        assert p["D", "A"] == pytest.approx(0.0, abs=1e-15)

    def test_group_sums(self, rng):
        p = measure_projections(random_density(rng), total=5.0)
        assert np.allclose(p.group_sums(), 5.0)
        assert p.total() == pytest.approx(5.0)
        assert p.max_group_deviation() < 1e-14

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            ProjectionSet36(-np.ones((6, 6)))


class TestLinear:
    def test_round_trip(self, rng):
        for _ in range(50):
            rho = random_density(rng)
            assert np.allclose(linear_reconstruct(measure_projections(rho)), rho, atol=1e-10)

    def test_all_equal(self):
        raw = linear_reconstruct(ProjectionSet36(np.full((6, 6), 7.0)))
        assert np.allclose(raw, np.eye(4) / 4, atol=1e-14)

    def test_quarter_period_coherence(self):
        delta = 2.0
        t = np.pi / 2 * HBAR / delta
        raw = linear_reconstruct(measure_projections(density(psi(t, delta))))
        # (|HH> + e^{-i pi/2}|VV>)/sqrt2 -> rho_{HH,VV} = conj(-i)/2 = i/2
        assert raw[0, 3] == pytest.approx(0.5j, abs=1e-12)

    def test_inconsistent_warns(self):
        r = measure_projections(np.eye(4) / 4).rates.copy()
        r[0, 0] *= 1.5
        with pytest.warns(ProjectionConsistencyWarning):
            linear_reconstruct(ProjectionSet36(r))

    def test_consistent_silent(self, rng):
        p = measure_projections(random_density(rng))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            linear_reconstruct(p)


class TestProjectPhysical:
    def test_identity_on_physical(self, rng):
        rho = random_density(rng)
        assert np.max(np.abs(project_physical(rho) - rho)) < 1e-12

    def test_clip_example(self):
        out = project_physical(np.diag([1.5, -0.5, 0, 0]))
        assert np.allclose(out, np.diag([1, 0, 0, 0]), atol=1e-15)

    def test_tiny_negative(self, rng):
        u, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        w = np.array([0.6, 0.4 + 1e-12, 0.0, -1e-12])
        raw = (u * w) @ u.conj().T
        out = project_physical(raw)
        assert np.linalg.eigvalsh(out).min() >= -1e-15
        assert np.linalg.norm(out - raw) < 1e-11

    def test_not_hermitian(self):
        raw = np.eye(4, dtype=complex) / 4
        raw[0, 1] = 1e-6
        with pytest.raises(NotHermitian):
            project_physical(raw)


class TestReconstruct:
    def test_round_trip_many(self, rng):
        worst = max(np.linalg.norm(reconstruct(measure_projections(rho, rng.uniform(0.1, 10))) - rho)
                    for rho in (random_density(rng) for _ in range(1000)))
        assert worst < 1e-9

    def test_bell_states(self):
        assert concurrence(reconstruct(measure_projections(density(XI)))) == pytest.approx(1, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(seeds, st.floats(1e-6, 1e6))
    def test_scale_invariance(self, seed, k):
        rates = np.random.default_rng(seed).uniform(0, 1, (6, 6))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProjectionConsistencyWarning)
            a = reconstruct(ProjectionSet36(rates))
            b = reconstruct(ProjectionSet36(rates * k))
        assert np.max(np.abs(a - b)) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(seeds)
    def test_always_physical(self, seed):
        rng = np.random.default_rng(seed)
        rates = rng.uniform(0, 1, (6, 6)) * (rng.uniform(size=(6, 6)) > 0.3)
        rates[0, 0] += 0.1
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProjectionConsistencyWarning)
            rho = reconstruct(ProjectionSet36(rates))
        assert np.max(np.abs(rho - rho.conj().T)) < 1e-12
        assert np.trace(rho).real == pytest.approx(1, abs=1e-12)
        assert np.linalg.eigvalsh(rho).min() >= -1e-10

    @pytest.mark.parametrize("tau,t", [(0.02, 0.5), (0.3, 2.0), (1.0, -0.2), (1.0, 4.0)])
    def test_matches_direct_density(self, tau, t):
        params, det = CascadeParams.from_ghz(1.0), DetectorModel(tau)
        rates = convolved_rates(t, params, det)
        rho, total = rho_of_t(t, params, det)
        p = ProjectionSet36(rates)
        assert p.total() == pytest.approx(total, rel=1e-12)
        assert np.max(np.abs(reconstruct(p) - rho)) < 1e-9


class TestCSV:
    def test_round_trip(self, tmp_path, rng):
        p = measure_projections(random_density(rng), total=2.5)
        path = tmp_path / "p.csv"
        write_projection_csv(path, p, header_lines=["source = test"])
        q = read_projection_csv(path)
        assert np.array_equal(p.rates, q.rates)

    def _write(self, path, rows, head="basis_xx,basis_x,rate"):
        path.write_text("\n".join([head] + rows) + "\n")
        return path

    def _full(self):
        from qderaser.polarization import BASIS_ORDER
        return [f"{a.value},{b.value},0.25" for a in BASIS_ORDER for b in BASIS_ORDER]

    def test_missing_pair(self, tmp_path):
        rows = self._full()[:-1]
        with pytest.raises(ProjectionCSVError, match="missing basis pairs: LL"):
            read_projection_csv(self._write(tmp_path / "a.csv", rows))

    def test_negative_rate_row(self, tmp_path):
        rows = self._full()
        rows[4] = "H,R,-0.1"
        with pytest.raises(ProjectionCSVError) as err:
            read_projection_csv(self._write(tmp_path / "a.csv", rows))
        assert err.value.row == 5
        assert "row 5" in str(err.value)

    @pytest.mark.parametrize("bad,fragment", [
        ("H,Q,0.1", "unknown basis"),
        ("H,H,abc", "not a number"),
        ("H,H", "expected 3 fields"),
        ("H,H,0.25", "duplicate"),
    ])
    def test_bad_rows(self, tmp_path, bad, fragment):
        rows = self._full() + [bad]
        with pytest.raises(ProjectionCSVError, match=fragment):
            read_projection_csv(self._write(tmp_path / "a.csv", rows))

    def test_bad_header(self, tmp_path):
        with pytest.raises(ProjectionCSVError, match="header"):
            read_projection_csv(self._write(tmp_path / "a.csv", self._full(), head="a,b,c"))
