"""Two-photon polarization tomography from the 36 projections {H,V,D,A,R,L}^2.

Reconstruction is an overcomplete linear least-squares inversion over a
real 16-parameter Hermitian basis (normalized Pauli products), followed by a
projection onto trace-one positive semidefinite matrices. With noiseless
rates the inversion is exact.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from itertools import product

import numpy as np

from .polarization import BASIS_ORDER, BASIS_PAIRS, PROJECTORS, Basis, check_density

_PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
# orthonormal Hermitian basis: Tr(G_a G_b) = delta_ab
HERMITIAN_BASIS = np.array([np.kron(a, b) / 2.0 for a, b in product(_PAULI, repeat=2)])

_INDEX = {b: k for k, b in enumerate(BASIS_ORDER)}
GROUPS = tuple(
    tuple((_INDEX[a], _INDEX[b]) for a in pa for b in pb) for pa, pb in product(BASIS_PAIRS, repeat=2)
)
CONSISTENCY_RTOL = 1e-6


class NotHermitian(ValueError):
    pass


class SingularDesign(AssertionError):
    pass


class ProjectionCSVError(ValueError):
    """Malformed projection table; ``row`` is the 1-based data row, if known."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class ProjectionConsistencyWarning(UserWarning):
    pass


def _design_matrix() -> np.ndarray:
    kets = PROJECTORS.reshape(36, 4)
    return np.einsum("pi,kij,pj->pk", kets.conj(), HERMITIAN_BASIS, kets).real


DESIGN = _design_matrix()
if np.linalg.matrix_rank(DESIGN) != 16:
    raise SingularDesign("36-projection design matrix is rank deficient")
_PINV = np.linalg.pinv(DESIGN)


@dataclass(frozen=True)
class ProjectionSet36:
    """Rates for all 36 ordered basis pairs (XX basis, X basis).

    ``rates`` is a 6x6 array indexed in ``BASIS_ORDER``; item access takes a
    pair such as ``p["H", "V"]``.
    """

    rates: np.ndarray

    def __post_init__(self):
        r = np.array(self.rates, dtype=float)
        if r.shape != (6, 6):
            raise ValueError(f"expected 6x6 rates, got shape {r.shape}")
        if np.any(~np.isfinite(r)) or np.any(r < 0):
            raise ValueError("rates must be finite and non-negative")
        r.setflags(write=False)
        object.__setattr__(self, "rates", r)

    def __getitem__(self, key) -> float:
        i, j = key
        return float(self.rates[_INDEX[Basis(i)], _INDEX[Basis(j)]])

    def items(self):
        for i, j in product(BASIS_ORDER, repeat=2):
            yield (i, j), self[i, j]

    @classmethod
    def from_mapping(cls, mapping) -> "ProjectionSet36":
        r = np.full((6, 6), np.nan)
        for (i, j), v in mapping.items():
            r[_INDEX[Basis(i)], _INDEX[Basis(j)]] = v
        if np.isnan(r).any():
            raise ValueError("mapping does not cover all 36 basis pairs")
        return cls(r)

    def group_sums(self) -> np.ndarray:
        return group_sums(self.rates)

    def total(self) -> float:
        return float(self.group_sums().mean())

    def max_group_deviation(self) -> float:
        sums = self.group_sums()
        mean = sums.mean()
        return float(np.max(np.abs(sums - mean)) / mean) if mean > 0 else 0.0


def group_sums(rates: np.ndarray) -> np.ndarray:
    """Sums over the 9 complete 4-projector groups; shape ``(..., 9)``."""
    rates = np.asarray(rates)
    return np.stack([sum(rates[..., a, b] for a, b in g) for g in GROUPS], axis=-1)


def measure_projections(rho, total: float = 1.0) -> ProjectionSet36:
    """Rates ``total * <ij|rho|ij>`` for every basis pair."""
    rho = np.asarray(rho, dtype=complex)
    r = np.einsum("abi,ij,abj->ab", PROJECTORS.conj(), rho, PROJECTORS).real
    return ProjectionSet36(total * np.clip(r, 0.0, None))


def linear_reconstruct_many(rates: np.ndarray) -> np.ndarray:
    """Least-squares Hermitian matrices for a stack of (..., 6, 6) rates."""
    rates = np.asarray(rates, dtype=float)
    total = group_sums(rates).mean(axis=-1)
    if np.any(total <= 0):
        raise ValueError("projection rates sum to zero")
    probs = rates.reshape(rates.shape[:-2] + (36,)) / total[..., None]
    coeffs = probs @ _PINV.T
    raw = (coeffs.astype(complex) @ HERMITIAN_BASIS.reshape(16, 16)).reshape(coeffs.shape[:-1] + (4, 4))
    tr = np.trace(raw, axis1=-2, axis2=-1).real
    return raw / tr[..., None, None]


def linear_reconstruct(p: ProjectionSet36) -> np.ndarray:
    dev = p.max_group_deviation()
    if dev > CONSISTENCY_RTOL:
        warnings.warn(
            f"projection groups disagree by {dev:.3g} relative", ProjectionConsistencyWarning, stacklevel=2
        )
    return linear_reconstruct_many(p.rates)


def _simplex_projection(w: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row of ``w`` onto the probability simplex."""
    u = np.sort(w, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1) - 1.0
    k = np.arange(1, w.shape[-1] + 1)
    cond = u - css / k > 0
    # cond is true on a leading run; the last true index sets the shift
    r = cond.shape[-1] - 1 - np.argmax(cond[..., ::-1], axis=-1)
    shift = np.take_along_axis(css, r[..., None], axis=-1) / (r[..., None] + 1)
    return np.clip(w - shift, 0.0, None)


def project_physical_many(raw: np.ndarray, return_eig: bool = False):
    """Nearest (Frobenius) trace-one PSD matrices for a stack of Hermitian inputs."""
    raw = np.asarray(raw, dtype=complex)
    herm = 0.5 * (raw + np.swapaxes(raw.conj(), -1, -2))
    w, v = np.linalg.eigh(herm)
    w = _simplex_projection(w)
    rho = (v * w[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)
    rho = 0.5 * (rho + np.swapaxes(rho.conj(), -1, -2))
    if return_eig:
        return rho, w, v
    return rho


def project_physical(raw) -> np.ndarray:
    """Nearest density matrix to a (numerically) Hermitian 4x4 matrix.

    Eigenvalues are projected onto the probability simplex, which for an
    input whose spectrum is already non-negative with unit sum is the
    identity.
    """
    raw = np.asarray(raw, dtype=complex)
    resid = np.max(np.abs(raw - raw.conj().T))
    if resid > 1e-8:
        raise NotHermitian(f"symmetrization residual {resid:.3g} exceeds 1e-8")
    return project_physical_many(raw)


def reconstruct(p: ProjectionSet36) -> np.ndarray:
    """Density matrix reconstructed from the 36 projection rates."""
    rho = project_physical(linear_reconstruct(p))
    return check_density(rho)


def reconstruct_many(rates: np.ndarray) -> np.ndarray:
    return project_physical_many(linear_reconstruct_many(rates))


def write_projection_csv(path, p: ProjectionSet36, header_lines=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["basis_xx", "basis_x", "rate"])
        for (i, j), v in p.items():
            w.writerow([i.value, j.value, f"{v:.17g}"])


def read_projection_csv(path) -> ProjectionSet36:
    """Parse a ``basis_xx,basis_x,rate`` table; ``#`` lines are comments."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.reader(lines)
    try:
        head = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ProjectionCSVError("file is empty") from None
    if head != ["basis_xx", "basis_x", "rate"]:
        raise ProjectionCSVError(f"unexpected header {head}", row=0)
    seen = {}
    for n, row in enumerate(reader, start=1):
        if len(row) != 3:
            raise ProjectionCSVError(f"expected 3 fields, got {len(row)}", row=n)
        a, b, v = (x.strip() for x in row)
        try:
            key = (Basis(a), Basis(b))
        except ValueError:
            raise ProjectionCSVError(f"unknown basis symbol in {a!r},{b!r}", row=n) from None
        try:
            rate = float(v)
        except ValueError:
            raise ProjectionCSVError(f"rate {v!r} is not a number", row=n) from None
        if not np.isfinite(rate) or rate < 0:
            raise ProjectionCSVError(f"rate {v} must be finite and non-negative", row=n)
        if key in seen:
            raise ProjectionCSVError(f"duplicate basis pair {a}{b}", row=n)
        seen[key] = rate
    missing = [f"{i.value}{j.value}" for i, j in product(BASIS_ORDER, repeat=2) if (i, j) not in seen]
    if missing:
        raise ProjectionCSVError(f"missing basis pairs: {', '.join(missing)}")
    return ProjectionSet36.from_mapping(seen)
