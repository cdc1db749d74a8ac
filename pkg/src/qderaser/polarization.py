"""Polarization algebra for one- and two-photon states.

Kets and operators are plain numpy arrays. Single-photon kets live in the
{H, V} basis; two-photon kets use the ordering [HH, HV, VH, VV] with the
first factor being the biexciton (XX) photon and the second the exciton (X)
photon.

Circular convention (used everywhere in the package)::

    D = (H + V)/sqrt(2)     A = (H - V)/sqrt(2)
    R = (H - iV)/sqrt(2)    L = (H + iV)/sqrt(2)
"""
from __future__ import annotations

from enum import Enum

import numpy as np

HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-10
EIGENVALUE_FLOOR = -1e-10
PHASE_ATOL = 1e-10
EIGENVALUE_CUTOFF = 1e-14  # relative; treated as exact zeros in concurrence


class Basis(str, Enum):
    H = "H"
    V = "V"
    D = "D"
    A = "A"
    R = "R"
    L = "L"


BASIS_ORDER = (Basis.H, Basis.V, Basis.D, Basis.A, Basis.R, Basis.L)

# orthogonal pairs, one per measurement setting of a single arm
BASIS_PAIRS = ((Basis.H, Basis.V), (Basis.D, Basis.A), (Basis.R, Basis.L))

_S2 = 1.0 / np.sqrt(2.0)
_KETS = {
    Basis.H: np.array([1.0, 0.0], dtype=complex),
    Basis.V: np.array([0.0, 1.0], dtype=complex),
    Basis.D: np.array([_S2, _S2], dtype=complex),
    Basis.A: np.array([_S2, -_S2], dtype=complex),
    Basis.R: np.array([_S2, -1j * _S2], dtype=complex),
    Basis.L: np.array([_S2, 1j * _S2], dtype=complex),
}

SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(SIGMA_Y, SIGMA_Y)


class InvalidDensityMatrix(ValueError):
    """Raised when a matrix violates the Hermitian / unit-trace / PSD contract."""


def basis_ket(b) -> np.ndarray:
    """Unit ket of a measurement basis state, e.g. ``basis_ket("R")``."""
    return _KETS[Basis(b)].copy()


def projector(i, j) -> np.ndarray:
    """Two-photon product ket |ij> = |i> (x) |j>."""
    return np.kron(_KETS[Basis(i)], _KETS[Basis(j)])


# the 36 product kets, shape (6, 6, 4), indexed like BASIS_ORDER
PROJECTORS = np.array([[projector(i, j) for j in BASIS_ORDER] for i in BASIS_ORDER])


def two_photon(label: str) -> np.ndarray:
    """Product ket from a two-letter label such as ``"RL"``."""
    if len(label) != 2:
        raise ValueError(f"expected two basis letters, got {label!r}")
    return projector(label[0], label[1])


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("cannot normalize the zero vector")
    return v / norm


def bell_state(a: str, b: str, sign: int = 1) -> np.ndarray:
    """(|a> + sign |b>)/sqrt(2) for two-letter labels ``a`` and ``b``."""
    return normalize(two_photon(a) + sign * two_photon(b))


PHI_PLUS = bell_state("HH", "VV")


def same_up_to_phase(a, b, atol: float = PHASE_ATOL) -> bool:
    """True if two unit kets differ only by a global phase."""
    return abs(np.vdot(a, b)) >= 1.0 - atol


def density(ket) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def check_density(rho, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate a 4x4 density matrix and return it as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidDensityMatrix(f"expected a 4x4 matrix, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > atol:
        raise InvalidDensityMatrix(f"matrix is not Hermitian (residual {herm:.3g})")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_ATOL:
        raise InvalidDensityMatrix(f"trace is {tr!r}, expected 1")
    lmin = np.linalg.eigvalsh(rho).min()
    if lmin < EIGENVALUE_FLOOR:
        raise InvalidDensityMatrix(f"negative eigenvalue {lmin:.3g}")
    return rho


def concurrence_many(rhos: np.ndarray) -> np.ndarray:
    """Wootters concurrence of a stack of physical density matrices.

    The Wootters lambdas are the singular values of W^T (Y x Y) W where
    rho = W W^dagger comes from the eigendecomposition. Eigenvalues at the
    roundoff level are dropped first: concurrence grows like the square root
    of a small admixture, so 1e-17 of noise would otherwise show up as 1e-9.
    No validation is done here; see :func:`concurrence`.
    """
    rhos = np.asarray(rhos, dtype=complex)
    w, v = np.linalg.eigh(rhos)
    cutoff = EIGENVALUE_CUTOFF * np.max(np.abs(w), axis=-1, keepdims=True)
    w = np.where(w > cutoff, w, 0.0)
    wv = v * np.sqrt(w)[..., None, :]
    tau = np.swapaxes(wv, -1, -2) @ _YY @ wv
    lam = np.linalg.svd(tau, compute_uv=False)
    c = lam[..., 0] - lam[..., 1] - lam[..., 2] - lam[..., 3]
    return np.clip(c, 0.0, 1.0)


def concurrence(rho) -> float:
    """Concurrence of a two-qubit density matrix, in [0, 1].

    Raises
    ------
    InvalidDensityMatrix
        If ``rho`` is not Hermitian, not unit trace or not positive.
    """
    rho = check_density(rho)
    return float(concurrence_many(rho[None])[0])


def fidelity(rho, target) -> float:
    """Overlap <target|rho|target>, clamped to [0, 1]."""
    rho = check_density(rho)
    target = np.asarray(target, dtype=complex)
    f = np.vdot(target, rho @ target).real
    return float(min(max(f, 0.0), 1.0))


def purity(rho) -> float:
    rho = np.asarray(rho, dtype=complex)
    return float(np.trace(rho @ rho).real)


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def jones_hwp(theta: float) -> np.ndarray:
    """Half-waveplate with its fast axis at ``theta`` from horizontal.

    In the circular basis this maps R -> exp(-2i theta) L and
    L -> exp(+2i theta) R.
    """
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=complex)


def jones_qwp(theta: float) -> np.ndarray:
    """Quarter-waveplate with its fast axis at ``theta``; diag(1, i) at 0.

    With this phase choice two quarter-waveplates at the same angle compose
    to exactly ``jones_hwp(theta)``.
    """
    return _rotation(theta) @ np.diag([1.0, 1j]) @ _rotation(-theta)


def apply_local(op_a, op_b, state) -> np.ndarray:
    """(op_a (x) op_b)|state>; ``op_a`` acts on the XX photon.

    ``state`` may be a stack of kets with the 4 components on the last axis.
    """
    return np.asarray(state, dtype=complex) @ np.kron(op_a, op_b).T
