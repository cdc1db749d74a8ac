"""Fine-structure eraser: fixed quarter-waveplates plus rotating half-waveplates.

Time-domain picture
    The XX photon passes a quarter-waveplate at -pi/4 and the X photon one at
    +pi/4, turning (|HH> + e^{-i phi}|VV>)/sqrt2 into
    (|LR> + e^{-i phi}|RL>)/sqrt2. Each photon then crosses a half-waveplate
    spinning at ``omega``. The plate angle seen by a photon is set by the
    time it passes: the XX photon at ``t_xx`` and the X photon a delay ``t``
    later. With omega = delta/(4 hbar) the relative phase cancels for every
    ``t`` and every ``t_xx``.

Frequency-domain picture
    A spinning half-waveplate turns R into L raised by 2 hbar omega and L
    into R lowered by the same amount. Frequency tags are carried as angular
    detunings (rad/ns) so that the compensating shift closes the which-path
    gap exactly in floating point; ``detuning_ueV`` converts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cascade import HBAR, CascadeParams, Emission, cascade_emission, psi
from .polarization import (
    Basis,
    apply_local,
    basis_ket,
    bell_state,
    jones_hwp,
    jones_qwp,
)

XI = bell_state("RL", "LR")
QWP_XX = jones_qwp(-np.pi / 4)
QWP_X = jones_qwp(np.pi / 4)

_CIRCULAR = (Basis.R, Basis.L)


def compensating_omega(delta: float) -> float:
    """Plate angular frequency (rad/ns) that erases a splitting ``delta`` (ueV)."""
    return delta / (4 * HBAR)


def rf_frequency(delta: float) -> float:
    """Drive frequency f = delta/(8 pi hbar) in MHz for a splitting in ueV."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return delta / (8 * np.pi * HBAR) * 1e3


def qwp_pair_transform(state) -> np.ndarray:
    return apply_local(QWP_XX, QWP_X, state)


def rotating_hwp(t, omega: float, angle0: float = 0.0) -> np.ndarray:
    """Jones matrix of a half-waveplate at angle ``angle0 + omega t``."""
    return jones_hwp(angle0 + omega * t)


def erase(t: float, params: CascadeParams, omega: float | None = None, t_xx: float = 0.0) -> np.ndarray:
    """Two-photon state after the full eraser for an X delay ``t``.

    ``t_xx`` is the time the XX photon crosses its plate; the X photon
    crosses at ``t_xx + t``. The default ``omega`` is the compensating one.
    """
    if omega is None:
        omega = compensating_omega(params.delta)
    phi = qwp_pair_transform(psi(t, params.delta))
    return apply_local(rotating_hwp(t_xx, omega), rotating_hwp(t_xx + t, omega), phi)


def erased_emission(params: CascadeParams, omega: float | None = None, t_xx: float = 0.0) -> Emission:
    """Eraser output as a frequency comb over the X delay.

    The X plate multiplies the circular components of the X photon by
    exp(-+2i omega s); each cascade line is split accordingly and then fed to
    the same convolution machinery as the bare cascade. At the compensating
    ``omega`` all surviving lines share one frequency, so the state is
    constant up to a global phase.
    """
    if omega is None:
        omega = compensating_omega(params.delta)
    src = cascade_emission(params.delta)
    a = rotating_hwp(t_xx, omega) @ QWP_XX
    vecs, freqs = [], []
    r, l = basis_ket(Basis.R), basis_ket(Basis.L)
    for v, nu in zip(src.vectors, src.frequencies):
        v = apply_local(a, QWP_X, v).reshape(2, 2)
        # X plate at angle omega (t_xx + s):
        # R -> e^{-2i omega (t_xx + s)} L (up-shift), L -> e^{+2i omega (t_xx + s)} R
        v_r = v @ r.conj() * np.exp(-2j * omega * t_xx)
        v_l = v @ l.conj() * np.exp(2j * omega * t_xx)
        vecs.append(np.kron(v_r, l))
        freqs.append(nu + 2 * omega)
        vecs.append(np.kron(v_l, r))
        freqs.append(nu - 2 * omega)
    return Emission(vecs, freqs)


@dataclass(frozen=True)
class FreqTaggedPhoton:
    """Single photon as modes ``(polarization, detuning rad/ns, amplitude)``."""

    modes: tuple

    def __post_init__(self):
        modes = tuple((Basis(p), float(nu), complex(a)) for p, nu, a in self.modes)
        for p, _, _ in modes:
            if p not in _CIRCULAR:
                raise ValueError(f"modes must be circularly polarized, got {p.value}")
        keys = [(p, nu) for p, nu, _ in modes]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (polarization, detuning) mode")
        norm = sum(abs(a) ** 2 for _, _, a in modes)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"mode amplitudes have norm^2 {norm}, expected 1")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def single(cls, pol, detuning: float = 0.0) -> "FreqTaggedPhoton":
        return cls(((pol, detuning, 1.0),))

    @property
    def detuning_ueV(self) -> tuple:
        return tuple(HBAR * nu for _, nu, _ in self.modes)

    def field(self, t) -> np.ndarray:
        """Time-domain Jones vector(s) sum_m a_m e^{-i nu_m t} |pol_m>."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (2,), dtype=complex)
        for p, nu, a in self.modes:
            out += (a * np.exp(-1j * nu * t))[..., None] * basis_ket(p)
        return out


def shift_photon(p: FreqTaggedPhoton, omega: float, angle0: float = 0.0) -> FreqTaggedPhoton:
    """Pass a photon through a half-waveplate spinning at ``omega``.

    R modes become L modes raised by 2 omega, L modes become R modes lowered
    by 2 omega. The phase exp(-+2i angle0) from the plate's starting angle is
    kept so that ``shift_photon(p).field(t)`` equals
    ``rotating_hwp(t, omega, angle0) @ p.field(t)``.
    """
    out = []
    for pol, nu, a in p.modes:
        if pol is Basis.R:
            out.append((Basis.L, nu + 2 * omega, a * np.exp(-2j * angle0)))
        else:
            out.append((Basis.R, nu - 2 * omega, a * np.exp(2j * angle0)))
    return FreqTaggedPhoton(tuple(out))


def _circular_label(v) -> Basis:
    for b in _CIRCULAR:
        if abs(np.vdot(basis_ket(b), v)) > 1 - 1e-9:
            return b
    raise ValueError("vector is not circularly polarized")


def decay_paths(params: CascadeParams) -> dict:
    """XX and X photons of both decay paths after the quarter-waveplates.

    The X level is split by delta around line centre: the photon pair of the
    H path carries X at -delta/2 and XX at +delta/2, the V path the opposite
    (the V path's X photon is the one whose phase runs as e^{-i delta t/hbar}).
    Returns ``{"H": (xx, x), "V": (xx, x)}``.
    """
    half = params.precession / 2
    paths = {}
    for name, sign in (("H", -1.0), ("V", 1.0)):
        h = basis_ket(Basis(name))
        xx = FreqTaggedPhoton.single(_circular_label(QWP_XX @ h), -sign * half)
        x = FreqTaggedPhoton.single(_circular_label(QWP_X @ h), sign * half)
        paths[name] = (xx, x)
    return paths


def which_path_distinguishability(params: CascadeParams, omega: float, arm: str = "x") -> float:
    """Detuning gap (ueV) between the two decay paths after the rotating plate.

    ``arm`` selects the X photon (default), the XX photon, or ``"both"``
    (the larger of the two gaps).
    """
    paths = decay_paths(params)
    gaps = {}
    for k, name in enumerate(("xx", "x")):
        nu_h = shift_photon(paths["H"][k], omega).modes[0][1]
        nu_v = shift_photon(paths["V"][k], omega).modes[0][1]
        gaps[name] = HBAR * abs(nu_h - nu_v)
    if arm == "both":
        return max(gaps.values())
    return gaps[arm]
