"""Biexciton-exciton cascade with fine-structure splitting and detector jitter.

Units: energies in ueV, times in ns, angular frequencies in rad/ns.

The emitted two-photon state is written as a finite frequency comb

    |Psi(s)> = sum_m  v_m exp(-i nu_m s)

where ``s`` is the delay of the X photon after the XX photon. For the bare
cascade the comb has two lines, |HH>/sqrt2 at 0 and |VV>/sqrt2 at
delta/hbar. Every term of |Psi><Psi| is then an exponential in ``s``, so its
convolution with the decay envelope and the Gaussian detector response has
the closed exponentially-modified-Gaussian form evaluated in
:func:`emg_kernel`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .polarization import BASIS_ORDER, PROJECTORS, Basis, projector

HBAR = 0.6582119569  # ueV ns
PLANCK = 4.135667696  # ueV ns, = 2 pi HBAR
FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))
RATE_FLOOR = 1e-12  # relative to n0 / tau_x

_BASIS_INDEX = {b: k for k, b in enumerate(BASIS_ORDER)}


class BelowRateFloor(ArithmeticError):
    """The convolved pair rate is too small to define a density matrix."""


def ghz_to_ueV(f_ghz):
    """Energy of a splitting quoted as an ordinary frequency, E = h f."""
    return PLANCK * np.asarray(f_ghz, dtype=float)


def ueV_to_ghz(e_ueV):
    return np.asarray(e_ueV, dtype=float) / PLANCK


@dataclass(frozen=True)
class CascadeParams:
    """FSS ``delta`` (ueV), exciton lifetime ``tau_x`` (ns), pair count ``n0``."""

    delta: float
    tau_x: float = 1.0
    n0: float = 1.0

    def __post_init__(self):
        if not self.tau_x > 0:
            raise ValueError(f"tau_x must be positive, got {self.tau_x}")
        if not self.delta >= 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")
        if not self.n0 > 0:
            raise ValueError(f"n0 must be positive, got {self.n0}")

    @classmethod
    def from_ghz(cls, f_ghz: float, tau_x: float = 1.0, n0: float = 1.0):
        return cls(float(ghz_to_ueV(f_ghz)), tau_x, n0)

    @property
    def precession(self) -> float:
        """Angular precession frequency delta/hbar in rad/ns."""
        return self.delta / HBAR

    @property
    def rate_floor(self) -> float:
        return RATE_FLOOR * self.n0 / self.tau_x


@dataclass(frozen=True)
class DetectorModel:
    """Gaussian timing response with full width at half maximum ``tau`` (ns)."""

    tau: float = 0.0

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError(f"tau must be non-negative, got {self.tau}")

    @property
    def sigma(self) -> float:
        return self.tau / FWHM_PER_SIGMA


@dataclass(frozen=True)
class Emission:
    """Two-photon state as a comb of kets ``vectors[m]`` at ``frequencies[m]``."""

    vectors: np.ndarray
    frequencies: np.ndarray

    def __post_init__(self):
        vecs = np.atleast_2d(np.asarray(self.vectors, dtype=complex))
        freqs = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        if vecs.shape[1] != 4 or vecs.shape[0] != freqs.shape[0]:
            raise ValueError("need one 4-component vector per frequency")
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "frequencies", freqs)

    def ket(self, s) -> np.ndarray:
        """State at delay(s) ``s``; shape ``s.shape + (4,)``."""
        s = np.asarray(s, dtype=float)
        phases = np.exp(-1j * s[..., None] * self.frequencies)
        return phases @ self.vectors


def cascade_emission(delta: float) -> Emission:
    s2 = 1.0 / np.sqrt(2.0)
    return Emission(
        [[s2, 0, 0, 0], [0, 0, 0, s2]],
        [0.0, delta / HBAR],
    )


def psi(t, delta: float) -> np.ndarray:
    """(|HH> + exp(-i delta t/hbar)|VV>)/sqrt2 at delay ``t``."""
    return cascade_emission(delta).ket(t)


def envelope(t, params: CascadeParams):
    """Pair rate n0/tau_x exp(-t/tau_x) for t >= 0, zero before."""
    t = np.asarray(t, dtype=float)
    safe = np.where(t >= 0, t, 0.0)
    out = np.where(t >= 0, params.n0 / params.tau_x * np.exp(-safe / params.tau_x), 0.0)
    return out if out.ndim else float(out)


def projection_rate(i, j, t, params: CascadeParams):
    """Ideal-detector correlation rate |<ij|Psi(t)>|^2 n(t)."""
    amp = psi(t, params.delta) @ projector(i, j).conj()
    out = np.abs(amp) ** 2 * envelope(t, params)
    return out if np.ndim(out) else float(out)


def emg_kernel(t, rate, sigma: float) -> np.ndarray:
    """Closed form of  int_0^inf g(t - s) exp(-rate s) ds.

    ``g`` is a unit-area Gaussian of standard deviation ``sigma`` and
    ``rate`` may be complex with positive real part. Evaluated through the
    scaled complementary error function (Faddeeva ``w``), switching to the
    reflected form for Re z < 0 so that nothing overflows.
    """
    t = np.asarray(t, dtype=float)
    rate = complex(rate)
    if sigma == 0:
        safe = np.where(t >= 0, t, 0.0)
        return np.where(t >= 0, np.exp(-rate * safe), 0.0).astype(complex)

    root2s = np.sqrt(2.0) * sigma
    z = (rate * sigma**2 - t) / root2s
    gauss = np.exp(-(t**2) / (2 * sigma**2))
    out = np.empty(np.shape(t), dtype=complex)
    pos = z.real >= 0
    if rate.imag == 0:
        scaled = lambda x: special.erfcx(x.real)  # noqa: E731
    else:
        scaled = lambda x: special.wofz(1j * x)  # noqa: E731
    out[pos] = 0.5 * gauss[pos] * scaled(z[pos])
    neg = ~pos
    tn = t[neg]
    out[neg] = np.exp(0.5 * rate**2 * sigma**2 - rate * tn) - 0.5 * gauss[neg] * scaled(-z[neg])
    return out


def emg_kernel_quad(t: float, rate, sigma: float) -> complex:
    """Adaptive-quadrature reference for :func:`emg_kernel` (scalar ``t``)."""
    rate = complex(rate)
    if sigma == 0:
        return complex(np.exp(-rate * t)) if t >= 0 else 0j
    norm = 1.0 / (np.sqrt(2 * np.pi) * sigma)

    def part(fn):
        def f(s):
            return norm * np.exp(-((t - s) ** 2) / (2 * sigma**2)) * fn(np.exp(-rate * s))
        return f

    lo = max(0.0, t - 40 * sigma)
    hi = max(lo, t + 40 * sigma)
    if hi <= 0:
        return 0j
    mid = min(max(t, lo), hi)
    # the Gaussian peak is a breakpoint; lo is the envelope's step
    pts = [p for p in (mid,) if lo < p < hi]
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=2000, points=pts or None)
    scale, _ = integrate.quad(part(np.abs), lo, hi, **opts)
    # oscillating parts are held to an absolute error against their modulus
    opts["epsabs"] = 1e-14 * scale
    re, _ = integrate.quad(part(np.real), lo, hi, **opts)
    im, _ = integrate.quad(part(np.imag), lo, hi, **opts)
    return complex(re, im)


def convolved_moment(t, params: CascadeParams, det: DetectorModel, emission: Emission | None = None):
    """Unnormalized detected density matrix  int g(t-s) n(s) |Psi(s)><Psi(s)| ds.

    Returns an array of shape ``t.shape + (4, 4)``; its trace is the
    convolved pair rate.
    """
    if emission is None:
        emission = cascade_emission(params.delta)
    t = np.asarray(t, dtype=float)
    vecs, freqs = emission.vectors, emission.frequencies
    scale = params.n0 / params.tau_x
    base = 1.0 / params.tau_x
    out = np.zeros(t.shape + (4, 4), dtype=complex)
    k = len(freqs)
    for m in range(k):
        for n in range(m, k):
            diff = freqs[m] - freqs[n]
            # exp(-i (nu_m - nu_n) s) => complex decay rate 1/tau_x + i diff
            kern = scale * emg_kernel(t, base + 1j * diff, det.sigma)
            if diff == 0:
                kern = kern.real.astype(complex)
            outer = np.outer(vecs[m], vecs[n].conj())
            out += kern[..., None, None] * outer
            if n != m:
                out += kern.conj()[..., None, None] * outer.conj().T
    return out


def convolved_envelope(t, params: CascadeParams, det: DetectorModel):
    """Envelope convolved with the detector response."""
    kern = emg_kernel(t, 1.0 / params.tau_x, det.sigma).real
    out = params.n0 / params.tau_x * kern
    return out if out.ndim else float(out)


def detected_fraction_before(t, params: CascadeParams, det: DetectorModel, weighting: str = "convolved"):
    """Fraction of the n0 pairs registered before time ``t``.

    The convolved weighting uses the exponentially-modified Gaussian CDF;
    ``"n"`` uses the bare exponential.
    """
    t = np.asarray(t, dtype=float)
    tau_x, sigma = params.tau_x, det.sigma
    if weighting == "n" or sigma == 0:
        out = np.where(t > 0, -np.expm1(-np.where(t > 0, t, 0.0) / tau_x), 0.0)
    else:
        shift = sigma / tau_x
        out = special.ndtr(t / sigma) - np.exp(-t / tau_x + 0.5 * shift**2) * special.ndtr(t / sigma - shift)
    return out if out.ndim else float(out)


def detected_fraction_after(t, params: CascadeParams, det: DetectorModel, weighting: str = "convolved"):
    """Fraction of the n0 pairs registered after time ``t``."""
    t = np.asarray(t, dtype=float)
    tau_x, sigma = params.tau_x, det.sigma
    if weighting == "n" or sigma == 0:
        out = np.where(t > 0, np.exp(-np.where(t > 0, t, 0.0) / tau_x), 1.0)
    else:
        shift = sigma / tau_x
        out = special.ndtr(-t / sigma) + np.exp(-t / tau_x + 0.5 * shift**2) * special.ndtr(t / sigma - shift)
    return out if out.ndim else float(out)


def convolved_rates(t, params: CascadeParams, det: DetectorModel, emission: Emission | None = None):
    """All 36 detected rates m_ij(t); shape ``t.shape + (6, 6)``."""
    moment = convolved_moment(t, params, det, emission)
    p = PROJECTORS
    rates = np.einsum("abi,...ij,abj->...ab", p.conj(), moment, p).real
    return np.clip(rates, 0.0, None)


def convolved_rate(i, j, t, params: CascadeParams, det: DetectorModel):
    """Detected rate m_ij(t) = n_ij(t) * g(t) for one projection."""
    if det.tau == 0:
        return projection_rate(i, j, t, params)
    rates = convolved_rates(t, params, det)
    out = rates[..., _BASIS_INDEX[Basis(i)], _BASIS_INDEX[Basis(j)]]
    return out if np.ndim(out) else float(out)


def rho_of_t(t: float, params: CascadeParams, det: DetectorModel, emission: Emission | None = None):
    """Normalized detected density matrix and the convolved pair rate at ``t``.

    Raises
    ------
    BelowRateFloor
        If the convolved rate is below ``params.rate_floor``.
    """
    moment = convolved_moment(float(t), params, det, emission)
    total = float(np.trace(moment).real)
    if total < params.rate_floor:
        raise BelowRateFloor(f"convolved rate {total:.3g} at t={t} ns is below the floor")
    rho = moment / total
    rho = 0.5 * (rho + rho.conj().T)
    return rho, total
