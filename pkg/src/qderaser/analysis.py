"""Time-averaged concurrence, the (delta, tau) sweep and its contour lines."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .cascade import (
    BelowRateFloor,
    CascadeParams,
    DetectorModel,
    Emission,
    convolved_moment,
    detected_fraction_after,
    detected_fraction_before,
    envelope,
)
from .polarization import PROJECTORS, concurrence_many
from .tomography import reconstruct_many

DEFAULT_STEPS = 2000
CONVERGENCE_TOL = 1e-4
WEIGHTINGS = ("convolved", "n")


class GridTooCoarse(ArithmeticError):
    pass


class EmptyContour(ValueError):
    pass


class CellError(RuntimeError):
    """A sweep cell failed; carries the offending (delta, tau)."""

    def __init__(self, delta: float, tau: float, cause: Exception):
        super().__init__(f"cell delta={delta!r} ueV, tau={tau!r} ns: {cause}")
        self.delta = delta
        self.tau = tau
        self.cause = cause


@dataclass(frozen=True)
class TimeGrid:
    t_min: float
    t_max: float
    steps: int

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ValueError("t_min must be below t_max")
        if self.steps < 2:
            raise ValueError("need at least 2 steps")

    def points(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.steps + 1)

    def refined(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_min, self.t_max, self.steps * factor)

    @classmethod
    def default(cls, params: CascadeParams, det: DetectorModel, weighting: str = "convolved",
                steps: int = DEFAULT_STEPS) -> "TimeGrid":
        """Grid spanning [0 or -6 sigma, 12 tau_x + 5 sigma].

        For the convolved weighting the grid extends 6 sigma before the XX
        emission and is laid out so that t = 0 falls on a node, which keeps
        the trapezoid rule accurate when sigma is below the step.
        """
        sigma = det.sigma
        t_max = 12 * params.tau_x + 5 * sigma
        if weighting == "n" or sigma == 0:
            return cls(0.0, t_max, steps)
        lead = 6 * sigma
        n_neg = min(math.ceil(lead / ((t_max + lead) / steps)), steps - 1)
        dt = t_max / (steps - n_neg)
        return cls(-n_neg * dt, t_max, steps)


def concurrence_trace(t, params: CascadeParams, det: DetectorModel, emission: Emission | None = None,
                      method: str = "tomography"):
    """Concurrence at each time bin and the convolved pair rate.

    ``method="tomography"`` reconstructs every bin from its 36 projection
    rates; ``"direct"`` normalizes the convolved density matrix. Bins under
    the rate floor get NaN.
    """
    moment = convolved_moment(t, params, det, emission)
    total = np.trace(moment, axis1=-2, axis2=-1).real
    valid = total >= params.rate_floor
    conc = np.full(total.shape, np.nan)
    if np.any(valid):
        m = moment[valid]
        if method == "tomography":
            kets = PROJECTORS.reshape(36, 4)
            rates = np.sum((kets.conj() @ m) * kets, axis=-1).real.reshape(-1, 6, 6)
            rho = reconstruct_many(np.clip(rates, 0.0, None))
        elif method == "direct":
            rho = m / total[valid][:, None, None]
        else:
            raise ValueError(f"unknown method {method!r}")
        conc[valid] = concurrence_many(rho)
    return conc, total


def _fill_nearest(values: np.ndarray) -> np.ndarray:
    ok = np.flatnonzero(~np.isnan(values))
    if ok.size == 0:
        raise BelowRateFloor("no time bin carries a rate above the floor")
    idx = np.arange(values.size)
    pos = np.clip(np.searchsorted(ok, idx), 1, max(ok.size - 1, 1))
    if ok.size == 1:
        return np.full(values.shape, values[ok[0]])
    left, right = ok[pos - 1], ok[pos]
    nearest = np.where(idx - left <= right - idx, left, right)
    return values[nearest]


def _cbar_on(grid: TimeGrid, params, det, weighting, emission, method) -> float:
    t = grid.points()
    conc, total = concurrence_trace(t, params, det, emission, method)
    conc = _fill_nearest(conc)
    if weighting == "n":
        weight = envelope(t, params)
    elif weighting == "convolved":
        weight = total
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    # pairs outside the grid enter with the concurrence of the edge bins;
    # dividing by the quadrature of the weight itself makes C == 1 map to 1
    head = params.n0 * detected_fraction_before(t[0], params, det, weighting)
    tail = params.n0 * detected_fraction_after(t[-1], params, det, weighting)
    num = np.trapezoid(weight * conc, t) + head * conc[0] + tail * conc[-1]
    den = np.trapezoid(weight, t) + head + tail
    value = num / den
    return float(min(max(value, 0.0), 1.0))


def cbar(params: CascadeParams, det: DetectorModel, grid: TimeGrid | None = None,
         weighting: str = "convolved", emission: Emission | None = None,
         method: str = "tomography", check_convergence: bool = False,
         steps: int = DEFAULT_STEPS) -> float:
    """Photon-weighted time average of the concurrence.

    ``weighting="convolved"`` weights each bin by the detected (jittered)
    pair rate; ``"n"`` weights by the emitted rate n(t). The integral is a
    trapezoid sum over ``grid`` normalized by ``params.n0``.

    Raises
    ------
    GridTooCoarse
        With ``check_convergence``, if doubling the grid resolution moves the
        result by more than 1e-4.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    if grid is None:
        grid = TimeGrid.default(params, det, weighting, steps)
    value = _cbar_on(grid, params, det, weighting, emission, method)
    if check_convergence:
        finer = _cbar_on(grid.refined(), params, det, weighting, emission, method)
        if abs(finer - value) > CONVERGENCE_TOL:
            raise GridTooCoarse(
                f"doubling the time grid moved cbar by {abs(finer - value):.3g} "
                f"(delta={params.delta} ueV, tau={det.tau} ns)"
            )
    return value


@dataclass(frozen=True)
class SweepGrid:
    delta_values: tuple
    tau_values: tuple
    tau_x: float = 1.0

    def __post_init__(self):
        d = tuple(float(x) for x in np.atleast_1d(self.delta_values))
        t = tuple(float(x) for x in np.atleast_1d(self.tau_values))
        for name, axis in (("delta", d), ("tau", t)):
            if not axis:
                raise ValueError(f"{name} axis is empty")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError(f"{name} axis must be strictly increasing")
            if axis[0] < 0:
                raise ValueError(f"{name} values must be non-negative")
        object.__setattr__(self, "delta_values", d)
        object.__setattr__(self, "tau_values", t)

    @property
    def shape(self):
        return len(self.delta_values), len(self.tau_values)


@dataclass
class ConcurrenceMap:
    """C-bar over a sweep grid; ``values[i, j]`` is at delta_i, tau_j."""

    grid: SweepGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("values do not match the grid shape")


def _cell(args):
    delta, tau, tau_x, steps, weighting, check = args
    params = CascadeParams(delta, tau_x)
    det = DetectorModel(tau)
    try:
        return cbar(params, det, weighting=weighting, steps=steps, check_convergence=check)
    except Exception as exc:  # re-raised in the parent with the cell attached
        return CellError(delta, tau, exc)


def sweep(grid: SweepGrid, steps: int = DEFAULT_STEPS, workers: int = 1,
          weighting: str = "convolved", check_convergence: bool = False) -> ConcurrenceMap:
    """Evaluate :func:`cbar` on every (delta, tau) cell.

    Cells are independent and evaluated by the same code path whatever the
    worker count, so the result does not depend on ``workers``.
    """
    jobs = [(d, t, grid.tau_x, steps, weighting, check_convergence)
            for d in grid.delta_values for t in grid.tau_values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_cell(j) for j in jobs]
    for r in results:
        if isinstance(r, CellError):
            raise r
    return ConcurrenceMap(grid, np.array(results).reshape(grid.shape))


# marching squares: corners ordered (r,c), (r,c+1), (r+1,c+1), (r+1,c); edges
# 0 top (r), 1 right (c+1), 2 bottom (r+1), 3 left (c)
_SEGMENTS = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(2, 0)], 11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def _edge_key(r, c, e):
    if e == 0:
        return ("h", r, c)
    if e == 2:
        return ("h", r + 1, c)
    if e == 3:
        return ("v", r, c)
    return ("v", r, c + 1)


def contour(cmap: ConcurrenceMap, level: float) -> list:
    """Iso-lines of ``cmap`` at ``level`` as a list of (k, 2) arrays of (tau, delta).

    Vertices sit on grid edges whose end values bracket ``level``, placed by
    linear interpolation along the edge.
    """
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    z = cmap.values
    x = np.asarray(cmap.grid.tau_values)
    y = np.asarray(cmap.grid.delta_values)
    above = z >= level

    def vertex(key):
        kind, r, c = key
        if kind == "h":
            z0, z1, p0, p1 = z[r, c], z[r, c + 1], x[c], x[c + 1]
            frac = (level - z0) / (z1 - z0)
            return (p0 + frac * (p1 - p0), y[r])
        z0, z1, p0, p1 = z[r, c], z[r + 1, c], y[r], y[r + 1]
        frac = (level - z0) / (z1 - z0)
        return (x[c], p0 + frac * (p1 - p0))

    links: dict = {}
    segments = []
    rows, cols = z.shape
    for r in range(rows - 1):
        for c in range(cols - 1):
            code = (above[r, c] * 1 | above[r, c + 1] * 2 | above[r + 1, c + 1] * 4 | above[r + 1, c] * 8)
            if code in (0, 15):
                continue
            if code in (5, 10):
                centre = z[r:r + 2, c:c + 2].mean() >= level
                # a centre above the level joins the above-level corners
                if (code == 5) == centre:
                    pairs = [(0, 1), (2, 3)]
                else:
                    pairs = [(3, 0), (1, 2)]
            else:
                pairs = _SEGMENTS[code]
            for a, b in pairs:
                ka, kb = _edge_key(r, c, a), _edge_key(r, c, b)
                idx = len(segments)
                segments.append((ka, kb))
                links.setdefault(ka, []).append(idx)
                links.setdefault(kb, []).append(idx)
    if not segments:
        raise EmptyContour(f"level {level} is never crossed")

    used = [False] * len(segments)

    def walk(start_key, seg):
        keys = [start_key]
        key = start_key
        while seg is not None and not used[seg]:
            used[seg] = True
            a, b = segments[seg]
            key = b if a == key else a
            keys.append(key)
            nxt = [s for s in links[key] if not used[s]]
            seg = nxt[0] if nxt else None
        return keys

    lines = []
    ends = sorted(k for k, segs in links.items() if len(segs) == 1)
    for k in ends:
        seg = links[k][0]
        if not used[seg]:
            lines.append(walk(k, seg))
    for idx in range(len(segments)):
        if not used[idx]:
            lines.append(walk(segments[idx][0], idx))
    return [np.array([vertex(k) for k in line]) for line in lines]


def bilinear(cmap: ConcurrenceMap, tau: float, delta: float) -> float:
    """Bilinear interpolation of the map at (tau, delta) inside the grid."""
    x = np.asarray(cmap.grid.tau_values)
    y = np.asarray(cmap.grid.delta_values)
    c = int(np.clip(np.searchsorted(x, tau) - 1, 0, len(x) - 2))
    r = int(np.clip(np.searchsorted(y, delta) - 1, 0, len(y) - 2))
    fx = (tau - x[c]) / (x[c + 1] - x[c])
    fy = (delta - y[r]) / (y[r + 1] - y[r])
    z = cmap.values
    top = z[r, c] * (1 - fx) + z[r, c + 1] * fx
    bot = z[r + 1, c] * (1 - fx) + z[r + 1, c + 1] * fx
    return float(top * (1 - fy) + bot * fy)
