"""Command-line front end: ``map``, ``trace``, ``erase`` and ``tomo``.

Parameters resolve as defaults < config file (flat ``key = value``) < flags.
Every CSV starts with a ``#`` header echoing the resolved parameters; the
body below it depends only on those parameters.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from itertools import product

import numpy as np

from . import __version__
from .analysis import (
    WEIGHTINGS,
    CellError,
    EmptyContour,
    GridTooCoarse,
    SweepGrid,
    TimeGrid,
    cbar,
    concurrence_trace,
    contour,
    sweep,
)
from .cascade import (
    PLANCK,
    CascadeParams,
    DetectorModel,
    convolved_rates,
    envelope,
    ghz_to_ueV,
    psi,
)
from .eraser import (
    XI,
    compensating_omega,
    erase,
    erased_emission,
    qwp_pair_transform,
    rf_frequency,
    which_path_distinguishability,
)
from .polarization import BASIS_ORDER, PHI_PLUS, concurrence, fidelity, purity
from .tomography import (
    GROUPS,
    ProjectionCSVError,
    ProjectionSet36,
    read_projection_csv,
    reconstruct,
    write_projection_csv,
)

log = logging.getLogger("qderaser")

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_DATA = 0, 2, 3, 4

# key -> (type, default, unit)
COMMON_KEYS = {
    "out": (str, ".", ""),
    "workers": (int, 1, ""),
    "weighting": (str, "convolved", ""),
    "tau_ns": (float, None, "ns"),
    "delta_ueV": (float, None, "ueV"),
    "delta_GHz": (float, None, "GHz"),
    "tau_x_ns": (float, 1.0, "ns"),
    "t_steps": (int, 2000, ""),
}
COMMAND_KEYS = {
    "map": {
        "tau_min_ns": (float, 0.001, "ns"),
        "tau_max_ns": (float, 2.0, "ns"),
        "n_tau": (int, 60, ""),
        "delta_min_GHz": (float, 0.05, "GHz"),
        "delta_max_GHz": (float, 10.0, "GHz"),
        "n_delta": (int, 60, ""),
        "level": (float, 0.99, ""),
        "check_convergence": (bool, False, ""),
    },
    "trace": {
        "t_min_ns": (float, None, "ns"),
        "t_max_ns": (float, None, "ns"),
        "projections_at_ns": (float, None, "ns"),
    },
    "erase": {
        "omega_rad_per_ns": (float, None, "rad/ns"),
    },
    "tomo": {
        "input": (str, None, ""),
    },
}
POINT_DEFAULTS = {"tau_ns": 0.3, "delta_GHz": 1.0}


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    return f"{float(x):.9g}"


def _coerce(key, kind, raw):
    if raw is None or kind is str:
        return raw
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from None


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    with fh:
        for n, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def resolve(command: str, flags: dict) -> dict:
    """Merge defaults, config file and command-line flags for ``command``."""
    schema = {**COMMON_KEYS, **COMMAND_KEYS[command]}
    cfg = {k: spec[1] for k, spec in schema.items()}
    layers = []
    if flags.get("config"):
        layers.append(read_config(flags["config"]))
    layers.append({k: v for k, v in flags.items() if k in schema and v is not None})
    for layer in layers:
        unknown = sorted(set(layer) - set(schema))
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown key for '{command}'")
        if "delta_ueV" in layer and "delta_GHz" in layer:
            raise ConfigError("delta_ueV: give either delta_ueV or delta_GHz, not both")
        for key in ("delta_ueV", "delta_GHz"):
            if key in layer:
                cfg["delta_ueV"] = cfg["delta_GHz"] = None
        for key, raw in layer.items():
            cfg[key] = _coerce(key, schema[key][0], raw)
    if command in ("trace", "erase"):
        if cfg["tau_ns"] is None:
            cfg["tau_ns"] = POINT_DEFAULTS["tau_ns"]
        if cfg["delta_ueV"] is None and cfg["delta_GHz"] is None:
            cfg["delta_GHz"] = POINT_DEFAULTS["delta_GHz"]
    if cfg["delta_GHz"] is not None:
        cfg["delta_ueV"] = float(ghz_to_ueV(cfg["delta_GHz"]))
    elif cfg["delta_ueV"] is not None:
        cfg["delta_GHz"] = cfg["delta_ueV"] / PLANCK
    _validate(command, cfg)
    return cfg


def _validate(command, cfg):
    if cfg["weighting"] not in WEIGHTINGS:
        raise ConfigError(f"weighting: expected one of {', '.join(WEIGHTINGS)}, got {cfg['weighting']!r}")
    if cfg["workers"] < 1:
        raise ConfigError("workers: must be at least 1")
    if cfg["t_steps"] < 2:
        raise ConfigError("t_steps: must be at least 2")
    if not cfg["tau_x_ns"] > 0:
        raise ConfigError("tau_x_ns: must be positive")
    if cfg["tau_ns"] is not None and cfg["tau_ns"] < 0:
        raise ConfigError("tau_ns: must be non-negative")
    if cfg["delta_ueV"] is not None and cfg["delta_ueV"] < 0:
        raise ConfigError("delta_ueV: must be non-negative")
    if command == "map":
        for lo, hi, n in (("tau_min_ns", "tau_max_ns", "n_tau"), ("delta_min_GHz", "delta_max_GHz", "n_delta")):
            if not 0 < cfg[lo] < cfg[hi]:
                raise ConfigError(f"{lo}: need 0 < {lo} < {hi}")
            if cfg[n] < 2:
                raise ConfigError(f"{n}: need at least 2 grid points")
        if not 0 < cfg["level"] < 1:
            raise ConfigError("level: must lie in (0, 1)")
    if command == "tomo" and not cfg["input"]:
        raise ConfigError("input: a projection CSV is required")


def header(command: str, cfg: dict, extra=()) -> list:
    schema = {**COMMON_KEYS, **COMMAND_KEYS[command]}
    lines = [f"qderaser {__version__}", f"command = {command}"]
    for key in sorted(schema):
        value = cfg.get(key)
        if value is None:
            continue
        unit = schema[key][2]
        text = fmt(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}" + (f" ({unit})" if unit else ""))
    lines.extend(extra)
    return lines


def write_csv(path, head, columns, rows):
    with open(path, "w", newline="") as fh:
        for line in head:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def _point(cfg):
    params = CascadeParams(cfg["delta_ueV"], cfg["tau_x_ns"])
    det = DetectorModel(cfg["tau_ns"])
    return params, det


def _axis(lo, hi, n):
    return tuple(np.geomspace(lo, hi, n))


def cmd_map(cfg) -> int:
    if cfg["tau_ns"] is not None:
        taus = (cfg["tau_ns"],)
    else:
        taus = _axis(cfg["tau_min_ns"], cfg["tau_max_ns"], cfg["n_tau"])
    if cfg["delta_ueV"] is not None:
        deltas = (cfg["delta_ueV"],)
    else:
        deltas = tuple(ghz_to_ueV(_axis(cfg["delta_min_GHz"], cfg["delta_max_GHz"], cfg["n_delta"])))
    grid = SweepGrid(deltas, taus, cfg["tau_x_ns"])
    log.info("sweeping %d x %d cells with %d worker(s)", len(deltas), len(taus), cfg["workers"])
    cmap = sweep(grid, steps=cfg["t_steps"], workers=cfg["workers"], weighting=cfg["weighting"],
                 check_convergence=cfg["check_convergence"])
    head = header("map", cfg, [f"grid = {len(deltas)} delta x {len(taus)} tau"])
    rows = [(t, d, d / PLANCK, cmap.values[i, j])
            for i, d in enumerate(deltas) for j, t in enumerate(taus)]
    write_csv(os.path.join(cfg["out"], "map.csv"), head, ["tau_ns", "delta_ueV", "delta_GHz", "cbar"], rows)

    level = cfg["level"]
    try:
        lines = contour(cmap, level)
    except EmptyContour:
        lines = []
        log.warning("the %s contour is empty on this grid", level)
    crows = [(t, d, str(k)) for k, line in enumerate(lines) for t, d in line]
    write_csv(os.path.join(cfg["out"], f"contour_{level:g}.csv"), head + [f"contour level = {fmt(level)}"],
              ["tau_ns", "delta_ueV", "polyline"], crows)
    return EXIT_OK


def cmd_trace(cfg) -> int:
    params, det = _point(cfg)
    grid = TimeGrid.default(params, det, cfg["weighting"], cfg["t_steps"])
    t_min = grid.t_min if cfg["t_min_ns"] is None else cfg["t_min_ns"]
    t_max = grid.t_max if cfg["t_max_ns"] is None else cfg["t_max_ns"]
    try:
        grid = TimeGrid(t_min, t_max, cfg["t_steps"])
    except ValueError as exc:
        raise ConfigError(f"t_min_ns: {exc}") from None
    t = grid.points()
    conc, total = concurrence_trace(t, params, det)
    rates = convolved_rates(t, params, det)
    idx = {b: k for k, b in enumerate(BASIS_ORDER)}

    def m(a, b):
        return rates[:, idx[a], idx[b]]

    cols = [t, envelope(t, params), total, m("D", "D"), m("D", "A"), m("R", "L"), m("R", "R")]
    rows = []
    for k in range(t.size):
        c = "nan" if np.isnan(conc[k]) else conc[k]
        rows.append([col[k] for col in cols] + [c])
    head = header("trace", cfg)
    write_csv(os.path.join(cfg["out"], "trace.csv"), head,
              ["t_ns", "envelope", "convolved_total", "m_DD", "m_DA", "m_RL", "m_RR", "concurrence_t"], rows)

    if cfg["projections_at_ns"] is not None:
        k = int(np.argmin(np.abs(t - cfg["projections_at_ns"])))
        p = ProjectionSet36(rates[k])
        write_projection_csv(os.path.join(cfg["out"], "projections.csv"), p,
                             head + [f"time bin t_ns = {float(t[k])!r}"])
    return EXIT_OK


def cmd_erase(cfg) -> int:
    params, det = _point(cfg)
    omega = cfg["omega_rad_per_ns"]
    if omega is None:
        omega = compensating_omega(params.delta)
        cfg = {**cfg, "omega_rad_per_ns": omega}
    grid = TimeGrid.default(params, det, "n", cfg["t_steps"])
    gap = which_path_distinguishability(params, omega)
    rows = []
    for t in grid.points():
        before = abs(np.vdot(XI, qwp_pair_transform(psi(t, params.delta)))) ** 2
        after = abs(np.vdot(XI, erase(t, params, omega))) ** 2
        rows.append((t, before, after, gap))
    head = header("erase", cfg)
    write_csv(os.path.join(cfg["out"], "erase.csv"), head,
              ["t_ns", "fidelity_before", "fidelity_after", "which_path_gap_ueV"], rows)

    summary = [
        ("rf_frequency_MHz", rf_frequency(params.delta)),
        ("cbar_before", cbar(params, det, weighting=cfg["weighting"], steps=cfg["t_steps"])),
        ("cbar_after", cbar(params, det, weighting=cfg["weighting"], steps=cfg["t_steps"],
                            emission=erased_emission(params, omega))),
    ]
    write_csv(os.path.join(cfg["out"], "erase_summary.csv"), head, ["key", "value"], summary)
    for key, value in summary:
        print(f"{key} = {fmt(value)}")
    return EXIT_OK


def cmd_tomo(cfg) -> int:
    p = read_projection_csv(cfg["input"])
    rho = reconstruct(p)
    head = header("tomo", cfg)
    rows = [(r, c, rho[r, c].real, rho[r, c].imag) for r, c in product(range(4), repeat=2)]
    write_csv(os.path.join(cfg["out"], "rho.csv"), head, ["row", "col", "re", "im"],
              [(str(r), str(c), re, im) for r, c, re, im in rows])
    dev = p.max_group_deviation()
    summary = [
        ("concurrence", concurrence(rho)),
        ("fidelity_phi_plus", fidelity(rho, PHI_PLUS)),
        ("purity", purity(rho)),
        ("total_rate", p.total()),
        ("max_group_deviation", dev),
        ("groups_consistent", "1" if dev <= 1e-6 else "0"),
    ]
    sums = p.group_sums()
    for g, s in zip(GROUPS, sums):
        (a, b) = g[0]
        summary.append((f"group_sum_{BASIS_ORDER[a].value}{BASIS_ORDER[a + 1].value}_"
                        f"{BASIS_ORDER[b].value}{BASIS_ORDER[b + 1].value}", s))
    write_csv(os.path.join(cfg["out"], "tomo_summary.csv"), head, ["key", "value"], summary)
    for key, value in summary[:6]:
        print(f"{key} = {value if isinstance(value, str) else fmt(value)}")
    return EXIT_OK


COMMANDS = {"map": cmd_map, "trace": cmd_trace, "erase": cmd_erase, "tomo": cmd_tomo}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qderaser", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value parameter file")
    common.add_argument("--out", help="output directory (default: .)")
    common.add_argument("--workers", type=int, help="parallel sweep workers")
    common.add_argument("--weighting", choices=WEIGHTINGS, help="time-average weight (default: convolved)")
    common.add_argument("--tau-ns", dest="tau_ns", type=float, help="detector FWHM (ns)")
    group = common.add_mutually_exclusive_group()
    group.add_argument("--delta-ueV", dest="delta_ueV", type=float, help="FSS energy (ueV)")
    group.add_argument("--delta-GHz", dest="delta_GHz", type=float, help="FSS as frequency delta/h (GHz)")
    common.add_argument("--tau-x-ns", dest="tau_x_ns", type=float, help="exciton lifetime (ns)")
    common.add_argument("--t-steps", dest="t_steps", type=int, help="time-grid steps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("map", parents=[common], help="C-bar over a (delta, tau) grid and its contour")
    p.add_argument("--tau-min-ns", dest="tau_min_ns", type=float)
    p.add_argument("--tau-max-ns", dest="tau_max_ns", type=float)
    p.add_argument("--n-tau", dest="n_tau", type=int)
    p.add_argument("--delta-min-GHz", dest="delta_min_GHz", type=float)
    p.add_argument("--delta-max-GHz", dest="delta_max_GHz", type=float)
    p.add_argument("--n-delta", dest="n_delta", type=int)
    p.add_argument("--level", type=float, help="contour level (default 0.99)")
    p.add_argument("--check-convergence", dest="check_convergence", action="store_const", const=True)

    p = sub.add_parser("trace", parents=[common], help="time-resolved rates and concurrence")
    p.add_argument("--t-min-ns", dest="t_min_ns", type=float)
    p.add_argument("--t-max-ns", dest="t_max_ns", type=float)
    p.add_argument("--projections-at-ns", dest="projections_at_ns", type=float,
                   help="also write the 36 rates of the bin nearest this time")

    p = sub.add_parser("erase", parents=[common], help="apply the rotating-waveplate eraser")
    p.add_argument("--omega", dest="omega_rad_per_ns", type=float,
                   help="plate angular frequency (rad/ns); default delta/(4 hbar)")

    p = sub.add_parser("tomo", parents=[common], help="reconstruct a state from a projection CSV")
    p.add_argument("input", help="CSV with columns basis_xx, basis_x, rate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "verbose")}
    try:
        cfg = resolve(args.command, flags)
        os.makedirs(cfg["out"], exist_ok=True)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProjectionCSVError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (GridTooCoarse, CellError) as exc:
        if isinstance(exc, CellError) and not isinstance(exc.cause, GridTooCoarse):
            raise
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
