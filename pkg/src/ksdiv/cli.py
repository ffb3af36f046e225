"""Command-line front end: ``classify``, ``region-scan`` and ``witness``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 internal invariant breach.
"""
from __future__ import annotations

import argparse
import cmath
import csv
import io
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, RegionScanConfig, RunConfig, load_config
from .dynamics import (
    AmplitudeDampingSpec, PauliDynamics, accumulate_rates, divisibility_scan,
    generator_trace, positivity_margin_sampled,
)
from .generators import dissipativity_numeric, generator_heisenberg, pauli_generator
from .maps import (
    CP_TOL, HADAMARD4, PPP_TOL, POSITIVE_TOL, QubitMap, identity_map, is_cp,
    is_positive_diag, ks_closed_form_diag, ks_witness_search, transposition_map,
)
from .pauli import InvalidInputError
from .witness import Verdict

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4
SVG_SIZE = 800
ZERO_PLUS = 1e-5


class InvariantError(RuntimeError):
    """An internal consistency check failed."""


def fmt(x) -> str:
    """Floats with 17 significant digits, flags as true/false."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def thread_count() -> int:
    raw = os.environ.get("KSDIV_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"KSDIV_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"KSDIV_THREADS must be a positive integer, got {raw!r}")
    return min(n, os.cpu_count() or 1)


def _check_hierarchy(where: str, positive: bool, ks, cp: bool) -> None:
    if (cp and ks is False) or (ks and not positive):
        raise InvariantError(f"{where}: flags break cp => ks => positive "
                             f"(positive={positive}, ks={ks}, cp={cp})")


# Models --------------------------------------------------------------------

def damping_function(kind: str, a: float, b: float):
    """``G(t)`` for the supported amplitude-damping families."""
    if kind == "exponential":
        # G'/G = -(a + i b)/2, so gamma = a and omega = b
        return lambda t: cmath.exp(-0.5 * (a + 1j * b) * t)
    if kind == "jaynes-cummings":
        lam, g0 = a, b
        d = cmath.sqrt(lam * lam - 2.0 * g0 * lam)

        def g(t):
            if abs(d) < 1e-12:
                return math.exp(-lam * t / 2) * (1.0 + lam * t / 2)
            val = cmath.exp(-lam * t / 2) * (cmath.cosh(d * t / 2) + lam / d * cmath.sinh(d * t / 2))
            # real for every t; drop the rounding residue of the complex branch
            return complex(val.real, 0.0)
        return g
    raise ConfigError(f"unknown damping kind {kind!r}")


def map_from_config(cfg: RunConfig) -> QubitMap:
    if cfg.map_kind == "identity":
        return identity_map()
    if cfg.map_kind == "transposition":
        return transposition_map()
    return QubitMap(cfg.transfer)


def _time_label(t: float) -> str:
    return "t = 0⁺" if t < ZERO_PLUS else f"t ≈ {t:.6f}"


def divisibility_summary(first: dict, t_max: float) -> str:
    parts = []
    for kind in ("P", "KS", "CP"):
        t = first[kind]
        if t is None:
            parts.append(f"{kind}-divisible on [0,{t_max:g}]")
        else:
            parts.append(f"{kind}-divisibility lost at {_time_label(t)}")
    return "; ".join(parts)


# classify ------------------------------------------------------------------

def _classify_pauli(cfg: RunConfig, out: Path) -> str:
    times = np.linspace(0.0, cfg.t_max, cfg.grid)
    traj = accumulate_rates(cfg.rates, times)
    trace = generator_trace(cfg.rates, times)
    header = ["t", "gamma1", "gamma2", "gamma3", "lambda1", "lambda2", "lambda3",
              "p0", "p1", "p2", "p3", "P", "KS", "CP", "p_margin", "ks_margin", "cp_margin"]
    rows = []
    for k, t in enumerate(times):
        v = trace.verdicts[k]
        _check_hierarchy(f"t={t}", v.p_divisible_now, v.ks_divisible_now, v.cp_divisible_now)
        rows.append([t, *cfg.rates(t), *traj.lam[k], *traj.p[k], v.p_divisible_now,
                     v.ks_divisible_now, v.cp_divisible_now, v.min_p_margin,
                     v.min_ks_margin, v.min_cp_margin])
    write_csv(out / "classification.csv", header, rows)
    scan = divisibility_scan(PauliDynamics(cfg.rates), cfg.t_max, cfg.grid, rates=cfg.rates,
                             witness=cfg.witness, seed=cfg.seed, budget=cfg.budget)
    if scan.cross_check_mismatches:
        raise InvariantError(f"propagator and rate KS verdicts disagree on "
                             f"{len(scan.cross_check_mismatches)} pairs")
    cptp = bool(np.all(traj.p.min(axis=1) >= -CP_TOL))
    prop = ", ".join(f"{k} {'none' if v is None else format(v, 'g')}"
                     for k, v in scan.first_violation.items())
    return "\n".join([
        "model: pauli-rates",
        f"grid: {cfg.grid} points on [0,{cfg.t_max:g}]",
        divisibility_summary(trace.first_violation, cfg.t_max),
        f"propagator scan, first failing t per class: {prop}",
        f"rate/propagator KS cross-check mismatches: {len(scan.cross_check_mismatches)}",
        f"KS undecided pairs (closed form failed, no witness found): {len(scan.unresolved)}",
        f"CPTP at all grid points: {'yes' if cptp else 'no'}",
    ])


def _classify_damping(cfg: RunConfig, out: Path) -> str:
    spec = AmplitudeDampingSpec(damping_function(*cfg.damping))
    times = np.linspace(0.0, cfg.t_max, cfg.grid)
    header = ["t", "G_re", "G_im", "abs_G", "gamma", "omega", "P", "KS", "CP", "cptp"]
    rows = []
    first = None
    prev = None
    for t in times:
        g = complex(spec.G(t))
        gamma, omega = spec.rates(t)
        ok = gamma >= -1e-12
        if not ok and first is None:
            if prev is None:
                first = 0.0
            else:
                lo, hi = prev, t
                while hi - lo > 1e-6:
                    mid = 0.5 * (lo + hi)
                    if spec.rates(mid)[0] < -1e-12:
                        hi = mid
                    else:
                        lo = mid
                first = hi
        prev = t
        # for amplitude damping the three notions coincide with gamma >= 0
        rows.append([t, g.real, g.imag, abs(g), gamma, omega, ok, ok, ok, spec.is_cptp(t)])
    write_csv(out / "classification.csv", header, rows)
    first_all = {"P": first, "KS": first, "CP": first}
    return "\n".join([
        f"model: amplitude-damping ({cfg.damping[0]})",
        f"grid: {cfg.grid} points on [0,{cfg.t_max:g}]",
        divisibility_summary(first_all, cfg.t_max),
        f"CPTP at all grid points: {'yes' if all(r[-1] for r in rows) else 'no'}",
    ])


def classify_map(phi: QubitMap, cfg: RunConfig) -> dict:
    q = phi.diagonal_q()
    if q is not None:
        positive = is_positive_diag(q)
        cp = bool(np.min(HADAMARD4 @ np.concatenate([[1.0], q])) / 4 >= -CP_TOL)
        if positive:
            cf = ks_closed_form_diag(q)
            ks, ks_margin = cf["certified"], cf["margin"]
        else:
            ks, ks_margin = False, -math.inf
    else:
        positive = positivity_margin_sampled(phi) >= -1e-10
        cp = is_cp(phi)
        ks, ks_margin = (True, 0.0) if cp else (None, math.nan)
        if positive and not cp and phi.is_unital():
            rep = ks_witness_search(phi, mode=cfg.mode, seed=cfg.seed, budget=cfg.budget)
            if rep.verdict is Verdict.VIOLATION:
                ks, ks_margin = False, rep.margin
        elif not positive:
            ks = False
    _check_hierarchy("map", positive, ks, cp)
    return {"positive": positive, "ks": ks, "cp": cp, "ks_margin": ks_margin}


def _classify_custom(cfg: RunConfig, out: Path) -> str:
    phi = map_from_config(cfg)
    res = classify_map(phi, cfg)
    write_csv(out / "classification.csv", ["kind", "positive", "ks", "cp", "ks_margin"],
              [[cfg.map_kind, res["positive"], res["ks"], res["cp"], res["ks_margin"]]])
    ks = {True: "yes", False: "no", None: "undecided"}[res["ks"]]
    return "\n".join([
        f"model: custom-transfer ({cfg.map_kind})",
        f"positive: {'yes' if res['positive'] else 'no'}; KS: {ks}; CP: {'yes' if res['cp'] else 'no'}",
    ])


def cmd_classify(cfg: RunConfig, out: Path) -> str:
    out.mkdir(parents=True, exist_ok=True)
    if cfg.model == "pauli-rates":
        summary = _classify_pauli(cfg, out)
    elif cfg.model == "amplitude-damping":
        summary = _classify_damping(cfg, out)
    else:
        summary = _classify_custom(cfg, out)
    (out / "summary.txt").write_text(summary + "\n")
    return summary


# region-scan ---------------------------------------------------------------

def region_flags(q: np.ndarray) -> dict:
    """Vectorized positivity, KS (both closed forms) and CP flags for rows of ``q``."""
    q = np.asarray(q, dtype=float)
    q1, q2, q3 = q[:, 0], q[:, 1], q[:, 2]
    positive = np.max(np.abs(q), axis=1) <= 1 + POSITIVE_TOL
    ppp = 1 + 2 * q1 * q2 * q3 - (q1 ** 2 + q2 ** 2 + q3 ** 2)
    al, be, ga = np.abs(1 - q1 ** 2), np.abs(1 - q2 ** 2), np.abs(1 - q3 ** 2)
    general = np.minimum.reduce([be * ga - (q1 - q2 * q3) ** 2,
                                 al * ga - (q2 - q1 * q3) ** 2,
                                 al * be - (q3 - q1 * q2) ** 2])
    weights = np.column_stack([np.ones(len(q)), q]) @ HADAMARD4.T / 4
    cp = weights.min(axis=1) >= -CP_TOL
    return {
        "positive": positive,
        "ks_ppp": positive & (ppp >= -PPP_TOL),
        "ks_q38": positive & (general >= -PPP_TOL),
        "cp": cp,
        "ppp_margin": ppp,
    }


def region_grid(cfg: RegionScanConfig) -> np.ndarray:
    axis = np.linspace(-1.0, 1.0, cfg.resolution)
    if cfg.slice == "plane":
        p1, p2 = np.meshgrid(axis, axis, indexing="ij")
        return np.column_stack([p1.ravel(), p2.ravel(), 1.0 - p1.ravel() - p2.ravel()])
    p1, p2, p3 = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.column_stack([p1.ravel(), p2.ravel(), p3.ravel()])


def scan_region(cfg: RegionScanConfig, threads: int = 1) -> tuple[np.ndarray, dict]:
    pts = region_grid(cfg)
    chunks = np.array_split(pts, max(1, threads))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        parts = list(pool.map(region_flags, chunks))
    flags = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    # geometric containment, checked point by point
    bad = np.flatnonzero((flags["cp"] & ~flags["ks_ppp"]) | (flags["ks_ppp"] & ~flags["positive"]))
    if bad.size:
        raise InvariantError(f"region containment fails at p={pts[bad[0]].tolist()}")
    if np.any(flags["ks_ppp"] != flags["ks_q38"]):
        k = int(np.flatnonzero(flags["ks_ppp"] != flags["ks_q38"])[0])
        raise InvariantError(f"closed-form KS conditions disagree at p={pts[k].tolist()}")
    return pts, flags


# barycentric frame: vertices of the positivity triangle on the plane p1+p2+p3=1
_VERTS = np.array([[400.0, 80.0], [60.0, 669.0], [740.0, 669.0]])


def to_screen(p) -> np.ndarray:
    """Plane point to SVG pixels; ``b_i = (1 - p_i)/2`` are its barycentric weights."""
    b = (1.0 - np.asarray(p, dtype=float)) / 2.0
    return b @ _VERTS


def _marching_segments(values: np.ndarray, valid: np.ndarray, axis: np.ndarray) -> list:
    """Zero-level segments of a grid field, in (p1, p2) coordinates."""
    segs = []
    n = len(axis)
    sign = values >= 0
    for i in range(n - 1):
        for j in range(n - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            s = [sign[c] for c in corners]
            if all(s) or not any(s) or not any(valid[c] for c in corners):
                continue
            pts = []
            for k in range(4):
                a, b = corners[k], corners[(k + 1) % 4]
                if sign[a] != sign[b]:
                    fa, fb = values[a], values[b]
                    w = fa / (fa - fb)
                    pts.append(((1 - w) * axis[a[0]] + w * axis[b[0]],
                                (1 - w) * axis[a[1]] + w * axis[b[1]]))
            for k in range(0, len(pts) - 1, 2):
                segs.append((pts[k], pts[k + 1]))
    return segs


def render_svg(cfg: RegionScanConfig, flags: dict) -> str:
    n = cfg.resolution
    axis = np.linspace(-1.0, 1.0, n)
    field = flags["ppp_margin"].reshape(n, n)
    valid = flags["positive"].reshape(n, n)
    segs = _marching_segments(field, valid, axis)

    def xy(p1, p2):
        x, y = to_screen([p1, p2, 1.0 - p1 - p2])
        return f"{x:.3f} {y:.3f}"

    def poly(points):
        return " ".join(f"{x:.3f},{y:.3f}" for x, y in (to_screen(p) for p in points))

    path = " ".join(f"M {xy(*a)} L {xy(*b)}" for a, b in segs)
    pos_tri = [(-1, 1, 1), (1, -1, 1), (1, 1, -1)]
    cp_tri = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
              f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">\n')
    out.write(f'<rect width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>\n')
    out.write(f'<polygon points="{poly(pos_tri)}" fill="#eef3fb" stroke="#1f4e9c" stroke-width="2"/>\n')
    out.write(f'<path d="{path}" fill="none" stroke="#c0392b" stroke-width="2"/>\n')
    out.write(f'<polygon points="{poly(cp_tri)}" fill="#d5f0dc" fill-opacity="0.7" '
              f'stroke="#1e8449" stroke-width="2"/>\n')
    for p in pos_tri + cp_tri:
        x, y = to_screen(p)
        label = "(" + ",".join(f"{v:g}" for v in p) + ")"
        out.write(f'<text x="{x:.3f}" y="{y + (-10 if y < 400 else 22):.3f}" font-size="14" '
                  f'text-anchor="middle" font-family="sans-serif">{label}</text>\n')
    legend = [("#1f4e9c", "positive (|p_k| <= 1)"), ("#c0392b", "KS boundary"),
              ("#1e8449", "completely positive")]
    for k, (color, text) in enumerate(legend):
        y = 720 + 22 * k
        out.write(f'<line x1="40" y1="{y}" x2="70" y2="{y}" stroke="{color}" stroke-width="3"/>\n')
        out.write(f'<text x="80" y="{y + 5}" font-size="14" font-family="sans-serif">{text}</text>\n')
    out.write("</svg>\n")
    return out.getvalue()


def cmd_region_scan(cfg: RegionScanConfig, out: Path, threads: int = 1) -> str:
    out.mkdir(parents=True, exist_ok=True)
    pts, flags = scan_region(cfg, threads)
    if "csv" in cfg.outputs:
        header = ["p1", "p2", "p3", "positive", "ks_ppp", "ks_q38", "cp"]
        rows = zip(pts[:, 0], pts[:, 1], pts[:, 2], flags["positive"], flags["ks_ppp"],
                   flags["ks_q38"], flags["cp"])
        write_csv(out / "region.csv", header, rows)
    if "svg" in cfg.outputs:
        if cfg.slice != "plane":
            raise ConfigError("the SVG plot needs region.slice = plane")
        (out / "region.svg").write_text(render_svg(cfg, flags))
    counts = {k: int(np.count_nonzero(flags[k])) for k in ("positive", "ks_ppp", "cp")}
    return (f"region scan ({cfg.slice}, resolution {cfg.resolution}): {len(pts)} points; "
            f"positive {counts['positive']}, KS {counts['ks_ppp']}, CP {counts['cp']}")


# witness -------------------------------------------------------------------

def cmd_witness(cfg: RunConfig, out: Path | None = None) -> str:
    if cfg.model == "pauli-rates":
        target = f"Pauli generator at t={cfg.at:g}"
        rep = dissipativity_numeric(pauli_generator(cfg.rates(cfg.at)), seed=cfg.seed,
                                    budget=cfg.budget)
    elif cfg.model == "amplitude-damping":
        target = f"amplitude-damping generator at t={cfg.at:g}"
        spec = AmplitudeDampingSpec(damping_function(*cfg.damping))
        rep = dissipativity_numeric(generator_heisenberg(spec.gksl(cfg.at)), seed=cfg.seed,
                                    budget=cfg.budget)
    else:
        target = f"map {cfg.map_kind} ({cfg.mode})"
        rep = ks_witness_search(map_from_config(cfg), mode=cfg.mode, seed=cfg.seed,
                                budget=cfg.budget)

    def c12(z):
        return f"{z.real:.12g}{z.imag:+.12g}j"

    w = rep.witness
    lines = [f"target: {target}", f"verdict: {rep.verdict.value}", f"margin: {rep.margin:.12g}"]
    if w is not None:
        lines.append(f"witness w0: {c12(w.w0)}")
        lines.append("witness w: " + ", ".join(c12(z) for z in w.w))
    lines.append(f"evaluations: {rep.evaluations}")
    text = "\n".join(lines)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "witness.txt").write_text(text + "\n")
    return text


# entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ksdiv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("classify", "classify a dynamical map over time"),
                            ("region-scan", "scan the Pauli-diagonal parameter space"),
                            ("witness", "search for a KS or dissipativity violation")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=name != "region-scan")
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--seed", type=int)
        p.add_argument("--budget", type=int)
        p.add_argument("--t-max", type=float, dest="t_max")
        p.add_argument("--grid", type=int, help="time points (classify) or resolution (region-scan)")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> None:
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.budget is not None:
        if args.budget < 1:
            raise ConfigError("--budget must be at least 1")
        cfg.budget = args.budget
    if args.t_max is not None:
        if not (args.t_max > 0 and math.isfinite(args.t_max)):
            raise ConfigError("--t-max must be positive")
        cfg.t_max = args.t_max
    if args.grid is not None:
        if args.grid < 2:
            raise ConfigError("--grid must be at least 2")
        cfg.grid = args.grid


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = thread_count()
        if args.config is not None:
            cfg, region = load_config(args.config)
        else:
            cfg, region = None, RegionScanConfig()
        if args.command == "region-scan":
            if args.grid is not None:
                region = RegionScanConfig(args.grid, region.slice, region.outputs)
            text = cmd_region_scan(region, args.out, threads)
        else:
            _apply_overrides(cfg, args)
            text = cmd_classify(cfg, args.out) if args.command == "classify" else cmd_witness(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantError, AssertionError) as exc:
        print(f"internal invariant breached: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
