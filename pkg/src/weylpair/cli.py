"""weylpair command line: M-function sweeps, spectral pairs, atoms, asymptotics, self-checks.

Exit codes: 0 success, 1 bad configuration, 2 some grid point did not converge,
3 a self-check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .linalg import SingularMatrix
from .model import Problem
from .problem_json import ConfigError, load_problem, problem_to_dict
from .spectral import (DELTA_SEQ, EPS_SEQ, distribution_ratio, exclusion_windows,
                       find_atoms, sample_pair, stieltjes_density)
from .weyl import NoConvergence, m_limit

EXIT_OK, EXIT_CONFIG, EXIT_NOCONV, EXIT_CHECK = 0, 1, 2, 3


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    count: int
    scale: str = "lin"

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"grid must be start:stop:count[:lin|sqrt], got {text!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}: {exc}") from exc
        scale = parts[3] if len(parts) == 4 else "lin"
        if scale not in ("lin", "sqrt"):
            raise ConfigError(f"grid scale must be lin or sqrt, got {scale!r}")
        if count < 2 or not start < stop:
            raise ConfigError("grid needs count >= 2 and start < stop")
        if scale == "sqrt" and start < 0:
            raise ConfigError("sqrt-graded grids need start >= 0")
        return cls(start, stop, count, scale)

    def points(self) -> np.ndarray:
        if self.scale == "sqrt":
            return np.linspace(math.sqrt(self.start), math.sqrt(self.stop), self.count) ** 2
        return np.linspace(self.start, self.stop, self.count)


def _schedule(text: str):
    try:
        vals = sorted((float(v) for v in text.split(",")), reverse=True)
    except ValueError as exc:
        raise ConfigError(f"bad schedule {text!r}") from exc
    if len(vals) < 2 or vals[-1] <= 0:
        raise ConfigError("schedules need at least two positive entries")
    return tuple(vals)


# ------------------------------------------------------------------ per-point work

def _row_mfunc(p: Problem, theta: float, tol: float, r: float):
    lam = r * complex(math.cos(theta), math.sin(theta))
    try:
        v = m_limit(p, lam, tol)
    except NoConvergence:
        return [lam.real, lam.imag] + [math.nan] * 10 + ["no_convergence"]
    M = v.M
    ent = [f(M[i, j]) for i in range(2) for j in range(2) for f in (np.real, np.imag)]
    return [lam.real, lam.imag] + ent + [v.disk_radius, v.b_used, "ok"]


def _row_density(p: Problem, eps, s: float):
    try:
        d, err = stieltjes_density(p, s, eps)
    except NoConvergence:
        return [s] + [math.nan] * 5 + ["no_convergence"]
    return [s, d[0, 0].real, d[0, 1].real, d[0, 1].imag, d[1, 1].real, err, "ok"]


def _row_pair(p: Problem, eps, s: float):
    try:
        smp = sample_pair(p, s, eps)
    except NoConvergence:
        return [s, math.nan, math.nan, math.nan, math.nan, "no_convergence"]
    psi = smp.psi
    pr, pi = (math.nan, math.nan) if psi is None else (psi.real, psi.imag)
    return [s, smp.nu_density, pr, pi, smp.err_est, smp.flag]


def _row_asympt(p: Problem, eps, r: float):
    from .checks import asymptotic_constant

    out = []
    for sign in (1, -1):
        R = distribution_ratio(p, r, sign, eps_seq=eps)
        c, power = asymptotic_constant(p.alpha)
        out.append([r, sign, power, 0.5 * np.trace(R).real, R[0, 1].real, R[0, 1].imag, c])
    return out


def _fan_out(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ------------------------------------------------------------------ output

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _json_val(v):
    if isinstance(v, str) or v is None:
        return v
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    f = float(v)
    return None if not math.isfinite(f) else f


def _atom_rows(atoms):
    return [[a.location, a.nu_mass, a.psi_value.real, a.psi_value.imag] for a in atoms]


def render(fmt: str, command: str, p: Problem, columns, rows, atoms=None) -> str:
    if fmt == "json":
        doc = {"command": command, "problem": problem_to_dict(p), "columns": list(columns),
               "rows": [[_json_val(v) for v in row] for row in rows]}
        if atoms is not None:
            doc["atoms"] = [dict(zip(("location", "mass", "psi_re", "psi_im"),
                                     (_json_val(v) for v in row))) for row in _atom_rows(atoms)]
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    if atoms is not None:
        buf.write("# atom,location,mass,psi_re,psi_im\n")
        for row in _atom_rows(atoms):
            buf.write("# atom," + ",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ------------------------------------------------------------------ commands

def _atoms_for(p: Problem, grid, delta):
    """Atoms at +-lam for simple singular values lam inside the grid range."""
    lo, hi = float(np.min(grid)), float(np.max(grid))
    top = max(abs(lo), abs(hi))
    if top <= 0 or not p.potential.scalar:
        return []
    bottom = 0.0 if lo <= 0 <= hi else min(abs(lo), abs(hi))
    try:
        pos = find_atoms(p, (max(bottom, 0.05), top), delta)
    except (NoConvergence, ValueError):
        return []
    from .spectral import detect_atom

    out = []
    for a in pos:
        if lo <= a.location <= hi:
            out.append(a)
        if lo <= -a.location <= hi:
            neg = detect_atom(p, -a.location, delta)
            if neg is not None:
                out.append(neg)
    return sorted(out, key=lambda a: a.location)


def cmd_mfunc(p, args):
    rs = GridSpec.parse(args.grid).points()
    if math.sin(args.theta) == 0:
        raise ConfigError("the ray must leave the real axis (theta not a multiple of pi)")
    rows = _fan_out(partial(_row_mfunc, p, args.theta, args.tol), list(rs), args.jobs)
    cols = ["lam_re", "lam_im", "m11_re", "m11_im", "m12_re", "m12_im", "m21_re", "m21_im",
            "m22_re", "m22_im", "disk_radius", "b_used", "flag"]
    return cols, rows, None


def cmd_density(p, args):
    ss = GridSpec.parse(args.grid).points()
    rows = _fan_out(partial(_row_density, p, _schedule(args.eps)), list(ss), args.jobs)
    return ["s", "d11", "d12_re", "d12_im", "d22", "err_est", "flag"], rows, None


def cmd_pair(p, args):
    ss = GridSpec.parse(args.grid).points()
    eps = _schedule(args.eps)
    atoms = _atoms_for(p, ss, _schedule(args.delta))
    wins = exclusion_windows(atoms, eps)
    keep = [s for s in ss if not any(lo < s < hi for lo, hi in wins)]
    rows = _fan_out(partial(_row_pair, p, eps), keep, args.jobs)
    return ["s", "nu_density", "psi_re", "psi_im", "err_est", "flag"], rows, atoms


def cmd_atoms(p, args):
    ss = GridSpec.parse(args.grid).points()
    atoms = _atoms_for(p, ss, _schedule(args.delta))
    return ["location", "mass", "psi_re", "psi_im"], _atom_rows(atoms), None


def cmd_asympt(p, args):
    rs = GridSpec.parse(args.grid).points()
    if rs.min() <= 0:
        raise ConfigError("asymptotic radii must be positive")
    blocks = _fan_out(partial(_row_asympt, p, _schedule(args.eps)), list(rs), args.jobs)
    rows = [row for blk in blocks for row in blk]
    return ["r", "sign", "power", "nu_ratio", "offdiag_re", "offdiag_im", "expected"], rows, None


def cmd_check(p, args):
    from . import checks

    if args.hook_wrong_k:
        checks.break_k_branch()
    results = checks.run_suite(p, fast=args.fast)
    rows = [[r.name, r.defect, r.tol, r.passed, r.detail] for r in results]
    return ["check", "defect", "tol", "passed", "detail"], rows, None


COMMANDS = {"mfunc": cmd_mfunc, "density": cmd_density, "pair": cmd_pair, "atoms": cmd_atoms,
            "asympt": cmd_asympt, "check": cmd_check}

DEFAULT_GRID = {"mfunc": "0.5:50:20", "density": "0.25:25:25", "pair": "0.25:25:25",
                "atoms": "0.05:10:2", "asympt": "100:1000:2", "check": "0:1:2"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="weylpair", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--problem", help="JSON problem file (default: q = 0, alpha = 0)")
    ap.add_argument("--out", help="output path (default: stdout)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--grid", help="start:stop:count[:lin|sqrt]")
    ap.add_argument("--tol", type=float, default=1e-8, help="M-function tolerance")
    ap.add_argument("--eps", default=",".join(map(str, EPS_SEQ)), help="Stieltjes schedule")
    ap.add_argument("--delta", default=",".join(map(str, DELTA_SEQ)), help="atom schedule")
    ap.add_argument("--theta", type=float, default=math.pi / 3, help="ray angle for mfunc")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--fast", action="store_true", help="check: skip the asymptotic sweep")
    ap.add_argument("--hook-wrong-k", action="store_true", help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if not args.tol > 0:
            raise ConfigError("tolerance must be positive")
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        p = load_problem(args.problem) if args.problem else Problem()
        if args.grid is None:
            args.grid = DEFAULT_GRID[args.command]
        cols, rows, atoms = COMMANDS[args.command](p, args)
    except (ConfigError, SingularMatrix, ValueError) as exc:
        print(f"weylpair: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(render(args.format, args.command, p, cols, rows, atoms), args.out)
    if args.command == "check":
        return EXIT_OK if all(r[3] for r in rows) else EXIT_CHECK
    flags = [r[-1] for r in rows if isinstance(r[-1], str)]
    return EXIT_NOCONV if "no_convergence" in flags else EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
