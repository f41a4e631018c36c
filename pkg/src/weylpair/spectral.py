"""Spectral measure from boundary values of M and its (nu, psi) decomposition."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import fro
from .model import Problem
from .weyl import m_radiation

EPS_SEQ = (1e-2, 5e-3, 2.5e-3)
DELTA_SEQ = (1e-2, 5e-3, 2.5e-3)
ATOM_FLOOR = 1e-4
WINDOW = 10.0


class AsymmetricDensity(ValueError):
    pass


class ZeroDensity(ValueError):
    pass


@dataclass(frozen=True)
class SpectralSample:
    s: float
    nu_density: float
    psi: complex | None
    err_est: float
    flag: str = "ok"


@dataclass(frozen=True)
class Atom:
    location: float
    nu_mass: float
    psi_value: complex


def extrapolate_zero(xs, values):
    """Neville extrapolation of values(x) to x = 0 through every point.

    The error estimate compares with the two-point linear extrapolant from the
    two smallest x, which bounds the tableau's last correction.
    """
    xs = [float(x) for x in xs]
    vals = [np.asarray(v, dtype=complex) for v in values]
    n = len(xs)
    if n < 2:
        raise ValueError("need at least two points")
    P = list(vals)
    for level in range(1, n):
        P = [(xs[i + level] * P[i] - xs[i] * P[i + 1]) / (xs[i + level] - xs[i])
             for i in range(n - level)]
    full = P[0]
    x1, x2 = xs[-2], xs[-1]
    lin = (x1 * vals[-1] - x2 * vals[-2]) / (x1 - x2)
    return full, float(np.linalg.norm(np.atleast_1d(full - lin)))


def stieltjes_density(p: Problem, lam: float, eps_seq=EPS_SEQ):
    """((1/pi) Im M(lam + i0) extrapolated from lam + i eps, error estimate)."""
    lam = float(lam)
    eps_seq = sorted((float(e) for e in eps_seq), reverse=True)
    if len(eps_seq) < 2:
        raise ValueError("eps_seq needs at least two entries")
    dens, tails = [], []
    for e in eps_seq:
        M, _, tail = m_radiation(p, lam + 1j * e)
        dens.append((M - M.conj().T) / (2j * math.pi))
        tails.append(tail)
    est, err = extrapolate_zero(eps_seq, dens)
    est = 0.5 * (est + est.conj().T)
    return est, err + max(tails) / math.pi


def decompose_pair(density, tol: float = 1e-3, floor: float = 1e-10):
    """(nu density, psi) from a 2x2 density; psi is None when nu is below floor."""
    d = np.asarray(density, dtype=complex)
    nu = float(0.5 * (d[0, 0] + d[1, 1]).real)
    if abs(d[0, 0] - d[1, 1]) > tol * (1 + abs(nu)):
        raise AsymmetricDensity(f"diagonal mismatch {abs(d[0, 0] - d[1, 1]):.3e}")
    if nu <= floor:
        raise ZeroDensity(f"nu density {nu:.3e} below floor")
    return nu, complex(d[0, 1] / nu)


def sample_pair(p: Problem, s: float, eps_seq=EPS_SEQ, floor: float = 1e-8) -> SpectralSample:
    d, err = stieltjes_density(p, s, eps_seq)
    try:
        nu, psi = decompose_pair(d, tol=max(1e-3, 10 * err), floor=floor)
    except ZeroDensity:
        nu = float(0.5 * (d[0, 0] + d[1, 1]).real)
        return SpectralSample(float(s), nu, None, err, "zero_density")
    except AsymmetricDensity:
        nu = float(0.5 * (d[0, 0] + d[1, 1]).real)
        return SpectralSample(float(s), nu, complex(d[0, 1] / nu) if nu else None, err,
                              "asymmetric")
    return SpectralSample(float(s), nu, psi, err / max(nu, 1e-300) + err)


def detect_atom(p: Problem, lam: float, delta_seq=DELTA_SEQ, floor: float = ATOM_FLOOR):
    """Point mass at lam from -i delta M(lam + i delta) as delta -> 0, or None."""
    lam = float(lam)
    ds = sorted((float(d) for d in delta_seq), reverse=True)
    vals = []
    for d in ds:
        M, _, _ = m_radiation(p, lam + 1j * d)
        vals.append(-1j * d * M)
    mass, _ = extrapolate_zero(ds, vals)
    mass = 0.5 * (mass + mass.conj().T)
    nu = float(0.5 * np.trace(mass).real)
    if 2 * nu <= floor:
        return None
    return Atom(lam, nu, complex(mass[0, 1] / nu))


def exclusion_windows(atoms, eps_seq=EPS_SEQ):
    w = WINDOW * max(eps_seq)
    return [(a.location - w, a.location + w) for a in atoms]


def spectral_pair(p: Problem, grid, atoms=(), eps_seq=EPS_SEQ):
    """a.c. samples on grid (skipping atom windows) and the given atoms."""
    wins = exclusion_windows(atoms, eps_seq)
    out = []
    for s in grid:
        if any(lo < s < hi for lo, hi in wins):
            continue
        out.append(sample_pair(p, s, eps_seq))
    return out, list(atoms)


def find_atoms(p: Problem, interval, delta_seq=DELTA_SEQ):
    """Locate simple singular values with the eigensolver, then measure them by e20."""
    from .eigensolver import NoEigenvalue, find_simple_singular_values

    lo, hi = interval
    try:
        locs = find_simple_singular_values(p, (max(lo, 1e-3), hi))
    except NoEigenvalue:
        return []
    found = []
    for lam in locs:
        at = detect_atom(p, lam, delta_seq)
        if at is not None:
            found.append(at)
    return found


def _nu_total(density):
    return float(0.5 * np.trace(density).real)


def distribution_ratio(p: Problem, r: float, sign: int = 1, atoms=(), n0: int = 64,
                       rtol: float = 2e-3, n_max: int = 2048, eps_seq=EPS_SEQ):
    """Sigma([0, r]) (sign > 0) or Sigma([-r, 0]) divided by r^(1/2), or r^(3/2) if alpha = inf.

    Trapezoid rule in t = sqrt(|lam|), doubling the panel count until the
    nu-total settles to rtol. Atoms are added as given.
    """
    sgn = 1.0 if sign > 0 else -1.0
    cache = {}

    def f(t):
        if t not in cache:
            lam = sgn * t * t
            if t == 0:
                cache[t] = np.zeros((2, 2), complex)
            else:
                d, _ = stieltjes_density(p, lam, eps_seq)
                cache[t] = d * 2 * t
        return cache[t]

    R = math.sqrt(r)
    prev = None
    n = n0
    while True:
        ts = np.linspace(0.0, R, n + 1)
        vals = np.array([f(float(t)) for t in ts])
        total = np.trapezoid(vals, ts, axis=0)
        if prev is not None and abs(_nu_total(total) - _nu_total(prev)) <= rtol * abs(
                _nu_total(total)):
            break
        if n >= n_max:
            break
        prev, n = total, 2 * n
    for a in atoms:
        if (0 < sgn * a.location <= r):
            psi = a.psi_value
            total = total + a.nu_mass * np.array([[1, psi], [np.conj(psi), 1]])
    power = 1.5 if p.alpha.is_inf else 0.5
    return total / r ** power


def scalar_to_pair_shift(sigma_samples, omega: float):
    """Spectral pair of H + i omega from the scalar measure sigma of H.

    sigma_samples: iterable of (lam, value, is_atom) for real lam; density values
    at +lam and -lam are paired, a missing partner counts as zero.
    Returns SpectralSample / Atom lists on s >= |omega|.
    """
    dens, atoms = {}, {}
    for lam, val, is_atom in sigma_samples:
        lam = float(lam)
        key = abs(lam)
        bucket = atoms if is_atom else dens
        pair = bucket.setdefault(key, [0.0, 0.0])
        pair[0 if lam >= 0 else 1] += float(val)
    w = float(omega)
    samples, out_atoms = [], []
    for lam, (dp, dm) in sorted(dens.items()):
        if lam == 0:
            continue
        s = math.hypot(lam, w)
        jac = s / lam  # d lam / d s
        nu = 0.5 * (dp + dm) * jac
        pn = ((lam + 1j * w) / (2 * s) * dp - (lam - 1j * w) / (2 * s) * dm) * jac
        samples.append(SpectralSample(s, nu, pn / nu if nu > 0 else None, 0.0,
                                      "ok" if nu > 0 else "zero_density"))
    for lam, (mp, mm) in sorted(atoms.items()):
        s = math.hypot(lam, w)
        if lam == 0:
            mp, mm = mp + mm, 0.0
        nu = 0.5 * (mp + mm)
        pn = (lam + 1j * w) / (2 * s) * mp - (lam - 1j * w) / (2 * s) * mm
        if nu > 0:
            out_atoms.append(Atom(s, nu, pn / nu))
    return samples, out_atoms


def selfadjoint_check(p: Problem, grid, exclude=(), eps_seq=EPS_SEQ):
    """max over grid of |sigma density - (1 + psi) nu density| for real q, real alpha."""
    from .oracles import scalar_sigma_density

    if not p.potential.is_real():
        raise ValueError("needs a real potential")
    if not p.alpha.is_inf and complex(p.alpha.value).imag != 0:
        raise ValueError("needs real alpha")
    worst = 0.0
    for s in grid:
        if any(lo < s < hi for lo, hi in exclude):
            continue
        sig, _ = scalar_sigma_density(p.potential, p.alpha, s, eps_seq, p.step)
        d, _ = stieltjes_density(p, s, eps_seq)
        nu = 0.5 * (d[0, 0] + d[1, 1]).real
        rhs = nu + d[0, 1]  # (1 + psi) nu
        worst = max(worst, abs(sig - rhs))
    return worst


def rank_signature(density, tol: float = 1e-3) -> int:
    """Numerical rank of a PSD 2x2 density relative to its trace."""
    d = 0.5 * (np.asarray(density) + np.asarray(density).conj().T)
    ev = np.linalg.eigvalsh(d)
    scale = max(ev.sum(), 1e-300)
    return int(np.sum(ev > tol * scale))


__all__ = ["SpectralSample", "Atom", "AsymmetricDensity", "ZeroDensity", "stieltjes_density",
           "decompose_pair", "sample_pair", "detect_atom", "spectral_pair", "find_atoms",
           "distribution_ratio", "scalar_to_pair_shift", "selfadjoint_check", "extrapolate_zero",
           "rank_signature", "fro"]
