"""Self-check suites: structural identities, cross-relations and asymptotic ratios.

Every check returns a CheckResult with the measured defect and the tolerance it
was held to. ``run_suite`` picks the checks that apply to a problem.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracles
from .linalg import EPS, XI, fro, herglotz_im
from .model import Constant, ExpDecay, Problem, StepPolicy
from .propagator import free_solution, gronwall_bound, propagate, verify_large_kappa
from .spectral import (detect_atom, distribution_ratio, rank_signature, sample_pair,
                       selfadjoint_check, stieltjes_density)
from .weyl import ResolventKernel, m_finite, m_limit, re_m_i

UPPER_LAMS = (1 + 2j, -3 + 0.5j, 0.2 + 1j, 10 + 4j)


@dataclass(frozen=True)
class CheckResult:
    name: str
    defect: float
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.defect <= self.tol)


def _scaled(st):
    f = math.exp(st.log_scale)
    return st.Phi * f, st.dPhi * f, st.Theta * f, st.dTheta * f


def wronskian_check(p: Problem, lam=0.7 + 1.3j, xs=(0.5, 1.0, 3.0)) -> CheckResult:
    """Phi(lam-bar)* eps Theta'(lam) - Phi'(lam-bar)* eps Theta(lam) = I, and 0 for Phi with Phi."""
    worst = 0.0
    for x in xs:
        P1, dP1, T1, dT1 = _scaled(propagate(p, lam, x))
        P2, dP2, _, _ = _scaled(propagate(p, np.conj(lam), x))
        u, du = P2.conj().T, dP2.conj().T
        scale = max(fro(P2) * fro(dT1), fro(dP2) * fro(T1), 1.0)
        w1 = u @ EPS @ dT1 - du @ EPS @ T1
        w0 = u @ EPS @ dP1 - du @ EPS @ P1
        worst = max(worst, fro(w1 - np.eye(2)) / scale, fro(w0) / scale)
    return CheckResult("wronskian", worst, 1e-8)


def herglotz_check(p: Problem, lams=UPPER_LAMS, tol: float = 1e-8) -> CheckResult:
    """Im M > 0 for the problem and for the free reference with the same alpha."""
    worst = -math.inf
    for lam in lams:
        for M in (m_limit(p, lam, tol).M, oracles.free_m(p.alpha, lam)):
            ev = np.linalg.eigvalsh(herglotz_im(M))
            worst = max(worst, -ev.min())
    return CheckResult("herglotz", worst, 0.0, "max over lam of -lambda_min(Im M)")


def conjugation_check(p: Problem, b: float = 6.0) -> CheckResult:
    """M(lam-bar) = M(lam)* for the Dirichlet-truncated problem, computed independently."""
    worst = 0.0
    for lam in UPPER_LAMS:
        a = m_finite(p, lam, b)
        c = m_finite(p, np.conj(lam), b)
        worst = max(worst, fro(c - a.conj().T) / max(fro(a), 1.0))
    return CheckResult("symmetry_conjugate", worst, 1e-9)


def _with_cert(p, lam, tol):
    v = m_limit(p, lam, tol)
    return v.M, v.disk_radius


def transpose_check(p: Problem, tol: float = 1e-8) -> CheckResult:
    """M - Re M(i) = eps (M - Re M(i))^T eps."""
    R = re_m_i(p)
    worst, allow = 0.0, 0.0
    for lam in UPPER_LAMS:
        M, r = _with_cert(p, lam, tol)
        D = M - R
        worst = max(worst, fro(D - EPS @ D.T @ EPS))
        allow = max(allow, 4 * (r + tol))
    return CheckResult("symmetry_transpose", worst, allow)


def reflection_check(p: Problem, tol: float = 1e-8) -> CheckResult:
    """M(lam) - Re M(i) = -xi (M(-lam) - Re M(i)) xi."""
    R = re_m_i(p)
    worst, allow = 0.0, 0.0
    for lam in UPPER_LAMS:
        M1, r1 = _with_cert(p, lam, tol)
        M2, r2 = _with_cert(p, -lam, tol)
        worst = max(worst, fro((M1 - R) + XI @ (M2 - R) @ XI))
        allow = max(allow, 4 * (r1 + r2 + tol))
    return CheckResult("symmetry_reflection", worst, allow)


def parity_check(p: Problem, ss=(1.5, 4.0, 9.0)) -> CheckResult:
    """nu(-s) = nu(s), psi(-s) = -psi(s) within twice the error estimates."""
    worst = 0.0
    for s in ss:
        a, b = sample_pair(p, s), sample_pair(p, -s)
        err = 2 * (a.err_est + b.err_est) + 1e-7
        d = abs(a.nu_density - b.nu_density)
        if a.psi is not None and b.psi is not None:
            d = max(d, abs(a.psi + b.psi))
        worst = max(worst, d / err)
    return CheckResult("parity", worst, 1.0, "defect in units of the error estimate")


def disk_check(p: Problem, ss=(0.5, 2.0, 6.0)) -> CheckResult:
    """|psi| <= 1 + err_est and numerical rank one exactly where |psi| = 1."""
    worst = 0.0
    bad_rank = 0
    for s in ss:
        d, err = stieltjes_density(p, s)
        smp = sample_pair(p, s)
        if smp.psi is None:
            continue
        worst = max(worst, abs(smp.psi) - 1 - smp.err_est)
        rank = rank_signature(d, tol=1e-4)
        if abs(abs(smp.psi) - 1) <= 1e-4 and rank != 1:
            bad_rank += 1
        if abs(smp.psi) < 1 - 1e-2 and rank != 2:
            bad_rank += 1
    return CheckResult("psi_disk", max(worst, 0.0) + bad_rank, 0.0)


def adjoint_check(p: Problem, ss=(0.7, 3.0), tol: float = 1e-5) -> CheckResult:
    """Pipeline on (conj q, conj alpha): same nu, conjugated psi."""
    q = p.adjoint()
    worst = 0.0
    for s in ss:
        a, b = sample_pair(p, s), sample_pair(q, s)
        err = a.err_est + b.err_est + tol
        d = abs(a.nu_density - b.nu_density)
        if a.psi is not None and b.psi is not None:
            d = max(d, abs(np.conj(a.psi) - b.psi))
        worst = max(worst, d / err)
    return CheckResult("adjoint", worst, 1.0, "defect in units of the error estimate")


def selfadjoint_relation_check(p: Problem, grid=None, tol: float = 1e-3) -> CheckResult:
    grid = np.linspace(0.5, 30, 12) if grid is None else grid
    return CheckResult("sigma_equals_1_plus_psi_nu", selfadjoint_check(p, grid), tol)


def _omega(p: Problem):
    """omega when q = (real) + i omega with a known real part, else None."""
    q = p.potential
    if isinstance(q, Constant):
        return complex(q.c).imag
    if isinstance(q, ExpDecay) and complex(q.amplitude).imag == 0 and complex(q.offset).real == 0:
        return complex(q.offset).imag
    return None


def normal_check(p: Problem, omega: float, s_hi: float = 20.0, tol: float = 2e-3):
    """Im psi(s) = omega / s on [|omega| + 0.5, s_hi] and nu = 0 below |omega| - 0.1."""
    w = abs(omega)
    worst = 0.0
    for s in np.linspace(w + 0.5, s_hi, 10):
        smp = sample_pair(p, s)
        worst = max(worst, abs(smp.psi.imag - omega / s) if smp.psi is not None else math.inf)
    gap = 0.0
    if w - 0.1 > 0.05:
        for s in np.linspace(0.05, w - 0.1, 4):
            d, _ = stieltjes_density(p, s)
            gap = max(gap, 0.5 * np.trace(d).real)
    return [CheckResult("normal_im_psi", worst, tol), CheckResult("normal_gap_nu", gap, 1e-4)]


def asymptotic_constant(alpha):
    """Limit of nu([0, r]) / r^p with p = 3/2 (alpha = inf) or 1/2."""
    if alpha.is_inf:
        return 1 / (3 * math.pi), 1.5
    return (1 + abs(complex(alpha.value)) ** 2) / math.pi, 0.5


def asymptotic_check(p: Problem, r: float = 1e3, rtol: float = 0.05, atoms=()) -> CheckResult:
    R = distribution_ratio(p, r, 1, atoms=atoms)
    c, _ = asymptotic_constant(p.alpha)
    nu = 0.5 * np.trace(R).real
    return CheckResult("asymptotic_ratio", abs(nu / c - 1), rtol, f"r={r:g}")


def atom_agreement_check(p: Problem, interval=(0.05, 6.0)) -> CheckResult:
    """Eigensolver atoms against -i delta M(lam + i delta)."""
    from .eigensolver import (NoEigenvalue, distinguished_solution,
                              find_simple_singular_values, pair_at_eigenvalue)

    try:
        lams = find_simple_singular_values(p, interval)
    except NoEigenvalue:
        return CheckResult("atom_agreement", 0.0, 1e-3, "no atoms")
    worst = 0.0
    for lam in lams:
        a = pair_at_eigenvalue(distinguished_solution(p, lam))
        b = detect_atom(p, lam)
        if b is None:
            return CheckResult("atom_agreement", math.inf, 1e-3, f"missed at {lam:g}")
        worst = max(worst, abs(a.nu_mass - b.nu_mass) / a.nu_mass, abs(a.psi_value - b.psi_value))
    return CheckResult("atom_agreement", worst, 1e-3, f"{len(lams)} atom(s)")


def gronwall_check(c: complex, k: complex, xs=(0.5, 1.0, 2.0)) -> CheckResult:
    """|F - F0| against the Volterra bound for Phi (fixed value) and Theta (fixed derivative)."""
    p = Problem(potential=Constant(c=c), alpha=0.0, step=StepPolicy(h_max=2e-3, c=0.02))
    lam = k * k
    worst = -math.inf
    for x in xs:
        P, _, T, _ = _scaled(propagate(p, lam, x))
        qi = p.potential.integral_norm(x)
        P0 = free_solution(np.eye(2), np.zeros((2, 2)), k, x)
        T0 = free_solution(np.zeros((2, 2)), EPS, k, x)
        bv = gronwall_bound("FIXED_VALUE", k, fro(np.eye(2)), qi, x).bound
        bd = gronwall_bound("FIXED_DERIVATIVE", k, fro(EPS), qi, x).bound
        worst = max(worst, fro(P - P0) - bv - 1e-9, fro(T - T0) - bd - 1e-9)
    return CheckResult("gronwall", max(worst, 0.0), 0.0, f"c={c}, k={k}")


def large_kappa_check(kappas=(25.0, 50.0, 100.0), x: float = 1.0) -> CheckResult:
    """Deviation from the leading large-kappa form halves as kappa doubles."""
    p = Problem(potential=ExpDecay(amplitude=1.0, rate=1.0), alpha=0.0,
                step=StepPolicy(h_max=1e-2, c=0.02))
    devs = [verify_large_kappa(p, k, x) for k in kappas]
    ratios = [a / b for a, b in zip(devs, devs[1:])]
    return CheckResult("large_kappa_halving", max(abs(r - 2) for r in ratios), 0.25,
                       "ratios " + ", ".join(f"{r:.4f}" for r in ratios))


def _bump(t):
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-1 / (1 - t[m] ** 2))
    return out


def resolvent_residual_check(p: Problem, lam=1 + 1j, h: float = 5e-3) -> CheckResult:
    """u = int R(., y) F(y) dy must solve -eps u'' + Q u - lam u = F for a smooth bump F."""
    xs = np.arange(0.0, 4.0 + h / 2, h)
    bump = _bump((xs - 2.0) / 1.5)  # support [0.5, 3.5]
    F = np.stack([bump, 1j * bump], axis=1)
    K = ResolventKernel(p, lam, xs).matrix()
    w = np.full(xs.size, h)
    w[0] = w[-1] = h / 2
    G = np.einsum("ijab,jb->ija", K, F)  # integrand R(x_i, y_j) F(y_j)
    u = np.einsum("ija,j->ia", G, w)
    # trapezoid across the kink of the kernel at y = x: Euler-Maclaurin terms for the
    # jumps of the first and third y-derivatives, from one-sided stencils
    d1 = np.array([-25, 48, -36, 16, -3]) / 12.0
    d3 = np.array([-5 / 2, 9, -12, 7, -3 / 2])
    n = xs.size
    for i in range(4, n - 4):
        fwd, bwd = G[i, i + np.arange(5)], G[i, i - np.arange(5)]
        jump1 = (d1 @ fwd + d1 @ bwd) / h
        jump3 = (d3 @ fwd + d3 @ bwd) / h ** 3
        u[i] += h * h / 12 * jump1 - h ** 4 / 720 * jump3
    Q = p.potential.Q(xs)
    stencil = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315,
                        -1 / 560]) / (h * h)
    worst = 0.0
    for i in range(np.searchsorted(xs, 0.25), np.searchsorted(xs, 3.75)):
        d2 = stencil @ u[i - 4: i + 5]
        res = -EPS @ d2 + Q[i] @ u[i] - lam * u[i] - F[i]
        worst = max(worst, float(np.abs(res).max()))
    return CheckResult("resolvent_residual", worst / float(np.abs(F).max()), 1e-5)


def run_suite(p: Problem, fast: bool = False) -> list[CheckResult]:
    """Every check that applies to p."""
    out = [wronskian_check(p), herglotz_check(p), conjugation_check(p),
           transpose_check(p), reflection_check(p)]
    if p.compact:
        return out
    out += [parity_check(p), disk_check(p), adjoint_check(p)]
    if p.potential.is_real() and (p.alpha.is_inf or complex(p.alpha.value).imag == 0):
        out.append(selfadjoint_relation_check(p, np.linspace(0.5, 30, 6 if fast else 12)))
    w = _omega(p)
    if w:
        out += normal_check(p, w)
    if p.potential.scalar:
        out.append(atom_agreement_check(p))
    if not fast:
        out.append(asymptotic_check(p, 1e3, rtol=0.1))
    return out


def break_k_branch():
    """Test hook: make k_of return the wrong square root (lower half plane)."""
    import importlib

    prop = importlib.import_module(".propagator", __package__)

    def wrong(lam):
        return -prop.__dict__["_k_of_orig"](lam)

    if "_k_of_orig" not in prop.__dict__:
        prop._k_of_orig = prop.k_of
    prop.k_of = wrong
    oracles.k_of = wrong

