"""Fundamental systems of -E F'' + Q F = lam F and their propagation."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .linalg import EPS, P_MINUS, P_PLUS, BoundaryParam, boundary_matrices, fro
from .model import Problem, StepPolicy


class StepUnderflow(RuntimeError):
    pass


class ZeroK(ValueError):
    pass


@dataclass(frozen=True)
class System:
    """F'' = coef(x, side, lam) F with n x n blocks, Cauchy data (S, -E C), (C, E S)."""

    n: int
    E: np.ndarray
    coef: Callable
    S: np.ndarray
    C: np.ndarray
    breakpoints: tuple = ()
    domain: float = math.inf


def matrix_system(p: Problem) -> System:
    S, C, _ = boundary_matrices(p.alpha)
    Qf = p.potential.Q

    def coef(x, side, lam):
        return np.einsum("ij,njk->nik", EPS, Qf(x, side) - lam * np.eye(2))

    return System(2, EPS, coef, S, C, p.potential.breakpoints(), p.potential.domain)


def scalar_system(potential, alpha) -> System:
    """1x1 version: -f'' + q f = lam f, phi(0)=sin g, phi'(0)=-cos g."""
    alpha = BoundaryParam.of(alpha)
    if alpha.is_inf:
        s, c = 0.0, 1.0
    else:
        a = complex(alpha.value)
        if a.imag != 0:
            raise ValueError("scalar theory needs real alpha")
        r = math.hypot(1.0, a.real)
        s, c = 1.0 / r, a.real / r

    def coef(x, side, lam):
        return (potential.q(x, side) - lam)[:, None, None]

    one = np.ones((1, 1), complex)
    return System(1, one, coef, s * one, c * one, potential.breakpoints(), potential.domain)


# ------------------------------------------------------------------ grids

def make_grid(sys: System, lam: complex, x_end: float, policy: StepPolicy, extra=()):
    """Nodes in [0, x_end] with spacing <= policy.h(lam), hitting breakpoints and extras."""
    if x_end < 0 or x_end > sys.domain * (1 + 1e-14):
        raise ValueError("target outside the domain")
    h = policy.h(lam)
    if not h > 0:
        raise StepUnderflow("non-positive step")
    fixed = {0.0, float(x_end)}
    fixed.update(float(b) for b in sys.breakpoints if 0 < b < x_end)
    fixed.update(float(e) for e in extra if 0 <= e <= x_end)
    fixed = sorted(fixed)
    pieces = [np.array([0.0])]
    for a, b in zip(fixed[:-1], fixed[1:]):
        k = max(1, int(math.ceil((b - a) / h - 1e-9)))
        pieces.append(np.linspace(a, b, k + 1)[1:])
    nodes = np.concatenate(pieces)
    if nodes.size > 5e7:
        raise StepUnderflow("grid too large")
    return nodes


def transfer_matrices(sys: System, lam: complex, nodes, reverse: bool = False):
    """RK4 one-step propagators; reverse=True gives the steps from right to left."""
    x0, x1 = nodes[:-1], nodes[1:]
    h = x1 - x0
    n = sys.n
    N = h.size
    K0 = sys.coef(x0, 1, lam)
    Km = sys.coef(0.5 * (x0 + x1), 1, lam)
    K1 = sys.coef(x1, -1, lam)

    def gen(K):
        A = np.zeros((N, 2 * n, 2 * n), dtype=complex)
        A[:, :n, n:] = np.eye(n)
        A[:, n:, :n] = K
        return A

    if reverse:
        return _kernels.rk4_transfer(-h, gen(K1), gen(Km), gen(K0)), h
    return _kernels.rk4_transfer(h, gen(K0), gen(Km), gen(K1)), h


# ------------------------------------------------------------------ states

@dataclass(frozen=True)
class FundamentalState:
    """Cauchy data at x; the true matrices are the stored ones times exp(log_scale)."""

    x: float
    lam: complex
    Phi: np.ndarray
    dPhi: np.ndarray
    Theta: np.ndarray
    dTheta: np.ndarray
    log_scale: float = 0.0

    def unscaled(self) -> "FundamentalState":
        f = math.exp(self.log_scale)
        return FundamentalState(self.x, self.lam, self.Phi * f, self.dPhi * f,
                                self.Theta * f, self.dTheta * f, 0.0)


def initial_state(alpha, lam: complex) -> FundamentalState:
    S, C, _ = boundary_matrices(alpha)
    return FundamentalState(0.0, complex(lam), S, -EPS @ C, C, EPS @ S)


def _initial_block(sys: System):
    n = sys.n
    Y = np.zeros((2 * n, 2 * n), dtype=complex)
    Y[:n, :n] = sys.S
    Y[n:, :n] = -sys.E @ sys.C
    Y[:n, n:] = sys.C
    Y[n:, n:] = sys.E @ sys.S
    return Y


def sweep_forward(sys: System, lam, x_end, policy, cols="both", gram=False, record=()):
    """Propagate the fundamental block from 0 to x_end.

    cols selects 'both' ([Phi Theta]) or 'phi'. Returns (Y, logscale, gram, recY, reclog, nodes).
    """
    rec_x = np.asarray(sorted(set(float(r) for r in record)))
    nodes = make_grid(sys, lam, x_end, policy, extra=rec_x)
    T, h = transfer_matrices(sys, lam, nodes)
    Y0 = _initial_block(sys)
    if cols == "phi":
        Y0 = Y0[:, : sys.n].copy()
    idx = np.searchsorted(nodes, rec_x) if rec_x.size else np.zeros(0, np.int64)
    Y, logs, G, recY, recL = _kernels.forward_sweep(T, Y0, h, sys.n, gram, idx)
    return Y, logs, G, recY, recL, rec_x


def _state_from_block(Y, n, x, lam, logs):
    return FundamentalState(float(x), complex(lam), Y[:n, :n].copy(), Y[n:, :n].copy(),
                            Y[:n, n:].copy(), Y[n:, n:].copy(), float(logs))


def propagate(p: Problem, lam: complex, x_target: float, policy: StepPolicy | None = None):
    sys = matrix_system(p)
    Y, logs, *_ = sweep_forward(sys, lam, x_target, policy or p.step)
    return _state_from_block(Y, 2, x_target, lam, logs)


def propagate_many(p: Problem, lam: complex, xs, policy: StepPolicy | None = None):
    """States at every x in xs (one sweep)."""
    sys = matrix_system(p)
    xs = np.asarray(xs, dtype=float)
    _, _, _, recY, recL, rx = sweep_forward(sys, lam, float(xs.max()), policy or p.step, record=xs)
    by_x = {float(x): (Y, L) for x, Y, L in zip(rx, recY, recL)}
    out = []
    for x in xs:
        Y, L = by_x[float(x)]
        out.append(_state_from_block(Y, 2, x, lam, L))
    return out


# ------------------------------------------------------------------ right end

def right_block(sys: System, kind: str, B=None):
    """Cauchy data (F(b); F'(b)) spanning solutions with the given right condition.

    kind: 'dirichlet' (F(b)=0), 'robin' (F' + B F = 0), 'decay' (F' = -B F with B the
    principal root, i.e. the decaying modes of a constant tail).
    """
    n = sys.n
    Y = np.zeros((2 * n, n), dtype=complex)
    if kind == "dirichlet":
        Y[n:] = np.eye(n)
    elif kind in ("robin", "decay"):
        Y[:n] = np.eye(n)
        Y[n:] = -np.asarray(B, dtype=complex).reshape(n, n)
    else:
        raise ValueError(kind)
    return Y


def sweep_backward(sys: System, lam, b, policy, Yb, keep=False, extra=()):
    """Orthonormalised backward propagation of the span of Yb from b to 0."""
    nodes = make_grid(sys, lam, b, policy, extra=extra)
    T, _ = transfer_matrices(sys, lam, nodes, reverse=True)
    U0, Us, Rs = _kernels.backward_sweep(T, Yb, keep=keep)
    return U0, Us, Rs, nodes


def m_from_basis(sys: System, U):
    """M from the Cauchy data at 0 of any basis of the right-end solution space."""
    n = sys.n
    X0, dX0 = U[:n], U[n:]
    num = -sys.S @ X0 + sys.C @ sys.E @ dX0
    den = sys.C @ X0 + sys.S @ sys.E @ dX0
    return num @ np.linalg.inv(den)


# ------------------------------------------------------------------ estimates

@dataclass(frozen=True)
class GronwallBound:
    x: float
    bound: float


def k_of(lam: complex) -> complex:
    """Square root of lam in the closed first quadrant (Im lam >= 0), else its mirror."""
    k = cmath.sqrt(complex(lam))
    if complex(lam).imag >= 0:
        return complex(abs(k.real), abs(k.imag))
    return complex(abs(k.real), -abs(k.imag))


def gronwall_bound(case: str, k: complex, normF0: float, q_integral: float, x: float):
    """Right-hand sides of the fixed-value / fixed-derivative Volterra estimates."""
    if k == 0:
        raise ZeroK("k must be nonzero")
    kappa = max(abs(k.real), abs(k.imag))
    core = math.exp(kappa * x) * math.expm1(2.0 / abs(k) * q_integral)
    if case.upper() == "FIXED_VALUE":
        return GronwallBound(x, 2.0 * normF0 * core)
    if case.upper() == "FIXED_DERIVATIVE":
        return GronwallBound(x, 2.0 / abs(k) * normF0 * core)
    raise ValueError(case)


def free_solution(F0, dF0, k: complex, x: float):
    """Free solution with data F(0)=F0, F'(0)=dF0 for lam = k^2."""
    c, ch = cmath.cos(k * x), cmath.cosh(k * x)
    s = cmath.sin(k * x) / k if k != 0 else x
    sh = cmath.sinh(k * x) / k if k != 0 else x
    return (P_PLUS @ F0 * c + P_MINUS @ F0 * ch + P_PLUS @ dF0 * s + P_MINUS @ dF0 * sh)


def large_kappa_model(alpha, kappa: float, x: float):
    """Leading order of exp(-kappa x) Phi(x, 2 i kappa^2)."""
    S, C, _ = boundary_matrices(alpha)
    ep, em = cmath.exp(-1j * kappa * x), cmath.exp(1j * kappa * x)
    lead = 0.5 * (ep * P_PLUS + em * P_MINUS) @ S
    corr = (1j * ep * P_PLUS - em * P_MINUS) @ C / (2 * (kappa + 1j * kappa))
    return lead - corr


def verify_large_kappa(p: Problem, kappa: float, x: float, policy: StepPolicy | None = None):
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    lam = 2j * kappa ** 2
    st = propagate(p, lam, x, policy)
    got = st.Phi * math.exp(st.log_scale - kappa * x)
    ref = large_kappa_model(p.alpha, kappa, x)
    return fro(got - ref) / fro(ref)
