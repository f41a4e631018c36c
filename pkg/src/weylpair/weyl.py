"""Truncated and limit M-functions, Weyl-disk certificates, resolvent kernel."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .linalg import EPS, I2, INFINITY, P_MINUS, P_PLUS, BoundaryParam, SingularMatrix, fro, \
    mat_inv, solve, sqrt_principal
from .model import Problem
from .propagator import (System, _initial_block, k_of, m_from_basis, make_grid, matrix_system,
                         right_block, sweep_backward, sweep_forward, transfer_matrices)


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class MFunctionValue:
    """M with a certified Frobenius bound on its distance to the limit."""

    lam: complex
    M: np.ndarray
    disk_radius: float
    b_used: float
    certificate: str = "disk"


@dataclass(frozen=True)
class WeylDisk:
    b: float
    lam: complex
    center_estimate: np.ndarray
    radius: float


# ------------------------------------------------------------------ truncated problems

def _right_data(sys: System, lam, right):
    right = BoundaryParam.of(right)
    if right.is_inf:
        return right_block(sys, "dirichlet")
    beta = complex(right.value)
    B = np.diag([beta.conjugate(), beta]) if sys.n == 2 else np.array([[beta]])
    return right_block(sys, "robin", B)


def _m_truncated(sys: System, lam, b, right, policy):
    U0, *_ = sweep_backward(sys, lam, b, policy, _right_data(sys, lam, right))
    return m_from_basis(sys, U0)


def m_finite(p: Problem, lam: complex, b: float, right_bc=None):
    """M on [0, b] with F'(b) + B F(b) = 0 (Dirichlet when right_bc is infinite).

    Computed from the right-end solution space carried backwards to 0, which is
    the same matrix as (Phi' + B Phi)^{-1}(Theta' + B Theta) at b.
    """
    if right_bc is None:
        right_bc = p.beta if p.compact else INFINITY
    return _m_truncated(matrix_system(p), lam, b, right_bc, p.step)


def m_finite_direct(p: Problem, lam: complex, b: float, right_bc=None):
    """Same quantity from forward Cauchy data at b (accurate only for moderate b)."""
    if right_bc is None:
        right_bc = p.beta if p.compact else INFINITY
    sys = matrix_system(p)
    Y, *_ = sweep_forward(sys, lam, b, p.step)
    Phi, Th, dPhi, dTh = Y[:2, :2], Y[:2, 2:], Y[2:, :2], Y[2:, 2:]
    right_bc = BoundaryParam.of(right_bc)
    if right_bc.is_inf:
        return solve(Phi, Th)
    beta = complex(right_bc.value)
    B = np.diag([beta.conjugate(), beta])
    return solve(dPhi + B @ Phi, dTh + B @ Th)


def _gram_min_log(sys, lam, b, policy):
    """log of the smallest eigenvalue of int_0^b Phi* Phi, or None if unresolved."""
    nodes = make_grid(sys, lam, b, policy)
    T, h = transfer_matrices(sys, lam, nodes)
    Y0 = _initial_block(sys)[:, : sys.n]
    S, Minv, logs = _kernels.gram_qr_sweep(T, Y0, h, sys.n)
    S = 0.5 * (S + S.conj().T)
    try:
        W = Minv @ np.linalg.solve(S, Minv.conj().T)
    except np.linalg.LinAlgError:
        return None
    top = np.linalg.eigvalsh(0.5 * (W + W.conj().T))[-1]
    if not top > 0 or not np.isfinite(top):
        return None
    # smallest eigenvalue of K* S K is 1 / largest of K^{-1} S^{-1} K^{-*}
    return -math.log(top) - 2.0 * logs


def _radius_sys(sys, lam, b, policy):
    eta = abs(complex(lam).imag)
    if eta == 0:
        raise SingularMatrix("real lambda has no Weyl disk")
    a = _gram_min_log(sys, lam, b, policy)
    c = _gram_min_log(sys, complex(lam).conjugate(), b, policy)
    if a is None or c is None:
        return math.inf
    # operator-norm radius 1 / (2 eta sqrt(lmin(A) lmin(A~))); sqrt(n) converts to Frobenius
    return math.sqrt(sys.n) * math.exp(-math.log(2 * eta) - 0.5 * (a + c))


def disk_radius(p: Problem, lam: complex, b: float) -> float:
    """Frobenius radius of the matrix ball D(b; lam) about its centre."""
    return _radius_sys(matrix_system(p), lam, b, p.step)


def disk_brute(p: Problem, lam: complex, b: float):
    """Centre and radius by completing the square in the A-integrals directly.

    Loses accuracy once the fundamental solutions grow by more than ~1e6; meant as
    a cross-check of disk_radius at small b.
    """
    sys = matrix_system(p)
    Y, logs, G, *_ = sweep_forward(sys, lam, b, p.step, gram=True)
    G = G * math.exp(2 * logs)
    A11, A12, A22 = G[:2, :2], G[:2, 2:], G[2:, 2:]
    eta = complex(lam).imag
    Gm = A12 - I2 / (2j * eta)
    center = np.linalg.solve(A11, Gm)
    R = Gm.conj().T @ center - A22
    R = 0.5 * (R + R.conj().T)
    ra = np.linalg.eigvalsh(R).max()
    la = np.linalg.eigvalsh(0.5 * (A11 + A11.conj().T)).min()
    return WeylDisk(b, complex(lam), center, math.sqrt(2) * math.sqrt(max(ra, 0.0) / la))


def _decay_rate(sys: System, lam, tail):
    """Slowest decay rate of the L2 solutions of the limiting constant tail."""
    q_inf = 0j if tail is None else tail[1]
    root = tail_root(sys, lam, q_inf)
    return max(float(np.linalg.eigvals(root).real.min()), 1e-12)


def _mirror(v: MFunctionValue) -> MFunctionValue:
    return MFunctionValue(v.lam.conjugate(), v.M.conj().T, v.disk_radius, v.b_used, v.certificate)


def limit_on(sys: System, lam: complex, tol, truncation, policy, tail=None, right=INFINITY):
    """(M, certified distance, b) for the limit-point M of a half-line system, Im lam > 0."""
    need = math.log(max(1e3 / tol, 10.0)) / (2 * _decay_rate(sys, lam, tail))
    b = min(truncation.b_min, max(need, 1.0))
    best = math.inf
    while True:
        M = _m_truncated(sys, lam, b, right, policy)
        best = min(best, _radius_sys(sys, lam, b, policy))
        # M and the limit both lie in the nested disk, so their distance is below its diameter
        if 2 * best <= tol:
            return M, 2 * best, b
        if b >= truncation.b_max:
            raise NoConvergence(f"disk diameter {2 * best:.3e} > tol {tol:.1e} at b={b:g}")
        b = min(b * truncation.growth, truncation.b_max)


def m_limit(p: Problem, lam: complex, tol: float = 1e-8, right_bc=None) -> MFunctionValue:
    """Limit M with a Weyl-disk certificate (Frobenius distance to the limit).

    b runs through b_start * growth^j up to b_max; b_start is b_min unless the
    decay rate of the L2 solutions shows a shorter interval already suffices.
    """
    lam = complex(lam)
    if lam.imag == 0:
        raise SingularMatrix("m_limit needs Im lam != 0")
    if lam.imag < 0:
        return _mirror(m_limit(p, lam.conjugate(), tol, right_bc))
    if p.compact:
        return MFunctionValue(lam, m_finite(p, lam, p.potential.domain), 0.0,
                              p.potential.domain, "exact")
    right = INFINITY if right_bc is None else right_bc
    M, d, b = limit_on(matrix_system(p), lam, tol, p.truncation, p.step,
                       p.potential.tail(), right)
    return MFunctionValue(lam, M, d, b)


# ------------------------------------------------------------------ radiation condition

def tail_start(potential, floor: float = 1e-15) -> float | None:
    """Where the potential is within ``floor`` of its limit; None if unknown."""
    t = potential.tail()
    if t is None:
        return None
    x0, _, rem = t
    if rem(x0) <= floor:
        return x0
    # remainders are monotone decreasing exponentials or zero
    lo, hi = x0, max(2 * x0, x0 + 1.0)
    while rem(hi) > floor:
        lo, hi = hi, 2 * hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if rem(mid) > floor else (lo, mid)
    return hi


def tail_root(sys: System, lam, q_inf):
    """Principal root of the tail coefficient: the decaying modes satisfy F' = -root F."""
    if sys.n == 2:
        K = EPS @ (np.array([[0, q_inf], [np.conj(q_inf), 0]], dtype=complex) - lam * I2)
        return sqrt_principal(K)
    return np.array([[np.sqrt(complex(q_inf - lam))]])


def radiating_on(sys: System, potential, lam, policy, floor=1e-15):
    """(M, b, tail bound) with the decaying modes of the limiting tail imposed at b."""
    b = tail_start(potential, floor)
    _, q_inf, rem = potential.tail()
    Yb = right_block(sys, "decay", tail_root(sys, lam, q_inf))
    U0, *_ = sweep_backward(sys, lam, b, policy, Yb)
    k = abs(k_of(lam))
    return m_from_basis(sys, U0), b, rem(b) / max(k, 1e-3) ** 2


def m_radiation(p: Problem, lam: complex, floor: float = 1e-15):
    """M computed with the decaying modes of the limiting tail imposed at b.

    Exact for potentials that are constant past some point, and within the tail
    remainder otherwise. Stays accurate as Im lam -> 0 where Dirichlet truncation
    would need b ~ 1/Im lam. Returns (M, b, tail_bound).
    """
    lam = complex(lam)
    if p.compact:
        return m_finite(p, lam, p.potential.domain), p.potential.domain, 0.0
    if p.potential.tail() is None:
        v = m_limit(p, lam)
        return v.M, v.b_used, v.disk_radius
    return radiating_on(matrix_system(p), p.potential, lam, p.step, floor)


# ------------------------------------------------------------------ transforms, asymptotics

def m_transform_alpha(M0, alpha):
    alpha = BoundaryParam.of(alpha)
    M0 = np.asarray(M0, dtype=complex)
    if alpha.is_inf:
        return -EPS @ mat_inv(M0) @ EPS
    a = complex(alpha.value)
    eA = EPS @ np.diag([a.conjugate(), a])
    return (eA + M0) @ mat_inv(I2 - eA @ M0)


def m_asymptotic(alpha, lam: complex):
    alpha = BoundaryParam.of(alpha)
    k = k_of(lam)
    N = 1j * P_PLUS - P_MINUS
    if alpha.is_inf:
        return k * (1j * P_PLUS + P_MINUS)
    a = complex(alpha.value)
    w = 1 + abs(a) ** 2
    eA = EPS @ np.diag([a.conjugate(), a])
    second = -w * np.array([[a.real, -a.imag], [a.imag, a.real]])
    return eA + w / k * N + second / k ** 2


@lru_cache(maxsize=64)
def _re_m_i(p: Problem):
    M = m_limit(p, 1j, tol=1e-10).M
    return 0.5 * (M + M.conj().T)


def re_m_i(p: Problem):
    """Re M(i), computed once per (hashable) problem."""
    return _re_m_i(p).copy()


# ------------------------------------------------------------------ resolvent kernel

class ResolventKernel:
    """R(x, y; lam) on a set of points, from one backward and one forward sweep."""

    def __init__(self, p: Problem, lam: complex, points, tol: float = 1e-10):
        lam = complex(lam)
        if lam.imag == 0:
            raise SingularMatrix("resolvent needs Im lam != 0")
        self.p, self.lam = p, lam
        pts = np.unique(np.asarray(points, dtype=float))
        self.points = pts
        sys = matrix_system(p)
        self.sys = sys
        if p.compact:
            b = p.potential.domain
            Yb = _right_data(sys, lam, p.beta)
        else:
            b0 = tail_start(p.potential)
            if b0 is None:
                b = m_limit(p, lam, tol).b_used
                Yb = _right_data(sys, lam, INFINITY)
            else:
                need = math.log(1e3 / tol) / (2 * _decay_rate(sys, lam, p.potential.tail()))
                b = max(b0, pts.max() + need, 1.0)
                Yb = right_block(sys, "decay", tail_root(sys, lam, p.potential.tail()[1]))
        U0, Us, Rs, nodes = sweep_backward(sys, lam, b, p.step, Yb, keep=True, extra=pts)
        self.nodes, self.Us, self.Rs = nodes, Us, Rs
        self.idx = np.searchsorted(nodes, pts)
        # X(x)X(y)^{-1} needs products of R between nodes: keep log-free cumulative inverses
        # per requested point by walking once from the right.
        self._diag = {}
        Uf = self._forward_bases(lam)
        for j, x in zip(self.idx, pts):
            U = Us[j]
            Mstar = U[2:] @ np.linalg.inv(U[:2]) @ EPS
            V = Uf[float(x)]
            Mtil = -V[2:] @ np.linalg.inv(V[:2]) @ EPS
            self._diag[float(x)] = -EPS @ mat_inv(Mstar + Mtil) @ EPS

    def _forward_bases(self, lam):
        """Riccati-invariant forward data of Phi at each point (orthonormalised columns)."""
        sys, pts = self.sys, self.points
        _, _, _, recY, _, rx = sweep_forward(sys, lam, float(pts.max()), self.p.step,
                                             cols="phi", record=pts)
        out = {}
        for x, Y in zip(rx, recY):
            q, _ = np.linalg.qr(Y)
            out[float(x)] = q
        return out

    def _transfer(self, jx, jy):
        """X(x_jx) X(x_jy)^{-1} for jx >= jy."""
        P = I2.copy()
        for j in range(jx - 1, jy - 1, -1):
            P = P @ np.linalg.inv(self.Rs[j])
        Ux, Uy = self.Us[jx], self.Us[jy]
        return Ux[:2] @ P @ np.linalg.inv(Uy[:2])

    def __call__(self, x: float, y: float):
        x, y = float(x), float(y)
        if x >= y:
            jx = self.idx[np.searchsorted(self.points, x)]
            jy = self.idx[np.searchsorted(self.points, y)]
            return self._transfer(jx, jy) @ self._diag[y]
        other = self._conj_kernel()
        return other(y, x).conj().T

    def _conj_kernel(self):
        if not hasattr(self, "_conj"):
            self._conj = ResolventKernel(self.p, self.lam.conjugate(), self.points)
        return self._conj

    def _lower(self):
        """R(x_c, x_a) for c >= a, shape (n, n, 2, 2), zero above the diagonal."""
        n = self.points.size
        out = np.zeros((n, n, 2, 2), dtype=complex)
        for a in range(n):
            ja = self.idx[a]
            rhs = np.linalg.inv(self.Us[ja][:2]) @ self._diag[float(self.points[a])]
            P = I2.copy()
            last = ja
            for c in range(a, n):
                jc = self.idx[c]
                for j in range(last, jc):
                    P = np.linalg.solve(self.Rs[j], P)
                last = jc
                out[c, a] = self.Us[jc][:2] @ P @ rhs
        return out

    def matrix(self):
        """Full kernel on the point set, shape (n, n, 2, 2); entry [i, j] = R(x_i, x_j)."""
        out = self._lower()
        upper = self._conj_kernel()._lower().conj().transpose(1, 0, 3, 2)
        iu = np.triu_indices(self.points.size, 1)
        out[iu] = upper[iu]
        return out


def resolvent_kernel(p: Problem, lam: complex, x: float, y: float):
    return ResolventKernel(p, lam, [x, y])(x, y)
