"""Simple singular values of H and the distinguished solution of -e'' + q e = lam conj(e)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .linalg import EPS, BoundaryParam
from .model import Problem, StepPolicy
from .propagator import System, _initial_block, make_grid, matrix_system, transfer_matrices
from .spectral import Atom
from .weyl import tail_start

SCAN_STEP = 0.05
MATCH_TOL = 1e-6
DECAY_RATIO = 1e-6
ELL_FLOOR = 1e-10
TAIL_DEPTH = math.log(1e13)
X_MATCH = 1.0


class NoEigenvalue(ValueError):
    pass


class Degenerate(ValueError):
    pass


class NotAnEigenvalue(ValueError):
    pass


class ZeroEll(ArithmeticError):
    pass


@dataclass(frozen=True)
class DistinguishedSolution:
    lam: float
    xs: np.ndarray
    e: np.ndarray
    de: np.ndarray
    norm_defect: float
    ell: complex
    mismatch: float = 0.0

    @property
    def samples(self):
        return list(zip(self.xs.tolist(), self.e.tolist()))


# ------------------------------------------------------------------ systems

def _robin_real(a: complex):
    """Real 2x2 form of multiplication by a on (Re, Im)."""
    return np.array([[a.real, -a.imag], [a.imag, a.real]])


def realified_system(p: Problem) -> System:
    """e = u + i v turns the antilinear equation into a real linear 4-system."""
    pot = p.potential
    if not pot.scalar:
        raise ValueError("the antilinear equation needs a scalar potential")

    def coef(x, side, lam):
        q = pot.q(x, side)
        lam = float(np.real(lam))
        K = np.empty((q.shape[0], 2, 2), dtype=complex)
        K[:, 0, 0] = q.real - lam
        K[:, 0, 1] = -q.imag
        K[:, 1, 0] = q.imag
        K[:, 1, 1] = q.real + lam
        return K

    # data at 0 spanning e' + alpha e = 0 (e = 0 for alpha = inf)
    if p.alpha.is_inf:
        S, C = np.zeros((2, 2)), np.eye(2)
    else:
        S, C = np.eye(2), -_robin_real(complex(p.alpha.value))
    return System(2, np.eye(2), coef, S.astype(complex), C.astype(complex),
                  pot.breakpoints(), pot.domain)


def _left_block(sys: System, realified: bool):
    if realified:
        return np.vstack([sys.S, sys.C])
    return _initial_block(sys)[:, : sys.n].copy()


def _tail_coef(sys: System, lam, q_inf, realified: bool):
    if realified:
        q = complex(q_inf)
        return np.array([[q.real - lam, -q.imag], [q.imag, q.real + lam]], dtype=complex)
    Q = np.array([[0, q_inf], [np.conj(q_inf), 0]], dtype=complex)
    return EPS @ (Q - lam * np.eye(2))


def _decaying_block(K, osc_tol: float = 1e-10):
    """Cauchy data of the modes exp(-sqrt(mu) x) of F'' = K F with Re sqrt(mu) > 0."""
    mu, W = np.linalg.eig(K)
    cols, rates = [], []
    for m, w in zip(mu, W.T):
        r = np.sqrt(complex(m))
        if r.real <= osc_tol * max(1.0, abs(r)):
            continue
        cols.append(np.concatenate([w, -r * w]))
        rates.append(r.real)
    if not cols:
        return np.zeros((2 * K.shape[0], 0), complex), 0.0
    return np.array(cols).T, min(rates)


def _right_robin_block(sys: System, beta: BoundaryParam, realified: bool):
    n = sys.n
    Y = np.zeros((2 * n, n), dtype=complex)
    if beta.is_inf:
        Y[n:] = np.eye(n)
        return Y
    b = complex(beta.value)
    B = _robin_real(b) if realified else np.diag([b.conjugate(), b])
    Y[:n] = np.eye(n)
    Y[n:] = -B
    return Y


# ------------------------------------------------------------------ matching

def _orth_path(T_seq, Y0):
    """Orthonormal bases V_k along the steps T_seq[0], T_seq[1], ... and factors R_k
    with T_seq[k] V_k = V_{k+1} R_k."""
    N = T_seq.shape[0]
    _, Us, Rs = _kernels.backward_sweep(T_seq[::-1], Y0, keep=True)
    return Us[::-1], Rs[::-1] if N else Rs[:0]


def _walk_back(Rs, c_end):
    """Coefficients c_k with c_{k+1} = R_k c_k, given the last one."""
    N = Rs.shape[0]
    out = np.zeros((N + 1, c_end.size), dtype=complex)
    out[N] = c_end
    for k in range(N - 1, -1, -1):
        out[k] = np.linalg.solve(Rs[k], out[k + 1])
    return out


@dataclass
class _Match:
    sv: np.ndarray
    left: tuple
    right: tuple
    x_m: float
    rate: float


def _geometry(p: Problem, sys: System, lam: float, realified: bool):
    """(x_match, right end, right Cauchy block, slowest decay rate)."""
    if p.compact:
        b = float(p.potential.domain)
        return 0.5 * b, b, _right_robin_block(sys, p.beta, realified), math.inf
    tail = p.potential.tail()
    b0 = tail_start(p.potential)
    if tail is None or b0 is None:
        raise NoEigenvalue("no tail information for the decay condition")
    K = _tail_coef(sys, lam, tail[1], realified)
    Yb, rate = _decaying_block(K)
    x_m = min(X_MATCH, b0)
    depth = TAIL_DEPTH / rate if rate > 0 else 0.0
    b = b0 + min(depth, 200.0)
    return x_m, b, Yb, rate


def _match(p: Problem, sys: System, lam: float, realified: bool, policy: StepPolicy,
           keep: bool = False) -> _Match:
    x_m, b, Yb, rate = _geometry(p, sys, lam, realified)
    n = sys.n
    Y0 = _left_block(sys, realified)
    if x_m > 0:
        nodes_l = make_grid(sys, lam, x_m, policy)
        T_l, _ = transfer_matrices(sys, lam, nodes_l)
    else:
        nodes_l, T_l = np.array([0.0]), np.zeros((0, 2 * n, 2 * n), complex)
    VL, RL = _orth_path(T_l, Y0)
    if Yb.shape[1] == 0:
        WR, RR, nodes_r = np.zeros((1, 2 * n, 0), complex), None, np.array([b])
    else:
        full = make_grid(sys, lam, b, policy, extra=(x_m,))
        nodes_r = full[np.searchsorted(full, x_m):]
        T_full, _ = transfer_matrices(sys, lam, full, reverse=True)
        T_r = T_full[np.searchsorted(full, x_m):][::-1]  # steps from b down to x_m
        WR, RR = _orth_path(T_r, Yb)
    A = np.hstack([VL[-1], -WR[-1]])
    if realified:
        A = A.real
    sv = np.linalg.svd(A, compute_uv=False)
    m = _Match(sv, (nodes_l, VL, RL), (nodes_r, WR, RR), x_m, rate)
    if keep:
        _, _, Vh = np.linalg.svd(A)
        m.null = Vh[-1].conj()
    return m


def mismatch(p: Problem, lam: float, policy: StepPolicy | None = None) -> float:
    """Smallest singular value of the stacked left/right orthonormal bases at the match point."""
    sys = realified_system(p)
    return float(_match(p, sys, float(lam), True, policy or p.step).sv[-1])


# ------------------------------------------------------------------ search

def find_simple_singular_values(p: Problem, search_interval, step: float = SCAN_STEP,
                                policy: StepPolicy | None = None, tol: float = MATCH_TOL):
    """Simple eigenvalues of |H| in the interval, by scanning the mismatch and refining minima."""
    lo, hi = (float(v) for v in search_interval)
    if not 0 < lo < hi:
        raise ValueError("search interval must satisfy 0 < lo < hi")
    policy = policy or p.step
    sys = realified_system(p)
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    grid = np.linspace(lo, hi, n)
    vals = np.array([_match(p, sys, lam, True, policy).sv[-1] for lam in grid])
    found = []
    for i in range(n):
        left = vals[i - 1] if i > 0 else math.inf
        right = vals[i + 1] if i < n - 1 else math.inf
        if not (vals[i] <= left and vals[i] < right):
            continue
        a, c = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
        res = minimize_scalar(lambda t: _match(p, sys, t, True, policy).sv[-1],
                              bounds=(a, c), method="bounded",
                              options={"xatol": 1e-13 * max(1.0, abs(grid[i]))})
        sv = _match(p, sys, float(res.x), True, policy).sv
        if sv[-1] > tol:
            continue
        if sv[-2] <= tol:
            raise Degenerate(f"flat mismatch zero near {res.x:.12g}")
        lam = float(res.x)
        if not p.compact and _decay_ratio(p, lam, policy) > DECAY_RATIO:
            continue
        if not any(abs(lam - f) < 1e-8 * max(1, lam) for f in found):
            found.append(lam)
    if not found:
        raise NoEigenvalue(f"no simple singular value in [{lo}, {hi}]")
    return found


# ------------------------------------------------------------------ solutions

def _assemble(m: _Match, n: int):
    """Cauchy data of the matched solution on the combined grid, left to right."""
    k = m.left[1].shape[2]
    cl, cr = m.null[:k], m.null[k:]
    nodes_l, VL, RL = m.left
    coeff_l = _walk_back(RL, cl)
    Yl = np.einsum("kij,kj->ki", VL, coeff_l)
    nodes_r, WR, RR = m.right  # nodes_r runs from x_m up to b; WR from b down to x_m
    if RR is None:
        return nodes_l, Yl
    coeff_r = _walk_back(RR, cr)
    Yr = np.einsum("kij,kj->ki", WR, coeff_r)[::-1]
    return np.concatenate([nodes_l, nodes_r[1:]]), np.vstack([Yl, Yr[1:]])


def _corrected_trapezoid(xs, g, dg):
    h = np.diff(xs)
    return np.sum(0.5 * h * (g[:-1] + g[1:])) + np.sum(h * h / 12 * (dg[:-1] - dg[1:]))


def _l2(xs, f, df):
    """|f|^2 integrated by the derivative-corrected trapezoid rule, and an error estimate
    from the same rule on every other node."""
    g = np.abs(f) ** 2
    dg = 2 * np.real(np.conj(f) * df)
    fine = _corrected_trapezoid(xs, g, dg)
    sub = np.r_[np.arange(0, xs.size, 2), [xs.size - 1] if xs.size % 2 == 0 else []].astype(int)
    coarse = _corrected_trapezoid(xs[sub], g[sub], dg[sub])
    return fine, abs(fine - coarse)


def ell_of(alpha: BoundaryParam, e0: complex, de0: complex) -> complex:
    if alpha.is_inf:
        return complex(de0)
    a = complex(alpha.value)
    return (a.conjugate() * de0 - e0) / math.sqrt(1 + abs(a) ** 2)


def _canonical_sign(ell: complex) -> int:
    return 1 if (ell.real > 0 or (ell.real == 0 and ell.imag > 0)) else -1


def _normalised(p, xs, e, de):
    nrm2, corr = _l2(xs, e, de)
    s = 1 / math.sqrt(nrm2)
    e, de = e * s, de * s
    ell = ell_of(p.alpha, e[0], de[0])
    sgn = _canonical_sign(ell)
    return e * sgn, de * sgn, ell * sgn, corr / nrm2


def distinguished_solution(p: Problem, lam: float, policy: StepPolicy | None = None,
                           tol: float = MATCH_TOL) -> DistinguishedSolution:
    """The normalised solution e of the antilinear equation at a simple singular value."""
    lam = float(lam)
    if not lam > 0:
        raise ValueError("lam must be positive")
    policy = policy or p.step
    sys = realified_system(p)
    m = _match(p, sys, lam, True, policy, keep=True)
    if m.sv[-1] > tol:
        raise NotAnEigenvalue(f"mismatch {m.sv[-1]:.3e} at {lam}")
    if m.sv[-2] <= tol:
        raise Degenerate("two-dimensional solution space")
    xs, Y = _assemble(m, 2)
    e = Y[:, 0].real + 1j * Y[:, 1].real
    de = Y[:, 2].real + 1j * Y[:, 3].real
    e, de, ell, defect = _normalised(p, xs, e, de)
    return DistinguishedSolution(lam, xs, e, de, defect, complex(ell), float(m.sv[-1]))


def distinguished_via_matrix(p: Problem, lam: float, policy: StepPolicy | None = None,
                             tol: float = MATCH_TOL) -> DistinguishedSolution:
    """Same solution from the eigenvector F of the hermitised system: conj(f2) = e^{i t} f1
    and e = sqrt(2) e^{-i t/2} conj(f1)."""
    lam = float(lam)
    policy = policy or p.step
    sys = matrix_system(p)
    m = _match(p, sys, lam, False, policy, keep=True)
    if m.sv[-1] > tol:
        raise NotAnEigenvalue(f"mismatch {m.sv[-1]:.3e} at {lam}")
    xs, Y = _assemble(m, 2)
    f1, f2, df1 = Y[:, 0], Y[:, 1], Y[:, 2]
    j = int(np.argmax(np.abs(f1)))
    phase = np.conj(f2[j]) / f1[j]
    phase /= abs(phase)
    rot = math.sqrt(2) * np.exp(-0.5j * np.angle(phase))
    e, de = rot * np.conj(f1), rot * np.conj(df1)
    e, de, ell, defect = _normalised(p, xs, e, de)
    return DistinguishedSolution(lam, xs, e, de, defect, complex(ell), float(m.sv[-1]))


def _decay_ratio(p: Problem, lam: float, policy: StepPolicy) -> float:
    sys = realified_system(p)
    m = _match(p, sys, lam, True, policy, keep=True)
    xs, Y = _assemble(m, 2)
    g = Y[:, 0].real ** 2 + Y[:, 1].real ** 2
    b = xs[-1]
    far = xs >= 0.5 * b
    near = xs <= 0.5 * b
    if far.sum() < 2 or near.sum() < 2:
        return 0.0
    return math.sqrt(np.trapezoid(g[far], xs[far]) / max(np.trapezoid(g[near], xs[near]), 1e-300))


def antilinear_residual(p: Problem, d: DistinguishedSolution) -> float:
    """max |-e'' + q e - lam conj(e)| with e'' from a five-point difference of e'."""
    xs, e, de = d.xs, d.e, d.de
    h = np.diff(xs)
    worst = 0.0
    for i in range(2, xs.size - 2):
        hs = h[i - 2: i + 2]
        if np.ptp(hs) > 1e-9 * hs[0]:
            continue
        hh = hs[0]
        d2 = (de[i - 2] - 8 * de[i - 1] + 8 * de[i + 1] - de[i + 2]) / (12 * hh)
        q = p.potential.q(np.array([xs[i]]))[0]
        worst = max(worst, abs(-d2 + q * e[i] - d.lam * np.conj(e[i])))
    return worst


def boundary_defect(p: Problem, d: DistinguishedSolution) -> float:
    if p.alpha.is_inf:
        return abs(d.e[0])
    return abs(d.de[0] + complex(p.alpha.value) * d.e[0])


def pair_at_eigenvalue(d: DistinguishedSolution, floor: float = ELL_FLOOR) -> Atom:
    """nu({lam}) = |ell|^2 / 2 and psi(lam) = conj(ell^2) / |ell|^2."""
    a2 = abs(d.ell) ** 2
    if a2 <= floor:
        raise ZeroEll(f"|ell|^2 = {a2:.3e}")
    return Atom(d.lam, 0.5 * a2, complex(np.conj(d.ell ** 2) / a2))


def same_up_to_sign(d1: DistinguishedSolution, d2: DistinguishedSolution) -> float:
    """max |e1 - s e2| over common nodes, minimised over s = +-1."""
    if d1.xs.shape != d2.xs.shape or np.max(np.abs(d1.xs - d2.xs)) > 1e-12:
        e2 = np.interp(d1.xs, d2.xs, d2.e.real) + 1j * np.interp(d1.xs, d2.xs, d2.e.imag)
    else:
        e2 = d2.e
    return float(min(np.max(np.abs(d1.e - e2)), np.max(np.abs(d1.e + e2))))
