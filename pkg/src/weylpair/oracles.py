"""Closed-form references: the free operator and scalar self-adjoint m-functions."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import EPS, I2, P_MINUS, P_PLUS, BoundaryParam, SingularMatrix
from .model import StepPolicy, Truncation
from .propagator import k_of, scalar_system
from .weyl import NoConvergence, limit_on, radiating_on


@dataclass(frozen=True)
class FreeCaseParams:
    alpha: BoundaryParam
    k_plus: complex | None = None
    k_minus: complex | None = None

    @classmethod
    def of(cls, alpha) -> "FreeCaseParams":
        alpha = BoundaryParam.of(alpha)
        if alpha.is_inf or alpha.value == 0:
            return cls(alpha)
        a = complex(alpha.value)
        root = math.sqrt(a.real ** 2 + 2 * a.imag ** 2)
        w = (1 + 1j) / 2
        return cls(alpha, w * (a.real + 1j * root), w * (a.real - 1j * root))


def free_m(alpha, lam: complex):
    """M of q = 0 from the explicit rational form in k (first-quadrant k)."""
    alpha = BoundaryParam.of(alpha)
    lam = complex(lam)
    if lam.imag == 0:
        raise SingularMatrix("free_m needs Im lam != 0")
    if lam.imag < 0:
        return free_m(alpha, lam.conjugate()).conj().T
    k = k_of(lam)
    if alpha.is_inf:
        return k * (1j * P_PLUS + P_MINUS)
    if alpha.value == 0:
        return (1j * P_PLUS - P_MINUS) / k
    fp = FreeCaseParams.of(alpha)
    a = complex(alpha.value)
    A = np.diag([a.conjugate(), a])
    B = P_PLUS + 1j * P_MINUS
    num = EPS @ A @ (k * k * I2 - k * B @ A - 1j * I2) + 1j * k * B
    return num / ((k - fp.k_plus) * (k - fp.k_minus))


def free_nu_psi(alpha, lam: float):
    """(nu density, psi) of the absolutely continuous part for real lam != 0."""
    alpha = BoundaryParam.of(alpha)
    lam = float(lam)
    if lam == 0:
        raise ValueError("lam = 0 is a threshold")
    t = abs(lam)
    r = math.sqrt(t)
    if alpha.is_inf:
        nu, psi = r / (2 * math.pi), 1.0 + 0j
    else:
        a = complex(alpha.value)
        w = 1 + abs(a) ** 2
        den = (r * a.real - abs(a) ** 2) ** 2 + t * (r - a.real) ** 2
        if den == 0:  # real alpha = sqrt(lam): the common factor (r - alpha)^2 cancels
            nu, psi = w / (2 * math.pi) * r / (a.real ** 2 + t), 1.0 + 0j
        else:
            nu = w / (2 * math.pi) * r * abs(r - a) ** 2 / den
            psi = (r - a) / (r - a.conjugate())
    return nu, (psi if lam > 0 else -psi)


def free_atoms(alpha):
    """Atoms of the free spectral pair: only for alpha > 0, at +-alpha^2."""
    from .spectral import Atom

    alpha = BoundaryParam.of(alpha)
    if alpha.is_inf:
        return []
    a = complex(alpha.value)
    if a.imag != 0 or a.real <= 0:
        return []
    a = a.real
    m = a * (1 + a * a)
    return [Atom(-a * a, m, 1.0 + 0j), Atom(a * a, m, -1.0 + 0j)]


def free_pair(alpha, lam: float, tol: float = 1e-12):
    """(SpectralSample, Atom or None) at real lam."""
    from .spectral import SpectralSample

    nu, psi = free_nu_psi(alpha, lam)
    atom = next((at for at in free_atoms(alpha) if abs(at.location - lam) <= tol), None)
    return SpectralSample(float(lam), nu, complex(psi), 0.0), atom


# ------------------------------------------------------------------ scalar theory

def _scalar_checks(q, alpha):
    if not q.is_real():
        raise ValueError("scalar oracle needs a real potential")
    return scalar_system(q, alpha)


def scalar_m(q, alpha, lam: complex, tol: float = 1e-8,
             truncation: Truncation = Truncation(), step: StepPolicy = StepPolicy()) -> complex:
    """Limit-point m-function of -f'' + q f with the angle-gamma condition at 0."""
    lam = complex(lam)
    if lam.imag == 0:
        raise SingularMatrix("scalar_m needs Im lam != 0")
    if lam.imag < 0:
        return scalar_m(q, alpha, lam.conjugate(), tol, truncation, step).conjugate()
    sys = _scalar_checks(q, alpha)
    M, _, _ = limit_on(sys, lam, tol, truncation, step, q.tail())
    return complex(M[0, 0])


def scalar_m_radiation(q, alpha, lam: complex, step: StepPolicy = StepPolicy()) -> complex:
    """Scalar m with the decaying tail mode imposed where q has settled."""
    sys = _scalar_checks(q, alpha)
    if q.tail() is None:
        raise NoConvergence("no tail information for the radiation condition")
    M, _, _ = radiating_on(sys, q, complex(lam), step)
    return complex(M[0, 0])


def scalar_sigma_density(q, alpha, lam: float, eps_seq=(1e-2, 5e-3, 2.5e-3),
                         step: StepPolicy = StepPolicy()):
    """(density, err_est) of the scalar spectral measure via Stieltjes inversion."""
    from .spectral import extrapolate_zero

    vals = [scalar_m_radiation(q, alpha, lam + 1j * e, step).imag / math.pi for e in eps_seq]
    est, err = extrapolate_zero(list(eps_seq), [np.array(v) for v in vals])
    return float(np.real(est)), float(err)


def free_scalar_m(alpha, lam: complex) -> complex:
    """Free scalar m: i k (Dirichlet), i/k (Neumann), general real alpha via gamma."""
    alpha = BoundaryParam.of(alpha)
    lam = complex(lam)
    if lam.imag < 0:
        return free_scalar_m(alpha, lam.conjugate()).conjugate()
    k = k_of(lam)
    if alpha.is_inf:
        s, c = 0.0, 1.0
    else:
        a = float(complex(alpha.value).real)
        s, c = 1 / math.hypot(1, a), a / math.hypot(1, a)
    # chi = e^{ikx}: chi'(0)/chi(0) = ik
    z = 1j * k
    return (c * z - s) / (s * z + c)


def marchenko_constant(alpha) -> tuple[float, float]:
    """(limit of sigma([0,r]) / r^p, p) for the scalar measure."""
    alpha = BoundaryParam.of(alpha)
    if alpha.is_inf:
        return 2 / (3 * math.pi), 1.5
    a = float(complex(alpha.value).real)
    return 2 / math.pi * (1 + a * a), 0.5



# ------------------------------------------------------------------ compact interval

def _fd_svals(q, length: float, n: int):
    from scipy.linalg import svdvals

    h = length / (n + 1)
    xs = h * np.arange(1, n + 1)
    H = (np.diag(np.full(n, 2.0)) - np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1))
    H = H.astype(complex) / (h * h) + np.diag(q.q(xs))
    return np.sort(svdvals(H))


def fd_singular_values(q, length: float, count: int = 3, n: int = 400) -> np.ndarray:
    """Smallest singular values of -d^2/dx^2 + q on [0, length], Dirichlet at both ends.

    Dense second-difference matrix at n and 2n+1 interior nodes (h halves), then
    one Richardson step for the O(h^2) error.
    """
    coarse = _fd_svals(q, length, n)[:count]
    fine = _fd_svals(q, length, 2 * n + 1)[:count]
    return (4 * fine - coarse) / 3


# ------------------------------------------------------------------ frozen references

# M for q = (1+i) exp(-x), alpha = 0 at lam = 1+i: Dirichlet truncation at b = 40
# (exp(-2 Im k b) ~ 1e-16) with RK4 step 1e-4; step 2e-4 and b = 30 agree to 1e-12.
M_EXPDECAY_1PI = np.array([
    [-0.01450452557614134 + 0.4205121376726843j, 0.4827983529247657 + 0.35915937596325676j],
    [0.7418584161285698 + 0.05926087820347969j, -0.01450452557615665 + 0.4205121376726653j],
])
