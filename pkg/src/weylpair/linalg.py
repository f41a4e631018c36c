"""Complex 2x2 helpers and the fixed structural matrices."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

I2 = np.eye(2, dtype=complex)
EPS = np.array([[0, 1], [1, 0]], dtype=complex)
XI = np.array([[1, 0], [0, -1]], dtype=complex)
P_PLUS = 0.5 * np.array([[1, 1], [1, 1]], dtype=complex)
P_MINUS = 0.5 * np.array([[1, -1], [-1, 1]], dtype=complex)

SINGULAR_RTOL = 1e-13


class SingularMatrix(ArithmeticError):
    pass


@dataclass(frozen=True)
class BoundaryParam:
    """Finite complex alpha, or infinity when ``value`` is None."""

    value: complex | None = 0.0

    @property
    def is_inf(self) -> bool:
        return self.value is None

    @classmethod
    def inf(cls) -> "BoundaryParam":
        return cls(None)

    @classmethod
    def of(cls, a) -> "BoundaryParam":
        if isinstance(a, BoundaryParam):
            return a
        if a is None or (isinstance(a, str) and a.lower() in ("inf", "infinity")):
            return cls(None)
        if isinstance(a, (float, int)) and np.isinf(a):
            return cls(None)
        return cls(complex(a))

    def conj(self) -> "BoundaryParam":
        return self if self.is_inf else BoundaryParam(complex(self.value).conjugate())

    def __repr__(self) -> str:
        return "BoundaryParam(inf)" if self.is_inf else f"BoundaryParam({self.value!r})"


INFINITY = BoundaryParam(None)


def fro(a) -> float:
    return float(np.linalg.norm(a))


def mat_mul(a, b):
    return np.asarray(a) @ np.asarray(b)


def mat_inv(a, rtol: float = SINGULAR_RTOL):
    a = np.asarray(a, dtype=complex)
    scale = fro(a)
    det = np.linalg.det(a)
    # det of an n x n block scales like |a|^n
    if scale == 0.0 or abs(det) <= rtol * scale ** a.shape[0]:
        raise SingularMatrix(f"|det|={abs(det):.3e} at scale {scale:.3e}")
    return np.linalg.inv(a)


def solve(a, b, rtol: float = SINGULAR_RTOL):
    """a^{-1} b with the same singularity guard as mat_inv."""
    a = np.asarray(a, dtype=complex)
    scale = fro(a)
    det = np.linalg.det(a)
    if scale == 0.0 or abs(det) <= rtol * scale ** a.shape[0]:
        raise SingularMatrix(f"|det|={abs(det):.3e} at scale {scale:.3e}")
    return np.linalg.solve(a, b)


def herglotz_im(m):
    m = np.asarray(m, dtype=complex)
    return (m - m.conj().T) / 2j


def boundary_matrices(alpha):
    """(S, C, A); A is None for alpha = inf."""
    alpha = BoundaryParam.of(alpha)
    if alpha.is_inf:
        return np.zeros((2, 2), complex), EPS.copy(), None
    a = complex(alpha.value)
    A = np.diag([a.conjugate(), a])
    r = np.sqrt(1.0 + abs(a) ** 2)
    return I2 / r, EPS @ A / r, A


def is_hermitian(a, tol: float = 1e-12) -> bool:
    a = np.asarray(a)
    return fro(a - a.conj().T) <= tol * max(1.0, fro(a))


def is_psd(a, tol: float = 1e-12) -> bool:
    a = np.asarray(a)
    if not is_hermitian(a, tol):
        return False
    h = 0.5 * (a + a.conj().T)
    return bool(np.linalg.eigvalsh(h).min() >= -tol * max(1.0, fro(a)))


def is_nonsingular(a, tol: float = SINGULAR_RTOL) -> bool:
    a = np.asarray(a)
    s = fro(a)
    return s > 0 and abs(np.linalg.det(a)) > tol * s ** a.shape[0]


def sqrt_principal(a):
    """Principal square root of a 2x2 matrix (eigenvalues with Re >= 0)."""
    a = np.asarray(a, dtype=complex)
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = np.sqrt(tr * tr / 4 - det)
    r1 = np.sqrt(tr / 2 + disc)
    r2 = np.sqrt(tr / 2 - disc)
    t = r1 + r2
    if abs(t) < 1e-300:
        raise SingularMatrix("matrix square root undefined")
    return (a + r1 * r2 * I2) / t


def wronskian(u, du, v, dv, e=EPS):
    """[U, V] = U e V' - U' e V."""
    return u @ e @ dv - du @ e @ v
