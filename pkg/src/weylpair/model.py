"""Potentials, boundary data and the operator definition."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .linalg import BoundaryParam, is_hermitian


class OutOfDomain(ValueError):
    pass


def hermitise_values(q):
    """Stack scalar samples q (shape (N,)) into [[0, q], [conj q, 0]] blocks."""
    q = np.asarray(q, dtype=complex)
    out = np.zeros(q.shape + (2, 2), dtype=complex)
    out[..., 0, 1] = q
    out[..., 1, 0] = q.conj()
    return out


@dataclass(frozen=True)
class Potential:
    """Base class. Subclasses implement ``q`` (scalar kinds) or ``Q``.

    ``side`` picks one-sided limits at jumps: +1 from the right, -1 from the left.
    """

    domain: float = math.inf

    kind = "abstract"
    scalar = True

    def q(self, x, side: int = 1):
        raise NotImplementedError

    def Q(self, x, side: int = 1):
        x = self._check(x)
        return hermitise_values(self.q(x, side))

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.domain):
            raise OutOfDomain(f"x outside [0, {self.domain}]")
        return x

    def sup_norm(self) -> float:
        """Bound on |q| (scalar kinds) or Frobenius |Q|/sqrt2 (matrix kind)."""
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def tail(self):
        """(x0, q_inf, remainder) with |q(x) - q_inf| <= remainder(x) for x >= x0.

        None when nothing is known about the behaviour at infinity.
        """
        return None

    def conj(self) -> "Potential":
        raise NotImplementedError

    def is_real(self) -> bool:
        return False

    def integral_norm(self, x: float, n: int = 2001) -> float:
        """int_0^x |Q(y)|_F dy by the trapezoid rule on n points plus breakpoints."""
        pts = np.union1d(np.linspace(0.0, x, n), [b for b in self.breakpoints() if 0 < b < x])
        vals = np.linalg.norm(self.Q(pts), axis=(1, 2))
        return float(np.trapezoid(vals, pts))


@dataclass(frozen=True)
class Zero(Potential):
    kind = "zero"

    def q(self, x, side=1):
        return np.zeros(np.shape(x), dtype=complex)

    def sup_norm(self):
        return 0.0

    def tail(self):
        return 0.0, 0j, lambda x: 0.0

    def conj(self):
        return self

    def is_real(self):
        return True


@dataclass(frozen=True)
class Constant(Potential):
    c: complex = 0j
    kind = "constant"

    def q(self, x, side=1):
        return np.full(np.shape(x), complex(self.c))

    def sup_norm(self):
        return abs(self.c)

    def tail(self):
        return 0.0, complex(self.c), lambda x: 0.0

    def conj(self):
        return replace(self, c=complex(self.c).conjugate())

    def is_real(self):
        return complex(self.c).imag == 0


@dataclass(frozen=True)
class Step(Potential):
    """Piecewise constant; zero outside the listed segments."""

    segments: tuple = ()
    kind = "step"

    def __post_init__(self):
        segs = tuple((float(a), float(b), complex(v)) for a, b, v in self.segments)
        for (a, b, _), nxt in zip(segs, segs[1:] + ((math.inf, math.inf, 0),)):
            if not (a < b <= nxt[0]):
                raise ValueError("step segments must be ordered and disjoint")
        object.__setattr__(self, "segments", segs)

    def q(self, x, side=1):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for a, b, v in self.segments:
            mask = (x > a) & (x < b)
            mask |= (x == a) if side > 0 else (x == b)
            out[mask] = v
        return out

    def sup_norm(self):
        return max((abs(v) for *_, v in self.segments), default=0.0)

    def breakpoints(self):
        pts = sorted({p for a, b, _ in self.segments for p in (a, b) if math.isfinite(p)})
        return tuple(pts)

    def tail(self):
        if not self.segments:
            return 0.0, 0j, lambda x: 0.0
        a, b, v = self.segments[-1]
        if math.isinf(b):
            return a, v, lambda x: 0.0
        return b, 0j, lambda x: 0.0

    def conj(self):
        return replace(self, segments=tuple((a, b, v.conjugate()) for a, b, v in self.segments))

    def is_real(self):
        return all(v.imag == 0 for *_, v in self.segments)


@dataclass(frozen=True)
class ExpDecay(Potential):
    """amplitude * exp(-rate x) + offset."""

    amplitude: complex = 1.0
    rate: float = 1.0
    offset: complex = 0j
    kind = "exp_decay"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def q(self, x, side=1):
        x = np.asarray(x, dtype=float)
        return complex(self.amplitude) * np.exp(-self.rate * x) + complex(self.offset)

    def sup_norm(self):
        return abs(self.amplitude) + abs(self.offset)

    def tail(self):
        amp, rate = abs(self.amplitude), self.rate
        return 0.0, complex(self.offset), lambda x: amp * math.exp(-rate * x)

    def conj(self):
        return replace(self, amplitude=complex(self.amplitude).conjugate(),
                       offset=complex(self.offset).conjugate())

    def is_real(self):
        return complex(self.amplitude).imag == 0 and complex(self.offset).imag == 0


@dataclass(frozen=True)
class Table(Potential):
    """Piecewise linear through samples; held constant past the last sample."""

    xs: tuple = ()
    values: tuple = ()
    kind = "table"

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        vs = tuple(complex(v) for v in self.values)
        if len(xs) < 2 or len(xs) != len(vs):
            raise ValueError("table needs at least two (x, value) samples")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("table x-values must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", vs)

    def q(self, x, side=1):
        x = np.asarray(x, dtype=float)
        v = np.asarray(self.values)
        return np.interp(x, self.xs, v.real) + 1j * np.interp(x, self.xs, v.imag)

    def sup_norm(self):
        return max(abs(v) for v in self.values)

    def breakpoints(self):
        return tuple(self.xs)

    def tail(self):
        return self.xs[-1], self.values[-1], lambda x: 0.0

    def conj(self):
        return replace(self, values=tuple(v.conjugate() for v in self.values))

    def is_real(self):
        return all(v.imag == 0 for v in self.values)


@dataclass(frozen=True)
class GeneralHermitian(Potential):
    """Matrix potential from a callback returning a Hermitian 2x2 at x."""

    func: Callable = None
    bound: float = 0.0
    kind = "general_hermitian"
    scalar = False

    def q(self, x, side=1):
        raise TypeError("general Hermitian potential has no scalar form")

    def Q(self, x, side=1):
        x = self._check(x)
        flat = np.atleast_1d(x).ravel()
        out = np.empty((flat.size, 2, 2), dtype=complex)
        for i, xi in enumerate(flat):
            m = np.asarray(self.func(float(xi)), dtype=complex)
            if not is_hermitian(m, 1e-12):
                raise ValueError(f"callback value not Hermitian at x={xi}")
            out[i] = m
        return out.reshape(np.shape(x) + (2, 2))

    def sup_norm(self):
        return self.bound

    def conj(self):
        f = self.func
        return replace(self, func=lambda x: np.conj(np.asarray(f(x))))


def hermitise(p: Potential) -> GeneralHermitian:
    if not p.scalar:
        raise TypeError("already matrix valued")
    return GeneralHermitian(domain=p.domain, bound=math.sqrt(2) * p.sup_norm(),
                            func=lambda x: hermitise_values(p.q(np.asarray(x), 1)))


def eval_Q(p: Potential, x: float):
    return p.Q(float(x))


@dataclass(frozen=True)
class Truncation:
    b_min: float = 10.0
    b_max: float = 200.0
    growth: float = 1.6

    def __post_init__(self):
        if not (0 < self.b_min < self.b_max) or not self.growth > 1:
            raise ValueError("need 0 < b_min < b_max and growth > 1")


@dataclass(frozen=True)
class StepPolicy:
    """RK4 step h = min(h_max, c / (1 + sqrt|lambda|))."""

    h_max: float = 1e-2
    c: float = 0.1

    def __post_init__(self):
        if not (self.h_max > 0 and self.c > 0):
            raise ValueError("step policy needs h_max > 0 and c > 0")

    def h(self, lam: complex) -> float:
        return min(self.h_max, self.c / (1.0 + math.sqrt(abs(lam))))


@dataclass(frozen=True)
class Problem:
    potential: Potential = field(default_factory=Zero)
    alpha: BoundaryParam = field(default_factory=BoundaryParam)
    beta: BoundaryParam | None = None
    truncation: Truncation = field(default_factory=Truncation)
    step: StepPolicy = field(default_factory=StepPolicy)

    def __post_init__(self):
        object.__setattr__(self, "alpha", BoundaryParam.of(self.alpha))
        if self.beta is not None:
            object.__setattr__(self, "beta", BoundaryParam.of(self.beta))
        finite = math.isfinite(self.potential.domain)
        if finite != (self.beta is not None):
            raise ValueError("beta must be given exactly when the domain is finite")

    @property
    def compact(self) -> bool:
        return self.beta is not None

    def adjoint(self) -> "Problem":
        return replace(self, potential=self.potential.conj(), alpha=self.alpha.conj(),
                       beta=None if self.beta is None else self.beta.conj())

    def with_alpha(self, alpha) -> "Problem":
        return replace(self, alpha=BoundaryParam.of(alpha))


def as_potential(value) -> Potential:
    """Convenience: None -> Zero, number -> Constant, Potential unchanged."""
    if value is None:
        return Zero()
    if isinstance(value, Potential):
        return value
    return Constant(c=complex(value))


def make_problem(q=None, alpha=0.0, **kw) -> Problem:
    return Problem(potential=as_potential(q), alpha=BoundaryParam.of(alpha), **kw)


def step_potential(segments: Sequence) -> Step:
    return Step(segments=tuple(segments))
