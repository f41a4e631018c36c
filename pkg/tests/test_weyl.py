from __future__ import annotations

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylpair.checks import (conjugation_check, herglotz_check, reflection_check,
                             resolvent_residual_check, transpose_check)
from weylpair.linalg import EPS, I2, INFINITY, P_MINUS, P_PLUS, XI, SingularMatrix, fro
from weylpair.model import (Constant, ExpDecay, Problem, Step, StepPolicy, Truncation, Zero)
from weylpair.oracles import M_EXPDECAY_1PI, free_m
from weylpair.propagator import k_of, propagate
from weylpair.weyl import (NoConvergence, ResolventKernel, disk_brute, disk_radius,
                           m_asymptotic, m_finite, m_finite_direct, m_limit, m_radiation,
                           m_transform_alpha, re_m_i)

NEUMANN_AT_I = cmath.exp(-1j * math.pi / 4) * (1j * P_PLUS - P_MINUS)
EXPQ = ExpDecay(amplitude=1 + 1j, rate=1.0)


def test_free_dirichlet_truncation_closed_form():
    lam, b = 1 + 1j, 3.0
    k = k_of(lam)
    Phi = cmath.cos(k * b) * P_PLUS + cmath.cosh(k * b) * P_MINUS
    Theta = cmath.sin(k * b) / k * P_PLUS - cmath.sinh(k * b) / k * P_MINUS
    ref = np.linalg.solve(Phi, Theta)
    assert fro(m_finite(Problem(), lam, b) - ref) <= 1e-8


def test_free_neumann_limit_at_i():
    assert fro(m_finite(Problem(), 1j, 40.0) - NEUMANN_AT_I) <= 1e-10
    v = m_limit(Problem(), 1j)
    assert fro(v.M - NEUMANN_AT_I) <= max(1e-8, v.disk_radius)


def test_free_dirichlet_limit():
    lam = 2 + 3j
    k = k_of(lam)
    v = m_limit(Problem(alpha="inf"), lam)
    assert fro(v.M - k * (1j * P_PLUS + P_MINUS)) <= max(1e-8, v.disk_radius)


def test_truncated_solution_meets_right_condition():
    p = Problem(potential=EXPQ, alpha=0.5 - 1j)
    lam, b = 2 + 0.5j, 4.0
    M = m_finite(p, lam, b)
    s = propagate(p, lam, b).unscaled()
    X = s.Theta - s.Phi @ M
    assert fro(X) <= 1e-8 * fro(s.Theta)
    beta = 0.3 + 0.2j
    B = np.diag([np.conj(beta), beta])
    M = m_finite(p, lam, b, right_bc=beta)
    X, dX = s.Theta - s.Phi @ M, s.dTheta - s.dPhi @ M
    assert fro(dX + B @ X) <= 1e-8 * fro(s.dTheta)


def test_backward_and_direct_truncation_agree():
    p = Problem(potential=EXPQ, alpha=2j)
    assert fro(m_finite(p, 1 + 1j, 5.0) - m_finite_direct(p, 1 + 1j, 5.0)) <= 1e-8


def test_constant_potential_b40_vs_b80_within_radius():
    p = Problem(potential=Constant(c=0.3j))
    lam = 2j
    r = disk_radius(p, lam, 40.0)
    a, b = m_finite(p, lam, 40.0), m_finite(p, lam, 80.0)
    # the certificate is far below double precision here; allow a few ulps of |M|
    assert fro(a - b) <= 2 * r + 1e-14 * fro(a)


def test_disk_radius_monotone_in_b():
    p = Problem(potential=Step(segments=((0.0, 1.5, 2 - 1j), (3.0, 4.0, -1.0))), alpha=1j)
    for lam in (1 + 0.5j, -3 + 0.5j):
        rs = [disk_radius(p, lam, b) for b in (2.0, 4.0, 8.0, 16.0)]
        assert all(b <= a * (1 + 1e-9) for a, b in zip(rs, rs[1:]))


def test_disk_radius_free_decays_exponentially():
    rs = [disk_radius(Problem(), 1j, b) for b in (4.0, 8.0, 12.0)]
    rate = 2 * k_of(1j).imag
    for a, b in zip(rs, rs[1:]):
        assert math.log(a / b) / 4.0 == pytest.approx(rate, rel=0.1)


def test_disk_radius_shrinks_with_imag_part():
    p = Problem(potential=EXPQ)
    assert disk_radius(p, 1 + 1j, 6.0) < disk_radius(p, 1 + 0.5j, 6.0)


def test_disk_radius_matches_brute_force_construction():
    p = Problem(potential=EXPQ, alpha=1)
    for lam, b in ((1 + 1j, 3.0), (-3 + 0.5j, 4.0)):
        d = disk_brute(p, lam, b)
        assert disk_radius(p, lam, b) == pytest.approx(d.radius, rel=1e-6)
        # the truncated M lies in the disk
        assert fro(m_finite(p, lam, b) - d.center_estimate) <= d.radius * (1 + 1e-6)


def test_m_limit_near_real_axis_free():
    # Im k ~ 0.0025 here: certification needs b ~ 4500
    p = Problem(alpha=1 + 1j, truncation=Truncation(b_max=1e4))
    lam = 4 + 0.01j
    v = m_limit(p, lam, 1e-8)
    assert fro(v.M - free_m(1 + 1j, lam)) <= max(1e-8, v.disk_radius)


def test_m_limit_no_convergence_is_reported():
    with pytest.raises(NoConvergence):
        m_limit(Problem(alpha=1 + 1j), 4 + 0.01j, 1e-8)


def test_m_limit_against_frozen_reference():
    v = m_limit(Problem(potential=EXPQ), 1 + 1j, 1e-8)
    assert fro(v.M - M_EXPDECAY_1PI) <= 1e-6


def test_radiation_matches_limit():
    p = Problem(potential=EXPQ, alpha=0.5)
    for lam in (1 + 1j, -2 + 0.3j, 9 + 2j):
        M, _, tail = m_radiation(p, lam)
        v = m_limit(p, lam)
        assert fro(M - v.M) <= v.disk_radius + tail + 1e-9


def test_m_limit_rejects_real_lambda():
    with pytest.raises(SingularMatrix):
        m_limit(Problem(), 2.0)


# lam = k^2 with Im k >= 0.1 keeps the L2 solutions decaying fast enough to certify by b = 200
k_upper = st.builds(complex, st.floats(0.0, 5.0), st.floats(0.1, 4.0)).filter(
    lambda k: (k * k).imag > 0.05)


@settings(max_examples=50)
@given(k_upper)
def test_herglotz_property(k):
    p = Problem(potential=EXPQ, alpha=1 - 2j)
    v = m_limit(p, k * k)
    ev = np.linalg.eigvalsh((v.M - v.M.conj().T) / 2j)
    assert ev.min() > 0


@given(k_upper)
def test_conjugate_symmetry(k):
    p = Problem(potential=EXPQ, alpha=3j)
    lam = k * k
    a, b = m_limit(p, lam), m_limit(p, np.conj(lam))
    assert fro(b.M - a.M.conj().T) <= 2 * (a.disk_radius + b.disk_radius) + 1e-12


@pytest.mark.parametrize("alpha", [0, 1 + 1j, "inf"])
def test_structural_symmetries(alpha):
    p = Problem(potential=EXPQ, alpha=alpha)
    assert transpose_check(p).passed
    assert reflection_check(p).passed
    assert herglotz_check(p).passed
    assert conjugation_check(p).passed


def test_re_m_i_is_cached_copy():
    p = Problem(potential=EXPQ)
    a = re_m_i(p)
    a[:] = 0
    assert fro(re_m_i(p)) > 0


@pytest.mark.parametrize("alpha", [1 + 1j, 2, -0.5j, "inf"])
def test_transform_consistency(alpha):
    p0 = Problem(potential=EXPQ)
    pa = Problem(potential=EXPQ, alpha=alpha)
    for lam in (1 + 1j, -4 + 2j):
        v0, va = m_limit(p0, lam), m_limit(pa, lam)
        got = m_transform_alpha(v0.M, alpha)
        # the transform is Lipschitz near M0 with a modest constant here
        assert fro(got - va.M) <= 1e3 * (v0.disk_radius + va.disk_radius) + 1e-9


def test_transform_examples():
    lam = 3 + 1j
    k = k_of(lam)
    M0 = (1j * P_PLUS - P_MINUS) / k
    assert np.allclose(m_transform_alpha(M0, 0), M0)
    assert np.allclose(m_transform_alpha(M0, "inf"), k * (1j * P_PLUS + P_MINUS))
    for a in (1 + 1j, 2.0, -3j):
        assert np.allclose(m_transform_alpha(M0, a), free_m(a, lam), atol=1e-12)


def test_asymptotic_examples():
    lam = 7 + 2j
    k = k_of(lam)
    assert np.allclose(m_asymptotic(0, lam), (1j * P_PLUS - P_MINUS) / k)
    assert np.allclose(m_asymptotic("inf", lam), k * (1j * P_PLUS + P_MINUS))
    a = 1 + 2j
    far = m_asymptotic(a, 1e12j)
    assert np.allclose(far, [[0, a], [np.conj(a), 0]], atol=1e-5)
    # 1/k^2 coefficient
    w = 1 + abs(a) ** 2
    c2 = (m_asymptotic(a, lam) - m_asymptotic(a, lam).real * 0 - EPS @ np.diag([np.conj(a), a])
          - w / k * (1j * P_PLUS - P_MINUS)) * k * k
    assert np.allclose(c2, -w * np.array([[a.real, -a.imag], [a.imag, a.real]]))


def test_asymptotic_remainder_is_cubic():
    p = Problem(potential=EXPQ, alpha=1 + 1j)
    scaled = []
    for kk in (10.0, 20.0, 40.0):
        lam = kk * kk * 1j
        v = m_limit(p, lam)
        scaled.append(fro(v.M - m_asymptotic(p.alpha, lam)) * kk ** 3)
    for a, b in zip(scaled, scaled[1:]):
        assert 0.5 <= a / b <= 2.0


def test_resolvent_diagonal_symmetry():
    p = Problem(potential=EXPQ, alpha=1 - 1j)
    lam = 2 + 1j
    M, Mb = m_limit(p, lam).M, m_limit(p, np.conj(lam)).M
    for a in (0.3, 1.0, 2.5):
        s, sb = propagate(p, lam, a).unscaled(), propagate(p, np.conj(lam), a).unscaled()
        X, Xb = s.Theta - s.Phi @ M, sb.Theta - sb.Phi @ Mb
        lhs, rhs = X @ sb.Phi.conj().T, s.Phi @ Xb.conj().T
        assert fro(lhs - rhs) <= 1e-7 * max(fro(lhs), 1.0)


def test_resolvent_adjoint_symmetry():
    p = Problem(potential=EXPQ, alpha=0.5)
    pts = [0.2, 0.9, 1.7]
    K = ResolventKernel(p, 1 + 2j, pts)
    Kb = ResolventKernel(p, 1 - 2j, pts)
    for x in pts:
        for y in pts:
            assert fro(K(x, y) - Kb(y, x).conj().T) <= 1e-8


def test_resolvent_decays_along_ray():
    p = Problem(potential=EXPQ)
    lam0 = cmath.exp(1j * math.pi / 3)
    norms = [fro(ResolventKernel(p, r * lam0, [1.0])(1.0, 1.0)) for r in (1, 4, 16, 64, 256)]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 0.1 * norms[0]


def test_resolvent_matrix_matches_pointwise():
    p = Problem(potential=EXPQ, alpha=1j)
    pts = np.linspace(0, 2, 5)
    K = ResolventKernel(p, 1 + 1j, pts)
    full = K.matrix()
    for i, x in enumerate(pts):
        for j, y in enumerate(pts):
            assert fro(full[i, j] - K(x, y)) <= 1e-10 * max(1.0, fro(full[i, j]))


def test_resolvent_residual():
    r = resolvent_residual_check(Problem(potential=EXPQ, alpha=1 + 1j))
    assert r.passed, r.defect


def test_compact_problem_m():
    p = Problem(potential=Zero(domain=2.0), beta="inf")
    v = m_limit(p, 1 + 1j)
    assert v.certificate == "exact"
    assert fro(v.M - m_finite(Problem(), 1 + 1j, 2.0)) <= 1e-12
