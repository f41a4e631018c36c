from __future__ import annotations

import math

import numpy as np
import pytest

from weylpair.eigensolver import (Degenerate, DistinguishedSolution, NoEigenvalue,
                                  NotAnEigenvalue, ZeroEll, antilinear_residual,
                                  boundary_defect, distinguished_solution,
                                  distinguished_via_matrix, ell_of, find_simple_singular_values,
                                  mismatch, pair_at_eigenvalue, realified_system,
                                  same_up_to_sign)
from weylpair.linalg import BoundaryParam
from weylpair.model import Constant, ExpDecay, Problem, Zero
from weylpair.oracles import fd_singular_values
from weylpair.spectral import detect_atom

COMPACT = Problem(potential=Constant(c=0.1j, domain=math.pi), alpha="inf", beta="inf")


def _valid(p, d):
    assert antilinear_residual(p, d) <= 1e-6 * (1 + d.lam)
    assert boundary_defect(p, d) <= 1e-6
    assert d.norm_defect <= 1e-6
    assert d.ell.real > 0 or (d.ell.real == 0 and d.ell.imag > 0)


def test_realified_coefficients():
    p = Problem(potential=Constant(c=0.3 - 0.7j))
    sys = realified_system(p)
    K = sys.coef(np.array([0.5]), 1, 2.0)[0]
    assert np.allclose(K, [[0.3 - 2.0, 0.7], [-0.7, 0.3 + 2.0]])


def test_free_alpha_two():
    p = Problem(alpha=2)
    (lam,) = find_simple_singular_values(p, (0.5, 6.0))
    assert lam == pytest.approx(4, abs=1e-6)
    d = distinguished_solution(p, lam)
    _valid(p, d)
    assert d.ell == pytest.approx(1j * math.sqrt(20), abs=1e-5)
    # the stored sign is e = -2i exp(-2x)
    for x in (0.0, 0.5, 1.5):
        i = int(np.argmin(np.abs(d.xs - x)))
        assert d.e[i] == pytest.approx(-2j * math.exp(-2 * d.xs[i]), abs=1e-5)
    a = pair_at_eigenvalue(d)
    assert a.nu_mass == pytest.approx(10, abs=1e-4) and a.psi_value == pytest.approx(-1)


def test_free_alpha_one():
    p = Problem(alpha=1)
    (lam,) = find_simple_singular_values(p, (0.2, 3.0))
    d = distinguished_solution(p, lam)
    _valid(p, d)
    assert d.ell ** 2 == pytest.approx(-4, abs=1e-5)
    a = pair_at_eigenvalue(d)
    assert a.nu_mass == pytest.approx(2, abs=1e-5) and abs(abs(a.psi_value) - 1) < 1e-14


@pytest.mark.parametrize("alpha", [1 + 1j, "inf", -1.0])
def test_no_point_spectrum(alpha):
    with pytest.raises(NoEigenvalue):
        find_simple_singular_values(Problem(alpha=alpha), (0.05, 6.0))


def test_compact_against_difference_oracle():
    got = find_simple_singular_values(COMPACT, (0.5, 9.5))
    ref = fd_singular_values(COMPACT.potential, math.pi, 3)
    assert np.allclose(got, ref, atol=1e-6)
    for lam in got:
        d = distinguished_solution(COMPACT, lam)
        _valid(COMPACT, d)
        assert same_up_to_sign(d, distinguished_via_matrix(COMPACT, lam)) <= 1e-8


def test_matrix_ansatz_agrees_on_half_line():
    p = Problem(potential=ExpDecay(amplitude=1.0), alpha=1.0)
    (lam,) = find_simple_singular_values(p, (0.05, 6.0))
    d1, d2 = distinguished_solution(p, lam), distinguished_via_matrix(p, lam)
    _valid(p, d1)
    assert same_up_to_sign(d1, d2) <= 1e-8


def test_atoms_agree_with_boundary_values():
    p = Problem(potential=ExpDecay(amplitude=1.0), alpha=1.0)
    (lam,) = find_simple_singular_values(p, (0.05, 6.0))
    a = pair_at_eigenvalue(distinguished_solution(p, lam))
    b = detect_atom(p, lam)
    assert abs(a.nu_mass - b.nu_mass) <= 1e-3 * a.nu_mass
    assert abs(a.psi_value - b.psi_value) <= 1e-3


def test_adjoint_conjugates_psi_at_atoms():
    q = COMPACT.adjoint()
    for lam in find_simple_singular_values(COMPACT, (0.5, 5.0)):
        a = pair_at_eigenvalue(distinguished_solution(COMPACT, lam))
        (lam2,) = [x for x in find_simple_singular_values(q, (0.5, 5.0)) if abs(x - lam) < 1e-6]
        b = pair_at_eigenvalue(distinguished_solution(q, lam2))
        assert b.nu_mass == pytest.approx(a.nu_mass, rel=1e-6)
        assert b.psi_value == pytest.approx(np.conj(a.psi_value), abs=1e-6)


def test_degenerate_singular_value_rejected():
    # q = -2.5 on [0, pi]: |1 - 2.5| = |4 - 2.5| gives a double singular value 1.5
    p = Problem(potential=Constant(c=-2.5, domain=math.pi), alpha="inf", beta="inf")
    with pytest.raises(Degenerate):
        find_simple_singular_values(p, (1.2, 1.8))
    with pytest.raises(Degenerate):
        distinguished_solution(p, 1.5)


def test_not_an_eigenvalue():
    with pytest.raises(NotAnEigenvalue):
        distinguished_solution(Problem(alpha=2), 3.0)
    assert mismatch(Problem(alpha=2), 3.0) > 1e-3
    assert mismatch(Problem(alpha=2), 4.0) < 1e-8


def test_zero_ell_and_bad_interval():
    d = DistinguishedSolution(1.0, np.zeros(2), np.zeros(2), np.zeros(2), 0.0, 0j)
    with pytest.raises(ZeroEll):
        pair_at_eigenvalue(d)
    with pytest.raises(ValueError):
        find_simple_singular_values(Problem(), (0.0, 1.0))


def test_ell_definition():
    assert ell_of(BoundaryParam(None), 0.0, 2j) == 2j
    assert ell_of(BoundaryParam(1j), 1.0, 1.0) == pytest.approx((-1j - 1) / math.sqrt(2))
