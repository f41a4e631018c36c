from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weylpair.linalg import (EPS, I2, INFINITY, P_MINUS, P_PLUS, XI, BoundaryParam,
                             SingularMatrix, boundary_matrices, herglotz_im, is_hermitian,
                             is_nonsingular, is_psd, mat_inv, mat_mul, wronskian)

finite = st.floats(-1e3, 1e3, allow_nan=False)
cplx = st.builds(complex, finite, finite)
mats = st.lists(cplx, min_size=4, max_size=4).map(lambda v: np.array(v).reshape(2, 2))


def test_products():
    assert np.allclose(mat_mul(EPS, EPS), I2)
    assert np.allclose(mat_mul(P_PLUS, P_MINUS), 0)
    assert np.allclose(mat_mul(EPS, P_PLUS), P_PLUS)


def test_projections_and_xi():
    assert np.abs(EPS @ P_PLUS - P_PLUS).max() < 1e-14
    assert np.abs(P_PLUS @ EPS - P_PLUS).max() < 1e-14
    assert np.abs(EPS @ P_MINUS + P_MINUS).max() < 1e-14
    assert np.abs(P_PLUS + P_MINUS - I2).max() < 1e-14
    assert np.allclose(XI @ EPS @ XI, -EPS)


@pytest.mark.parametrize("a, inv", [
    (I2, I2),
    (EPS, EPS),
    (np.diag([2, -1j]), np.diag([0.5, 1j])),
])
def test_mat_inv_examples(a, inv):
    assert np.allclose(mat_inv(a), inv, atol=1e-15)


def test_mat_inv_singular():
    with pytest.raises(SingularMatrix):
        mat_inv(np.array([[1, 2], [2, 4]], dtype=complex))
    with pytest.raises(SingularMatrix):
        mat_inv(np.zeros((2, 2)))


def test_singular_threshold_scales_with_norm():
    big = 1e12 * np.array([[1, 0], [0, 1e-3]], dtype=complex)
    assert np.allclose(mat_inv(big) @ big, I2)
    assert is_nonsingular(big)


@given(mats)
def test_mat_inv_round_trip(a):
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > 1e8:
        return
    r = a @ mat_inv(a) - I2
    assert np.linalg.norm(r) <= 1e-12 * cond


@pytest.mark.parametrize("m, out", [
    (I2, np.zeros((2, 2))),
    (1j * I2, I2),
    (np.array([[0, 1j], [0, 0]]), np.array([[0, 0.5], [0.5, 0]])),
    (np.array([[0, -1], [0, 0]]), np.array([[0, 0.5j], [-0.5j, 0]])),
])
def test_herglotz_im_examples(m, out):
    assert np.allclose(herglotz_im(m), out)


@given(mats)
def test_herglotz_im_hermitian(m):
    h = herglotz_im(m)
    assert np.abs(h - h.conj().T).max() <= 1e-14 * max(1.0, np.abs(m).max())


def test_boundary_examples():
    S, C, A = boundary_matrices(BoundaryParam(0))
    assert np.allclose(S, I2) and np.allclose(C, 0)
    S, C, A = boundary_matrices(INFINITY)
    assert np.allclose(S, 0) and np.allclose(C, EPS) and A is None
    S, C, A = boundary_matrices(BoundaryParam(1))
    assert np.allclose(S, I2 / math.sqrt(2))
    assert np.allclose(C, np.array([[0, 1], [1, 0]]) / math.sqrt(2))


@given(cplx)
def test_boundary_identities(a):
    for alpha in (BoundaryParam(a), INFINITY):
        S, C, _ = boundary_matrices(alpha)
        assert np.abs(S @ S + C @ C - I2).max() < 1e-14
        assert np.abs(S @ C - C @ S).max() < 1e-14


def test_boundary_param_parsing():
    assert BoundaryParam.of("inf").is_inf
    assert BoundaryParam.of(math.inf).is_inf
    assert BoundaryParam.of(None).is_inf
    assert BoundaryParam.of(1 + 2j).value == 1 + 2j
    assert BoundaryParam.of(1 + 2j).conj().value == 1 - 2j
    assert INFINITY.conj().is_inf


def test_predicates():
    assert is_hermitian(np.array([[1, 1j], [-1j, 2]]))
    assert not is_hermitian(np.array([[1, 1j], [1j, 2]]))
    assert is_psd(np.array([[1, 0], [0, 0]]))
    assert not is_psd(np.array([[1, 0], [0, -1]]))


def test_wronskian_of_free_solutions_is_constant():
    k = 1.3 + 0.4j
    def sol(x):
        return np.cos(k * x) * P_PLUS + np.cosh(k * x) * P_MINUS
    def dsol(x):
        return -k * np.sin(k * x) * P_PLUS + k * np.sinh(k * x) * P_MINUS
    # Phi(lam-bar)* is the partner; for q = 0 that is the solution at conj(k)
    kb = np.conj(k)
    def solb(x):
        return np.cos(kb * x) * P_PLUS + np.cosh(kb * x) * P_MINUS
    def dsolb(x):
        return -kb * np.sin(kb * x) * P_PLUS + kb * np.sinh(kb * x) * P_MINUS
    w = [wronskian(solb(x).conj().T, dsolb(x).conj().T, sol(x), dsol(x)) for x in (0.0, 0.7, 2.0)]
    assert np.allclose(w, 0, atol=1e-12)


@given(mats)
def test_sqrt_principal(a):
    from weylpair.linalg import sqrt_principal

    a = a + 5 * np.abs(a).max() * I2 + I2  # keep eigenvalues off the branch cut
    r = sqrt_principal(a)
    assert np.linalg.norm(r @ r - a) <= 1e-10 * np.linalg.norm(a)
    assert np.linalg.eigvals(r).real.min() >= 0
