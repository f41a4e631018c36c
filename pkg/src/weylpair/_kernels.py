"""RK4 sweeps for Y' = A(x) Y.

The per-step RK4 transfer matrices are assembled in vectorised numpy; the
sequential sweep over steps is the hot loop. It is compiled with numba when
available, unless WEYLPAIR_NO_NUMBA is set to a non-empty value other than "0".
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba as _nb
except ImportError:  # pragma: no cover
    _nb = None

_FLAG = os.environ.get("WEYLPAIR_NO_NUMBA", "")
USE_NUMBA = _nb is not None and _FLAG in ("", "0")
BACKEND = "numba" if USE_NUMBA else "numpy"

RESCALE_AT = 1e32


def rk4_transfer(h, a0, am, a1):
    """One-step RK4 propagators for linear Y' = A Y, batched over steps.

    h: (N,) signed steps; a0, am, a1: (N, d, d) generator at start, midpoint, end.
    """
    d = a0.shape[-1]
    eye = np.eye(d, dtype=complex)
    hh = np.asarray(h, dtype=float)[:, None, None]
    k1 = a0
    k2 = am @ (eye + 0.5 * hh * k1)
    k3 = am @ (eye + 0.5 * hh * k2)
    k4 = a1 @ (eye + hh * k3)
    return eye + hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------- numpy path

def _forward_np(T, Y0, h, nf, gram_on, rec):
    Y = Y0.copy()
    m = Y.shape[1]
    G = np.zeros((m, m), dtype=complex)
    logs = 0.0
    nrec = rec.size
    recY = np.zeros((nrec,) + Y.shape, dtype=complex)
    recL = np.zeros(nrec)
    r = 0
    if nrec and rec[0] == 0:
        recY[0] = Y
        r = 1
    for j in range(T.shape[0]):
        Yn = T[j] @ Y
        if gram_on:
            F0, D0 = Y[:nf], Y[nf:]
            F1, D1 = Yn[:nf], Yn[nf:]
            g0 = F0.conj().T @ F0
            g1 = F1.conj().T @ F1
            d0 = D0.conj().T @ F0 + F0.conj().T @ D0
            d1 = D1.conj().T @ F1 + F1.conj().T @ D1
            G += 0.5 * h[j] * (g0 + g1) + h[j] * h[j] / 12.0 * (d0 - d1)
        Y = Yn
        s = np.abs(Y).max()
        if s > RESCALE_AT:
            Y = Y / s
            G = G / (s * s)
            logs += math.log(s)
        while r < nrec and rec[r] == j + 1:
            recY[r] = Y
            recL[r] = logs
            r += 1
    return Y, logs, G, recY, recL


def _orthonormalise_np(Y):
    """QR with a real positive diagonal in R (the factorisation MGS produces)."""
    q, r = np.linalg.qr(Y)
    d = np.diagonal(r)
    ph = np.where(d == 0, 1.0, d / np.where(d == 0, 1.0, np.abs(d)))
    return q * ph, r * ph.conj()[:, None]


def _backward_np(T, Y0, keep):
    """Sweep steps in reverse order (T already built for negative h)."""
    N = T.shape[0]
    Y, _ = _orthonormalise_np(Y0)
    n = Y.shape[1]
    Us = np.zeros((N + 1 if keep else 1,) + Y.shape, dtype=complex)
    Rs = np.zeros((N if keep else 1, n, n), dtype=complex)
    if keep:
        Us[N] = Y
    for j in range(N - 1, -1, -1):
        Y, R = _orthonormalise_np(T[j] @ Y)
        if keep:
            Us[j] = Y
            Rs[j] = R
    return Y, Us, Rs


def _gram_terms_np(V, nf):
    F, D = V[:nf], V[nf:]
    return F.conj().T @ F, D.conj().T @ F + F.conj().T @ D


def _gram_qr_np(T, Y0, h, nf):
    V, R0 = _orthonormalise_np(Y0)
    Minv = np.linalg.inv(R0)
    S = np.zeros((V.shape[1],) * 2, dtype=complex)
    logs = 0.0
    g0, d0 = _gram_terms_np(V, nf)
    for j in range(T.shape[0]):
        V1, R = _orthonormalise_np(T[j] @ V)
        Ri = np.linalg.inv(R)
        g1, d1 = _gram_terms_np(V1, nf)
        hj = h[j]
        S = Ri.conj().T @ (S + 0.5 * hj * g0 + hj * hj / 12.0 * d0) @ Ri \
            + 0.5 * hj * g1 - hj * hj / 12.0 * d1
        Minv = Minv @ Ri
        s = np.abs(Minv).max()
        if s < 1.0 / RESCALE_AT or s > RESCALE_AT:
            Minv = Minv / s
            logs += math.log(s)
        V, g0, d0 = V1, g1, d1
    return S, Minv, logs


# ---------------------------------------------------------------- numba path

if USE_NUMBA:
    _jit = _nb.njit(cache=True)

    @_jit
    def _matmul_into(A, B, out):
        d, m = B.shape
        for i in range(d):
            for c in range(m):
                acc = 0j
                for k in range(d):
                    acc += A[i, k] * B[k, c]
                out[i, c] = acc

    @_jit
    def _forward_nb(T, Y0, h, nf, gram_on, rec):
        d, m = Y0.shape
        Y = Y0.copy()
        Yn = np.empty_like(Y)
        G = np.zeros((m, m), dtype=np.complex128)
        logs = 0.0
        nrec = rec.size
        recY = np.zeros((nrec, d, m), dtype=np.complex128)
        recL = np.zeros(nrec)
        r = 0
        if nrec > 0 and rec[0] == 0:
            recY[0] = Y
            r = 1
        for j in range(T.shape[0]):
            _matmul_into(T[j], Y, Yn)
            if gram_on:
                hj = h[j]
                for a in range(m):
                    for b in range(m):
                        g0 = 0j
                        g1 = 0j
                        d0 = 0j
                        d1 = 0j
                        for i in range(nf):
                            fa0 = Y[i, a].conjugate()
                            fa1 = Yn[i, a].conjugate()
                            g0 += fa0 * Y[i, b]
                            g1 += fa1 * Yn[i, b]
                            d0 += Y[nf + i, a].conjugate() * Y[i, b] + fa0 * Y[nf + i, b]
                            d1 += Yn[nf + i, a].conjugate() * Yn[i, b] + fa1 * Yn[nf + i, b]
                        G[a, b] += 0.5 * hj * (g0 + g1) + hj * hj / 12.0 * (d0 - d1)
            s = 0.0
            for i in range(d):
                for c in range(m):
                    Y[i, c] = Yn[i, c]
                    v = abs(Yn[i, c])
                    if v > s:
                        s = v
            if s > RESCALE_AT:
                for i in range(d):
                    for c in range(m):
                        Y[i, c] /= s
                for a in range(m):
                    for b in range(m):
                        G[a, b] /= s * s
                logs += math.log(s)
            while r < nrec and rec[r] == j + 1:
                recY[r] = Y
                recL[r] = logs
                r += 1
        return Y, logs, G, recY, recL

    @_jit
    def _mgs_nb(Y, R):
        """In-place modified Gram-Schmidt; R receives the triangular factor."""
        d, n = Y.shape
        for a in range(n):
            for b in range(n):
                R[a, b] = 0j
        for c in range(n):
            for p in range(c):
                acc = 0j
                for i in range(d):
                    acc += Y[i, p].conjugate() * Y[i, c]
                R[p, c] = acc
                for i in range(d):
                    Y[i, c] -= acc * Y[i, p]
            nrm = 0.0
            for i in range(d):
                nrm += Y[i, c].real ** 2 + Y[i, c].imag ** 2
            nrm = math.sqrt(nrm)
            R[c, c] = nrm
            for i in range(d):
                Y[i, c] /= nrm

    @_jit
    def _backward_nb(T, Y0, keep):
        N = T.shape[0]
        d, n = Y0.shape
        Y = Y0.copy()
        R = np.zeros((n, n), dtype=np.complex128)
        _mgs_nb(Y, R)
        Yn = np.empty_like(Y)
        Us = np.zeros((N + 1 if keep else 1, d, n), dtype=np.complex128)
        Rs = np.zeros((N if keep else 1, n, n), dtype=np.complex128)
        if keep:
            Us[N] = Y
        for j in range(N - 1, -1, -1):
            _matmul_into(T[j], Y, Yn)
            _mgs_nb(Yn, R)
            Y[:, :] = Yn
            if keep:
                Us[j] = Y
                Rs[j] = R
        return Y, Us, Rs


    @_jit
    def _gram_terms_nb(V, nf, g, dd):
        m = V.shape[1]
        for a in range(m):
            for b in range(m):
                acc = 0j
                accd = 0j
                for i in range(nf):
                    fa = V[i, a].conjugate()
                    acc += fa * V[i, b]
                    accd += V[nf + i, a].conjugate() * V[i, b] + fa * V[nf + i, b]
                g[a, b] = acc
                dd[a, b] = accd

    @_jit
    def _triu_inv_nb(R, out):
        m = R.shape[0]
        for a in range(m):
            for b in range(m):
                out[a, b] = 0j
        for c in range(m):
            out[c, c] = 1.0 / R[c, c]
            for r in range(c - 1, -1, -1):
                acc = 0j
                for k in range(r + 1, c + 1):
                    acc += R[r, k] * out[k, c]
                out[r, c] = -acc / R[r, r]

    @_jit
    def _gram_qr_nb(T, Y0, h, nf):
        d, m = Y0.shape
        V = Y0.copy()
        R = np.zeros((m, m), dtype=np.complex128)
        _mgs_nb(V, R)
        Minv = np.zeros((m, m), dtype=np.complex128)
        _triu_inv_nb(R, Minv)
        S = np.zeros((m, m), dtype=np.complex128)
        g0 = np.zeros((m, m), dtype=np.complex128)
        d0 = np.zeros((m, m), dtype=np.complex128)
        g1 = np.zeros((m, m), dtype=np.complex128)
        d1 = np.zeros((m, m), dtype=np.complex128)
        Ri = np.zeros((m, m), dtype=np.complex128)
        V1 = np.empty_like(V)
        _gram_terms_nb(V, nf, g0, d0)
        logs = 0.0
        for j in range(T.shape[0]):
            _matmul_into(T[j], V, V1)
            _mgs_nb(V1, R)
            _triu_inv_nb(R, Ri)
            _gram_terms_nb(V1, nf, g1, d1)
            hj = h[j]
            inner = S + 0.5 * hj * g0 + hj * hj / 12.0 * d0
            S = Ri.conj().T @ inner @ Ri + 0.5 * hj * g1 - hj * hj / 12.0 * d1
            Minv = Minv @ Ri
            s = np.abs(Minv).max()
            if s < 1.0 / RESCALE_AT or s > RESCALE_AT:
                Minv = Minv / s
                logs += math.log(s)
            V[:, :] = V1
            g0[:, :] = g1
            d0[:, :] = d1
        return S, Minv, logs


def forward_sweep(T, Y0, h, nf, gram=False, record=None, backend=None):
    """Apply T[0], T[1], ... to Y0 with scalar log rescaling.

    Returns (Y, logscale, gram, recY, reclog). ``gram`` is int F*F over the sweep
    (F = first ``nf`` rows) in the same scale as Y squared; ``record`` lists node
    indices (0..N, sorted) at which to keep the state.
    """
    rec = np.asarray([] if record is None else record, dtype=np.int64)
    T = np.ascontiguousarray(T, dtype=complex)
    Y0 = np.ascontiguousarray(Y0, dtype=complex)
    h = np.ascontiguousarray(h, dtype=float)
    if (backend or BACKEND) == "numba" and USE_NUMBA:
        return _forward_nb(T, Y0, h, nf, gram, rec)
    return _forward_np(T, Y0, h, nf, gram, rec)


def backward_sweep(T, Y0, keep=False, backend=None):
    """Apply T[N-1], ..., T[0] to Y0, re-orthonormalising columns after every step.

    Returns (Y at the first node, per-node bases, per-step triangular factors).
    """
    T = np.ascontiguousarray(T, dtype=complex)
    Y0 = np.ascontiguousarray(Y0, dtype=complex)
    if (backend or BACKEND) == "numba" and USE_NUMBA:
        return _backward_nb(T, Y0, keep)
    return _backward_np(T, Y0, keep)


def gram_qr_sweep(T, Y0, h, nf, backend=None):
    """Gram int F*F of the columns of Y0 carried by T, in a conditioning-safe factored form.

    Returns (S, Minv, logscale) with Gram = K* S K where K^{-1} = exp(logscale) Minv;
    S is the Gram expressed in the final orthonormal frame, so it stays well conditioned
    even when the columns grow at very different rates.
    """
    T = np.ascontiguousarray(T, dtype=complex)
    Y0 = np.ascontiguousarray(Y0, dtype=complex)
    h = np.ascontiguousarray(h, dtype=float)
    if (backend or BACKEND) == "numba" and USE_NUMBA:
        return _gram_qr_nb(T, Y0, h, nf)
    return _gram_qr_np(T, Y0, h, nf)
