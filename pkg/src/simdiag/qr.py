"""Unshifted QR iteration, with and without the Newton hand-off test.

``A_{k+1} = R_k Q_k`` where ``A_k = Q_k R_k``.  The plain variant stops when
the strictly lower triangle of ``A_k`` is small; the hybrid variant stops as
soon as ``(E_k, E_k^*, diag(A_k))`` passes the quadratic-convergence
certificate of :mod:`simdiag.diag`, with ``E_k`` the product of all ``Q``
factors applied so far.  ``E_k^*`` is a sensible left factor only for (nearly)
normal input; for other matrices the certificate simply keeps failing.

At ``prec <= 53`` the loops run on numpy arrays (LAPACK Householder QR with the
same sign convention), since this is where long QR runs happen in practice.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from flint import acb, acb_mat, arb

from .diag import THRESHOLD, DiagState, certificate, diag_solve
from .errors import SpectrumCollision
from .mp import (DOUBLE, Matrix, Spectrum, identity, norm_lower_tri_max,
                 to_arb, working)
from .records import CertificateReport, IterationTrace

QR_BASIC_THRESHOLD = 1e-6


class QRBasicResult(NamedTuple):
    spectrum: Spectrum
    Q: Matrix
    iterations: int
    converged: bool
    err: float


class QRNewtonResult(NamedTuple):
    spectrum: Spectrum
    E: Matrix
    F: Matrix
    iterations: int
    report: CertificateReport | None
    certified: bool


# ---------------------------------------------------------------------------
# factorization
# ---------------------------------------------------------------------------

def householder_qr(A: Matrix):
    """``A = Q R`` with ``Q`` unitary and ``R`` upper triangular.

    Reflector ``k`` maps ``A[k:, k]`` onto ``-phase(a_kk) ||A[k:, k]|| e_1``
    (the cancellation-free choice); afterwards a diagonal unitary rescaling
    makes the diagonal of ``R`` real and non-negative.  Columns that are
    already zero below and on the diagonal are skipped and give ``r_kk = 0``.
    """
    n, prec = A.n, A.prec
    R = acb_mat(A._m)
    Q = acb_mat(identity(n, prec)._m)
    with working(prec):
        for k in range(n - 1):
            x = [R[i, k] for i in range(k, n)]
            tail = arb(0)
            for v in x[1:]:
                tail += v.real ** 2 + v.imag ** 2
            if tail == 0:
                continue        # nothing to annihilate below the diagonal
            nx = (tail + x[0].real ** 2 + x[0].imag ** 2).sqrt().mid()
            phase = (x[0] / abs(x[0])).mid() if x[0] != 0 else acb(1)
            alpha = (-phase * nx).mid()
            v = [acb(0)] * k + [(x[0] - alpha).mid()] + x[1:]
            vv = (2 * (nx * nx + abs(x[0]) * nx)).mid()     # v^* v
            vcol = acb_mat(n, 1, v)
            vrow = vcol.conjugate().transpose()
            # R <- (I - 2 v v^*/v^*v) R, Q <- Q (I - 2 v v^*/v^*v)
            R = (R - vcol * ((2 / vv) * (vrow * R))).mid()
            Q = (Q - ((Q * vcol) * (2 / vv)) * vrow).mid()
            for i in range(k + 1, n):
                R[i, k] = 0
        for k in range(n):
            r = R[k, k]
            if r == 0 or (r.imag == 0 and r.real > 0):
                continue
            d = (r.conjugate() / abs(r)).mid()
            for j in range(n):
                R[k, j] = (R[k, j] * d).mid()
                Q[j, k] = (Q[j, k] * d.conjugate()).mid()
            R[k, k] = abs(R[k, k]).mid()
    return Matrix(Q, prec), Matrix(R, prec)


def _np_qr(a):
    q, r = np.linalg.qr(a)
    d = np.diagonal(r).copy()
    phase = np.where(d == 0, 1.0, d / np.where(d == 0, 1.0, np.abs(d)))
    q = q * phase[np.newaxis, :]
    r = np.conj(phase)[:, np.newaxis] * r
    return q, r


def _lower_max_np(a):
    return float(np.max(np.abs(np.tril(a, -1)), initial=0.0))


def _certificate_np(M, E, sigma, threshold):
    """Double-precision evaluation of the quadratic-convergence certificate."""
    n = len(sigma)
    F = E.conj().T
    eps = max(np.abs(F @ E - np.eye(n)).sum(axis=1).max(),
              np.abs(F @ M @ E - np.diag(sigma)).sum(axis=1).max())
    K = max(1.0, float(np.abs(sigma).max()))
    if n > 1:
        diff = np.abs(sigma[:, None] - sigma[None, :])
        gap = float(diff[~np.eye(n, dtype=bool)].min())
        if gap <= 2.0 ** -(DOUBLE // 2) * K:
            return eps, math.inf, K, math.inf
        kappa = max(1.0, 1.0 / gap)
    else:
        kappa = 1.0
    return eps, kappa, K, kappa ** 2 * (K + 1) ** 3 * eps


def _report_np(vals, threshold):
    eps, kappa, K, u = vals
    cast = (lambda x: arb("inf") if math.isinf(x) else to_arb(x))
    return CertificateReport(cast(eps), cast(kappa), cast(K), cast(u), threshold, bool(u <= threshold))


# ---------------------------------------------------------------------------
# iterations
# ---------------------------------------------------------------------------

def qr_basic(A: Matrix, threshold=QR_BASIC_THRESHOLD, max_iter=10_000) -> QRBasicResult:
    """Plain QR iteration until ``max |strictly lower entry| <= threshold``.

    The test is made after each factorization, so ``iterations`` counts QR
    factorizations and is at least 1.  On hitting ``max_iter`` the partial
    result is returned with ``converged=False``.
    """
    if A.prec <= DOUBLE:
        a = A.to_numpy().astype(complex if not A.is_real() else float)
        Qacc = np.eye(A.n, dtype=a.dtype)
        err = math.inf
        for k in range(1, max_iter + 1):
            q, r = _np_qr(a)
            a = r @ q
            Qacc = Qacc @ q
            err = _lower_max_np(a)
            if err <= threshold:
                return QRBasicResult(Spectrum(np.diagonal(a), A.prec), Matrix.from_numpy(Qacc, A.prec),
                                     k, True, err)
        return QRBasicResult(Spectrum(np.diagonal(a), A.prec), Matrix.from_numpy(Qacc, A.prec),
                             max_iter, False, err)
    Ak, Qacc, err = A, identity(A.n, A.prec), math.inf
    for k in range(1, max_iter + 1):
        Q, R = householder_qr(Ak)
        Ak, Qacc = R @ Q, Qacc @ Q
        err = norm_lower_tri_max(Ak)
        if err <= threshold:
            return QRBasicResult(Spectrum.from_matrix(Ak), Qacc, k, True, float(err))
    return QRBasicResult(Spectrum.from_matrix(Ak), Qacc, max_iter, False, float(err))


def qr_with_newton_test(A: Matrix, M_ref: Matrix | None = None, max_iter=10_000,
                        cert_threshold=THRESHOLD) -> QRNewtonResult:
    """QR iteration that stops once the Newton certificate holds.

    After factorization ``k`` the candidate point is ``Sigma_k = diag(A_k)``,
    ``E_k = Q_1 ... Q_k`` and ``F_k = E_k^*``, tested against ``M_ref``
    (default ``A``).  A candidate with colliding diagonal entries counts as
    failing.  Returns the last candidate; ``certified`` says whether it
    passed within ``max_iter`` factorizations.
    """
    M_ref = A if M_ref is None else M_ref
    report = None
    if A.prec <= DOUBLE:
        dtype = float if (A.is_real() and M_ref.is_real()) else complex
        a = A.to_numpy().astype(dtype)
        m = M_ref.to_numpy().astype(dtype)
        E = np.eye(A.n, dtype=dtype)
        for k in range(1, max_iter + 1):
            q, r = _np_qr(a)
            a = r @ q
            E = E @ q
            vals = _certificate_np(m, E, np.diagonal(a).copy(), cert_threshold)
            if vals[3] <= cert_threshold:
                break
        Em = Matrix.from_numpy(E, A.prec)
        report = _report_np(vals, cert_threshold)
        return QRNewtonResult(Spectrum(np.diagonal(a), A.prec), Em, Em.H, k, report, report.satisfied)
    Ak, E = A, identity(A.n, A.prec)
    for k in range(1, max_iter + 1):
        Q, R = householder_qr(Ak)
        Ak, E = R @ Q, E @ Q
        sigma = Spectrum.from_matrix(Ak)
        try:
            report = certificate(M_ref, E, E.H, sigma, cert_threshold)
        except SpectrumCollision:
            report = None
        if report is not None and report.satisfied:
            break
    ok = report is not None and report.satisfied
    return QRNewtonResult(Spectrum.from_matrix(Ak), E, E.H, k, report, ok)


def hybrid_eigensolve(A: Matrix, prec=None, base_prec=DOUBLE, max_qr_iter=10_000,
                      cert_threshold=THRESHOLD, target_residual=None, max_iter=64):
    """QR until the Newton certificate holds, then Newton at full precision.

    Parameters
    ----------
    A : Matrix
        Matrix with simple eigenvalues, ideally normal.
    prec : int, optional
        Precision of the Newton phase; defaults to ``A.prec``.
    base_prec : int
        Precision of the QR phase.
    max_qr_iter, cert_threshold :
        Passed to :func:`qr_with_newton_test`.
    target_residual, max_iter :
        Passed to :func:`simdiag.diag.diag_solve`.

    Returns
    -------
    state : DiagState
    trace : IterationTrace
        Newton trace; ``metadata`` records the QR iteration count and whether
        the hand-off point was certified.
    """
    prec = A.prec if prec is None else prec
    low = A.at_precision(base_prec)
    qr = qr_with_newton_test(low, low, max_qr_iter, cert_threshold)
    E = qr.E.at_precision(prec)
    state, trace, _ = diag_solve(A.at_precision(prec), E, E.H, qr.spectrum.at_precision(prec),
                                 target_residual=target_residual, max_iter=max_iter)
    trace.solver = "hybrid"
    trace.metadata.update({"qr_iterations": qr.iterations, "qr_certified": qr.certified,
                           "base_precision_bits": base_prec})
    return state, trace
