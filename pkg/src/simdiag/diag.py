"""Newton-type refinement of an eigendecomposition ``F M E = Sigma``, ``F E = I``.

The linearized system around ``(E, F, Sigma)`` is

    Z + X + Y = 0,        Delta - S + Sigma X + Y Sigma = 0,

with ``Z = F E - I`` and ``Delta = F M E - Sigma``.  Because ``Sigma`` is
diagonal it has a closed-form solution entry by entry, so an iteration costs a
handful of matrix products and no linear solve.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

from flint import acb, acb_mat, arb

from .errors import SpectrumCollision
from .mp import Matrix, Spectrum, identity, norm_inf, working
from .records import CertificateReport, IterationTrace, SolveStatus

THRESHOLD = 0.136
DIVERGENCE_PATIENCE = 3


def collision_floor(prec, scale) -> arb:
    """Smallest admissible separation at ``prec`` bits for values of size ``scale``."""
    with working(prec):
        return (arb(2) ** (-(prec // 2)) * scale).mid()


def _spectral_factors(sigma: Spectrum):
    """Return ``(kappa, K)`` or raise :class:`SpectrumCollision`."""
    one = arb(1)
    K = max(one, sigma.max_abs())
    gap = sigma.min_gap()
    if gap is None:
        return one, K
    if gap <= collision_floor(sigma.prec, K):
        raise SpectrumCollision(
            f"diagonal entries too close: min gap {gap.str(5, radius=False)} at {sigma.prec} bits")
    with working(sigma.prec):
        kappa = max(one, (1 / gap).mid())
    return kappa, K


@dataclass(frozen=True)
class UpdateTriple:
    X: Matrix
    Y: Matrix
    S: Spectrum


@dataclass(frozen=True)
class DiagState:
    E: Matrix
    F: Matrix
    Sigma: Spectrum
    Z: Matrix
    Delta: Matrix
    iteration: int = 0

    @classmethod
    def start(cls, M: Matrix, E: Matrix, F: Matrix, Sigma: Spectrum, iteration=0) -> "DiagState":
        prec = max(M.prec, E.prec, F.prec, Sigma.prec)
        E, F, Sigma = E.at_precision(prec), F.at_precision(prec), Sigma.at_precision(prec)
        M = M.at_precision(prec)
        FM = F @ M
        Z = F @ E - identity(E.n, prec)
        Delta = FM @ E - Sigma.as_matrix()
        return cls(E, F, Sigma, Z, Delta, iteration)

    @property
    def err_res(self) -> arb:
        """``max(||F E - I||, ||F M E - Sigma||)``."""
        return max(norm_inf(self.Z), norm_inf(self.Delta))


def solve_linearized(Sigma: Spectrum, Z: Matrix, Delta: Matrix) -> UpdateTriple:
    """Closed-form solution ``(X, Y, S)`` of the linearized system.

    ``S = diag(Delta - Z Sigma)``, ``X`` has zero diagonal, ``y_ii = -z_ii`` and
    for ``i != j``::

        x_ij = (z_ij sigma_j - delta_ij) / (sigma_i - sigma_j)
        y_ij = (delta_ij - z_ij sigma_i) / (sigma_i - sigma_j)

    Raises
    ------
    SpectrumCollision
        If two diagonal entries are closer than ``2**(-prec/2)`` (relative).
    """
    n = Sigma.n
    prec = max(Sigma.prec, Z.prec, Delta.prec)
    Sigma = Sigma.at_precision(prec)
    _spectral_factors(Sigma)
    s = Sigma.values
    z = Z.entries
    d = Delta.entries
    xs = [acb(0)] * (n * n)
    ys = [acb(0)] * (n * n)
    with working(prec):
        for i in range(n):
            si = s[i]
            row = i * n
            ys[row + i] = -z[row + i]
            for j in range(i + 1, n):
                sj = s[j]
                w = 1 / (si - sj)
                zij, dij = z[row + j], d[row + j]
                xs[row + j] = (zij * sj - dij) * w
                ys[row + j] = (dij - zij * si) * w
                # (j, i) entry uses the opposite sign of the same reciprocal
                zji, dji = z[j * n + i], d[j * n + i]
                xs[j * n + i] = (dji - zji * si) * w
                ys[j * n + i] = (zji * sj - dji) * w
        S = Spectrum([(d[i * n + i] - z[i * n + i] * s[i]).mid() for i in range(n)], prec)
    X = Matrix(acb_mat(n, n, xs).mid(), prec)
    Y = Matrix(acb_mat(n, n, ys).mid(), prec)
    return UpdateTriple(X, Y, S)


def certificate_from_residuals(Sigma: Spectrum, epsilon, threshold=THRESHOLD) -> CertificateReport:
    kappa, K = _spectral_factors(Sigma)
    with working(Sigma.prec):
        u = (kappa ** 2 * (K + 1) ** 3 * epsilon).mid()
    return CertificateReport(epsilon, kappa, K, u, threshold, bool(u <= threshold))


def certificate(M: Matrix, E: Matrix, F: Matrix, Sigma: Spectrum, threshold=THRESHOLD) -> CertificateReport:
    """Quadratic-convergence test ``kappa^2 (K + 1)^3 eps <= threshold``.

    ``eps = max(||F E - I||, ||F M E - Sigma||)``,
    ``kappa = max(1, max_{i != j} 1/|sigma_i - sigma_j|)`` and
    ``K = max(1, max_i |sigma_i|)``; all norms are infinity norms.
    """
    state = DiagState.start(M, E, F, Sigma)
    return certificate_from_residuals(state.Sigma, state.err_res, threshold)


def diag_step(M: Matrix, state: DiagState) -> DiagState:
    """Apply one update ``E(I + X)``, ``(I + Y)F``, ``Sigma + S``."""
    upd = solve_linearized(state.Sigma, state.Z, state.Delta)
    eye = identity(state.E.n, state.E.prec)
    E = state.E @ (eye + upd.X)
    F = (eye + upd.Y) @ state.F
    return DiagState.start(M, E, F, state.Sigma + upd.S, state.iteration + 1)


def run_newton(trace, state, step, measure, target_residual, max_iter):
    """Shared driver loop for the Newton-type solvers.

    ``measure(state)`` returns ``(err_res, report)``; ``report`` may be
    ``None`` when the certificate cannot be evaluated.  Rows are appended to
    ``trace`` in place; the final state is returned.
    """
    err, report = measure(state)
    trace.initial_certificate = report
    trace.certified = bool(report is not None and report.satisfied)
    trace.status = SolveStatus.MAX_ITER
    prev, growth = None, 0
    for it in range(1, max_iter + 1):
        if err <= target_residual:
            trace.status = SolveStatus.CONVERGED
            break
        certified_here = report is not None and report.satisfied
        growth = growth + 1 if (prev is not None and err > prev and not certified_here) else 0
        if growth >= DIVERGENCE_PATIENCE:
            trace.status = SolveStatus.DIVERGING
            break
        t0 = time.perf_counter()
        try:
            new_state = step(state)
        except SpectrumCollision as exc:
            trace.final_err_res = err
            exc.trace = trace
            raise
        trace.add(it, None if report is None else report.u, err, time.perf_counter() - t0)
        prev, state = err, new_state
        err, report = measure(state)
    else:
        if err <= target_residual:
            trace.status = SolveStatus.CONVERGED
    trace.final_err_res = err
    return state


def _safe_certificate(sigma, err, threshold):
    try:
        return certificate_from_residuals(sigma, err, threshold)
    except SpectrumCollision:
        return None


def diag_solve(M: Matrix, E0: Matrix, F0: Matrix, Sigma0: Spectrum, target_residual=None,
               max_iter=64, threshold=THRESHOLD):
    """Refine ``(E0, F0, Sigma0)`` towards an exact eigendecomposition of ``M``.

    Parameters
    ----------
    M : Matrix
        Matrix with simple eigenvalues.
    E0, F0, Sigma0 :
        Initial right factor, left factor and diagonal.  Slot ``k`` of
        ``Sigma0`` stays paired with column ``k`` of ``E0`` throughout.
    target_residual : optional
        Stop once ``err_res`` drops to this value.  Defaults to
        ``2**(32 - prec)``; pass 0 to run exactly ``max_iter`` iterations.
    max_iter : int
    threshold : float
        Certificate threshold (0.136 guarantees quadratic convergence).

    Returns
    -------
    state : DiagState
    trace : IterationTrace
    report : CertificateReport
        Certificate at the starting point.

    Raises
    ------
    SpectrumCollision
        If ``Sigma0`` or a later iterate has (nearly) equal entries; the
        partial trace is attached to the exception.
    """
    state = DiagState.start(M, E0, F0, Sigma0)
    prec = state.E.prec
    certificate_from_residuals(state.Sigma, arb(0))  # raises on a collided start
    if target_residual is None:
        target_residual = 2.0 ** (32 - prec)
    trace = IterationTrace("newton_diag", {"n": M.n, "precision_bits": prec, "threshold": threshold})

    def measure(s):
        err = s.err_res
        return err, _safe_certificate(s.Sigma, err, threshold)

    state = run_newton(trace, state, lambda s: diag_step(M, s), measure, target_residual, max_iter)
    return state, trace, trace.initial_certificate
