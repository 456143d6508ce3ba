"""Simultaneous refinement for two matrices: ``F M_k E = Sigma_k``, ``k = 1, 2``.

Unlike the single-matrix system there is no ``F E = I`` equation; the
normalisation of ``E`` and ``F`` is left free and ``F E`` need not tend to
the identity.
"""
from __future__ import annotations

from dataclasses import dataclass

from flint import acb, acb_mat, arb

from .diag import collision_floor, run_newton
from .errors import DeterminantCollapse, DimensionMismatch
from .mp import Matrix, Spectrum, identity, norm_inf, working
from .records import CertificateReport, IterationTrace

THRESHOLD = 0.094


def _pair_factors(s1: Spectrum, s2: Spectrum):
    """``(kappa, K)`` for paired spectra; raises on a vanishing 2x2 determinant."""
    if s1.n != s2.n:
        raise DimensionMismatch("paired spectra must have equal length")
    prec = max(s1.prec, s2.prec)
    one = arb(1)
    K = max(one, s1.max_abs(), s2.max_abs())
    a, b = s1.values, s2.values
    smallest = None
    with working(prec):
        for i in range(s1.n):
            for j in range(i + 1, s1.n):
                d = abs(a[i] * b[j] - a[j] * b[i]).mid()
                if smallest is None or d < smallest:
                    smallest = d
        if smallest is None:
            return one, K
        if smallest <= collision_floor(prec, K * K):
            raise DeterminantCollapse(
                f"paired diagonal entries nearly proportional: min |det| "
                f"{smallest.str(5, radius=False)} at {prec} bits")
        kappa = max(one, (1 / smallest).mid())
    return kappa, K


@dataclass(frozen=True)
class SimDiag2State:
    E: Matrix
    F: Matrix
    Sigma1: Spectrum
    Sigma2: Spectrum
    Z1: Matrix
    Z2: Matrix
    iteration: int = 0

    @classmethod
    def start(cls, M1, M2, E, F, Sigma1, Sigma2, iteration=0) -> "SimDiag2State":
        prec = max(M1.prec, M2.prec, E.prec, F.prec, Sigma1.prec, Sigma2.prec)
        E, F = E.at_precision(prec), F.at_precision(prec)
        Sigma1, Sigma2 = Sigma1.at_precision(prec), Sigma2.at_precision(prec)
        Z1 = F @ M1.at_precision(prec) @ E - Sigma1.as_matrix()
        Z2 = F @ M2.at_precision(prec) @ E - Sigma2.as_matrix()
        return cls(E, F, Sigma1, Sigma2, Z1, Z2, iteration)

    @property
    def err_res(self) -> arb:
        return max(norm_inf(self.Z1), norm_inf(self.Z2))


def solve_linearized2(Sigma1: Spectrum, Sigma2: Spectrum, Z1: Matrix, Z2: Matrix):
    """Solve ``Z_k - S_k + Sigma_k X + Y Sigma_k = 0`` for ``k = 1, 2``.

    Off the diagonal each ``(x_ij, y_ij)`` solves the 2x2 system
    ``sigma_i^k x_ij + sigma_j^k y_ij + z^k_ij = 0`` by Cramer's rule; the
    diagonals of ``X`` and ``Y`` are zero and ``S_k = diag(Z_k)``.

    Returns
    -------
    X, Y : Matrix
    S1, S2 : Spectrum
    """
    n = Sigma1.n
    prec = max(Sigma1.prec, Sigma2.prec, Z1.prec, Z2.prec)
    Sigma1, Sigma2 = Sigma1.at_precision(prec), Sigma2.at_precision(prec)
    _pair_factors(Sigma1, Sigma2)
    a, b = Sigma1.values, Sigma2.values
    z1, z2 = Z1.entries, Z2.entries
    xs = [acb(0)] * (n * n)
    ys = [acb(0)] * (n * n)
    with working(prec):
        for i in range(n):
            ai, bi = a[i], b[i]
            for j in range(i + 1, n):
                aj, bj = a[j], b[j]
                w = 1 / (ai * bj - aj * bi)
                k = i * n + j
                xs[k] = (aj * z2[k] - z1[k] * bj) * w
                ys[k] = (z1[k] * bi - ai * z2[k]) * w
                # the (j, i) system has the negated determinant
                k = j * n + i
                xs[k] = (z1[k] * bi - ai * z2[k]) * w
                ys[k] = (aj * z2[k] - z1[k] * bj) * w
    S1 = Spectrum(Z1.diagonal(), prec)
    S2 = Spectrum(Z2.diagonal(), prec)
    return Matrix(acb_mat(n, n, xs).mid(), prec), Matrix(acb_mat(n, n, ys).mid(), prec), S1, S2


def certificate2_from_residuals(Sigma1, Sigma2, epsilon, threshold=THRESHOLD) -> CertificateReport:
    kappa, K = _pair_factors(Sigma1, Sigma2)
    with working(max(Sigma1.prec, Sigma2.prec)):
        u = (4 * epsilon * kappa ** 2 * K ** 3).mid()
    return CertificateReport(epsilon, kappa, K, u, threshold, bool(u <= threshold))


def certificate2(M1, M2, E, F, Sigma1, Sigma2, threshold=THRESHOLD) -> CertificateReport:
    """Two-matrix convergence test ``4 eps kappa^2 K^3 <= threshold``.

    ``eps = max(||Z_1||, ||Z_2||)``, ``kappa = max(1, max_{i != j} 1/|det|)``
    over the 2x2 determinants of slot pairs and ``K = max(1, max |sigma^k_j|)``.
    """
    st = SimDiag2State.start(M1, M2, E, F, Sigma1, Sigma2)
    return certificate2_from_residuals(st.Sigma1, st.Sigma2, st.err_res, threshold)


def simdiag2_step(M1: Matrix, M2: Matrix, state: SimDiag2State) -> SimDiag2State:
    X, Y, S1, S2 = solve_linearized2(state.Sigma1, state.Sigma2, state.Z1, state.Z2)
    eye = identity(state.E.n, state.E.prec)
    return SimDiag2State.start(M1, M2, state.E @ (eye + X), (eye + Y) @ state.F,
                               state.Sigma1 + S1, state.Sigma2 + S2, state.iteration + 1)


def simdiag2_solve(M1, M2, E0, F0, Sigma1, Sigma2, target_residual=None, max_iter=64,
                   threshold=THRESHOLD):
    """Refine a common diagonalizer of ``M1`` and ``M2``.

    Commutation of ``M1`` and ``M2`` is not checked; the iteration only needs
    the system to admit a nearby solution.  Otherwise behaves like
    :func:`simdiag.diag.diag_solve` with
    ``err_res = max(||F M1 E - Sigma1||, ||F M2 E - Sigma2||)``.
    """
    state = SimDiag2State.start(M1, M2, E0, F0, Sigma1, Sigma2)
    prec = state.E.prec
    _pair_factors(state.Sigma1, state.Sigma2)
    if target_residual is None:
        target_residual = 2.0 ** (32 - prec)
    trace = IterationTrace("newton_simdiag2", {"n": M1.n, "precision_bits": prec, "threshold": threshold})

    def measure(s):
        err = s.err_res
        try:
            return err, certificate2_from_residuals(s.Sigma1, s.Sigma2, err, threshold)
        except DeterminantCollapse:
            return err, None

    state = run_newton(trace, state, lambda s: simdiag2_step(M1, M2, s), measure,
                       target_residual, max_iter)
    return state, trace, trace.initial_certificate
