"""Diagonalizing a whole family of commuting matrices.

Two strategies are offered.  The sub-problem strategies solve for one or two
members and read every spectrum off the resulting eigenvector columns with
Rayleigh quotients.  The combination strategy folds the pencil into a single
matrix ``sum alpha_i M_i`` whose spectrum is fitted, in the least-squares
sense, to the n-th roots of unity, and diagonalizes that matrix.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from flint import acb, arb

from .diag import THRESHOLD, diag_solve
from .errors import DimensionMismatch, RankDeficient, ZeroColumn
from .mp import (Matrix, Spectrum, identity, matrix_from_json, matrix_to_json,
                 norm_inf, working, zeros)
from .records import CertificateReport
from .simdiag2 import simdiag2_solve

ROOTS_OF_UNITY_THRESHOLD = 0.272
STRATEGIES = ("subproblem1", "subproblem2", "combination")


class Pencil:
    """Ordered tuple of same-size square matrices."""

    def __init__(self, matrices):
        matrices = tuple(matrices)
        if not matrices:
            raise ValueError("a pencil needs at least one matrix")
        n = matrices[0].n
        if any(m.n != n for m in matrices):
            raise DimensionMismatch("pencil matrices must share one dimension")
        self.matrices = matrices

    @property
    def n(self):
        return self.matrices[0].n

    @property
    def p(self):
        return len(self.matrices)

    @property
    def prec(self):
        return max(m.prec for m in self.matrices)

    def __len__(self):
        return self.p

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, i):
        return self.matrices[i]


def save_pencil(path, pencil: Pencil):
    Path(path).write_text(json.dumps([matrix_to_json(m) for m in pencil]))


def load_pencil(path) -> Pencil:
    return Pencil(matrix_from_json(obj) for obj in json.loads(Path(path).read_text()))


def roots_of_unity(n, prec) -> Spectrum:
    """``exp(2 i pi k / n)`` for ``k = 0 .. n-1``, evaluated from the exact angle."""
    with working(prec):
        vals = []
        for k in range(n):
            s, c = (arb(2 * k) / n).sin_cos_pi()
            vals.append(acb(c.mid(), s.mid()))
    return Spectrum(vals, prec)


def rayleigh_extract(Mi: Matrix, E: Matrix) -> Spectrum:
    """Slot ``k`` is ``E[:,k]^* Mi E[:,k] / E[:,k]^* E[:,k]``."""
    prec = max(Mi.prec, E.prec)
    E = E.at_precision(prec)
    num = (E.H @ Mi.at_precision(prec) @ E).diagonal()
    den = (E.H @ E).diagonal()
    vals = []
    with working(prec):
        for k, (a, b) in enumerate(zip(num, den)):
            if b == 0:
                raise ZeroColumn(f"column {k} of E is zero")
            vals.append((a / b.real).mid())
    return Spectrum(vals, prec)


@dataclass(frozen=True)
class CombinationWeights:
    alpha: tuple
    target: Spectrum
    residual: arb


def _lstsq(cols, rhs, prec):
    """Least squares ``min ||S a - rhs||_2`` by Householder QR of the n x p matrix S.

    ``cols`` holds the p columns of S.  Returns ``(alpha, sigma_min_estimate)``
    where the estimate is ``1 / ||R^-1||_F`` (within a factor sqrt(p) of the
    smallest singular value).
    """
    n, p = len(rhs), len(cols)
    A = [list(c) for c in cols]         # column-major working copy
    b = list(rhs)
    with working(prec):
        for k in range(p):
            x = A[k][k:]
            nx = arb(0)
            for v in x:
                nx += (v.real * v.real + v.imag * v.imag)
            nx = nx.sqrt().mid()
            if nx == 0:
                continue
            phase = x[0] / abs(x[0]) if x[0] != 0 else acb(1)
            alpha = (-phase * nx).mid()
            v = [x[0] - alpha] + x[1:]
            vn = arb(0)
            for t in v:
                vn += t.real * t.real + t.imag * t.imag
            if vn == 0:
                continue
            scale = 2 / vn
            for col in A[k:] + [None]:
                target = b if col is None else col
                dot = acb(0)
                for vi, ti in zip(v, target[k:]):
                    dot += vi.conjugate() * ti
                f = dot * scale
                for i, vi in enumerate(v):
                    target[k + i] = (target[k + i] - vi * f).mid()
        R = [[A[j][i] for j in range(p)] for i in range(p)]
        # back substitution for alpha and for the columns of R^-1
        alpha = [acb(0)] * p
        for i in reversed(range(p)):
            if R[i][i] == 0:
                raise RankDeficient("stacked spectra matrix is rank deficient")
            acc = b[i]
            for j in range(i + 1, p):
                acc -= R[i][j] * alpha[j]
            alpha[i] = (acc / R[i][i]).mid()
        frob = arb(0)
        for c in range(p):
            e = [acb(1) if r == c else acb(0) for r in range(p)]
            y = [acb(0)] * p
            for i in reversed(range(p)):
                acc = e[i]
                for j in range(i + 1, p):
                    acc -= R[i][j] * y[j]
                y[i] = acc / R[i][i]
                frob += abs(y[i]) ** 2
        smin = (1 / frob.sqrt()).mid()
    return alpha, smin


def combine_pencil(pencil: Pencil, Sigma0s):
    """Weights ``alpha`` fitting ``S alpha`` to the roots of unity, and ``sum alpha_i M_i``.

    Column ``i`` of the n x p matrix ``S`` is ``Sigma0s[i]``.

    Raises
    ------
    RankDeficient
        When the smallest singular value of ``S`` is below
        ``2**(-prec/2) ||S||_F``.
    """
    if len(Sigma0s) != pencil.p:
        raise DimensionMismatch("need one spectrum per pencil matrix")
    n, prec = pencil.n, max([pencil.prec] + [s.prec for s in Sigma0s])
    if pencil.p > n:
        raise RankDeficient(f"{pencil.p} spectra of length {n} cannot be linearly independent")
    target = roots_of_unity(n, prec)
    cols = [list(s.at_precision(prec).values) for s in Sigma0s]
    with working(prec):
        sfro = arb(0)
        for c in cols:
            for v in c:
                sfro += abs(v.mid()) ** 2
        sfro = sfro.sqrt().mid()
    alpha, smin = _lstsq(cols, list(target.values), prec)
    with working(prec):
        if smin <= (arb(2) ** (-(prec // 2)) * sfro).mid():
            raise RankDeficient(f"stacked spectra matrix is numerically rank deficient "
                                f"(sigma_min ~ {smin.str(5, radius=False)})")
        res = arb(0)
        for r in range(n):
            acc = -target.values[r]
            for i in range(pencil.p):
                acc += cols[i][r] * alpha[i]
            res += abs(acc.mid()) ** 2
        res = res.sqrt().mid()
    M = zeros(n, prec)
    for a, Mi in zip(alpha, pencil):
        M = M + Mi.at_precision(prec) * a
    return CombinationWeights(tuple(alpha), target, res), M


def roots_of_unity_certificate(n, F0: Matrix, M: Matrix, E0: Matrix) -> CertificateReport:
    """Roots-of-unity start test ``n^2 ||F0 M E0 - Sigma|| <= 0.272``.

    ``Sigma`` is the diagonal of n-th roots of unity.  Only ``F0 M E0 - Sigma``
    enters the test; ``||F0 E0 - I||`` is reported in ``details`` because
    the single-matrix certificate it is meant to imply also involves it.
    ``kappa`` is the exact ``1 / (2 sin(pi/n))`` (1 when ``n == 1``) and
    ``K = 1``.
    """
    prec = max(F0.prec, M.prec, E0.prec)
    sigma = roots_of_unity(n, prec)
    F0, E0 = F0.at_precision(prec), E0.at_precision(prec)
    eps = norm_inf(F0 @ M.at_precision(prec) @ E0 - sigma.as_matrix())
    inv_res = norm_inf(F0 @ E0 - identity(n, prec))
    with working(prec):
        kappa = arb(1) if n == 1 else (1 / (2 * (arb(1) / n).sin_pi())).mid()
        u = (n * n * eps).mid()
    thr = ROOTS_OF_UNITY_THRESHOLD
    return CertificateReport(eps, kappa, arb(1), u, thr, bool(u <= thr),
                             {"inverse_residual": inv_res,
                              "note": "test ignores ||F0 E0 - I||; see inverse_residual"})


def match_spectra(reference: Spectrum, other: Spectrum) -> list:
    """Greedy nearest-value matching of slots.

    Returns ``perm`` with ``other[perm[k]]`` paired to ``reference[k]``.  The
    globally closest remaining pair is fixed first.
    """
    if reference.n != other.n:
        raise DimensionMismatch("spectra must have equal length")
    a = reference.to_numpy()
    b = other.to_numpy()
    pairs = sorted((abs(complex(x) - complex(y)), i, j)
                   for i, x in enumerate(a) for j, y in enumerate(b))
    perm = [None] * len(a)
    used = set()
    for _, i, j in pairs:
        if perm[i] is None and j not in used:
            perm[i] = j
            used.add(j)
    return perm


def eigen_residual(Mi: Matrix, E: Matrix, sigma: Spectrum) -> arb:
    """``max_k ||Mi e_k - sigma_k e_k||_inf / ||e_k||_inf`` over the columns of ``E``.

    Unlike ``||F Mi E - Sigma||`` this does not depend on how the columns of
    ``E`` are scaled, so it is comparable across strategies.
    """
    prec = max(Mi.prec, E.prec, sigma.prec)
    E = E.at_precision(prec)
    R = Mi.at_precision(prec) @ E - E @ sigma.at_precision(prec).as_matrix()
    n = E.n
    worst = arb(0)
    with working(prec):
        for k in range(n):
            num = max(abs(v) for v in R.column(k)).mid()
            den = max(abs(v) for v in E.column(k)).mid()
            if den == 0:
                raise ZeroColumn(f"column {k} of E is zero")
            worst = max(worst, (num / den).mid())
    return worst


def family_solve(pencil: Pencil, E0: Matrix, F0: Matrix, strategy="subproblem1",
                 target_residual=None, max_iter=64, threshold=None):
    """Common diagonalizer and all spectra of a simultaneously diagonalizable pencil.

    Parameters
    ----------
    pencil : Pencil
    E0, F0 : Matrix
        Approximate right and left diagonalizers.
    strategy : {"subproblem1", "subproblem2", "combination"}
        ``subproblem1`` refines against ``M_1`` alone, ``subproblem2``
        against ``M_1`` and ``M_2`` jointly, and ``combination`` against the
        least-squares combination whose spectrum is closest to the roots of
        unity.  Every spectrum is then read off the columns of ``E`` with
        Rayleigh quotients.
    target_residual, max_iter, threshold :
        Passed to the inner solver.

    Returns
    -------
    E, F : Matrix
    spectra : list of Spectrum
        One per pencil matrix, in the column order of ``E``.
    trace : IterationTrace
        Trace of the inner solver; ``metadata["eigen_residuals"]`` holds
        :func:`eigen_residual` for every matrix and, for ``combination``,
        ``metadata["weights"]`` and ``metadata["start_certificate"]``.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    kw = {"target_residual": target_residual, "max_iter": max_iter}
    start = [Spectrum.from_matrix(F0 @ M @ E0) for M in pencil]
    extra = {}
    if strategy == "subproblem2" and pencil.p >= 2:
        if threshold is not None:
            kw["threshold"] = threshold
        state, trace, _ = simdiag2_solve(pencil[0], pencil[1], E0, F0, start[0], start[1], **kw)
    else:
        kw["threshold"] = THRESHOLD if threshold is None else threshold
        if strategy == "combination" and pencil.p >= 2:
            weights, M = combine_pencil(pencil, start)
            report = roots_of_unity_certificate(pencil.n, F0, M, E0)
            extra["weights"] = [str(a) for a in weights.alpha]
            extra["fit_residual"] = weights.residual
            extra["start_certificate"] = report.as_dict()
            sigma0 = Spectrum.from_matrix(F0 @ M @ E0)
        else:
            M, sigma0 = pencil[0], start[0]
        state, trace, _ = diag_solve(M, E0, F0, sigma0, **kw)
    E, F = state.E, state.F
    if pencil.p == 1 and strategy != "subproblem2":
        spectra = [state.Sigma]
    else:
        spectra = [rayleigh_extract(M, E) for M in pencil]
    trace.metadata.update(extra)
    trace.metadata["strategy"] = strategy
    trace.metadata["eigen_residuals"] = [eigen_residual(M, E, s) for M, s in zip(pencil, spectra)]
    return E, F, spectra, trace
