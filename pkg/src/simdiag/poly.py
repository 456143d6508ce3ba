"""Matrices whose eigenvalues are the roots of a monic polynomial.

Two constructions are provided: the companion matrix, and Fiedler's
symmetric arrowhead built from nodes that interlace the roots.  Coefficients
are kept as exact rationals and only rounded when a matrix is built, so large
coefficients such as those of ``prod (x - i)`` survive intact.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .diag import diag_solve
from .errors import PositiveRadicand
from .inverse import inverse_solve
from .mp import DOUBLE, Matrix, Spectrum, to_arb, working
from .qr import qr_with_newton_test

ROUTES = ("companion", "arrowhead")


def _exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


@dataclass(frozen=True)
class Polynomial:
    """Monic ``x^n + a_{n-1} x^{n-1} + ... + a_0``; ``coeffs`` is ``(a_0, ..., a_{n-1})``."""

    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) < 1:
            raise ValueError("degree must be at least 1")
        object.__setattr__(self, "coeffs", tuple(_exact(a) for a in self.coeffs))

    @classmethod
    def from_roots(cls, roots) -> "Polynomial":
        c = [Fraction(1)]                     # highest degree first
        for r in roots:
            r = _exact(r)
            c = [a - r * b for a, b in zip(c + [Fraction(0)], [Fraction(0)] + c)]
        return cls(tuple(reversed(c[1:])))

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def __call__(self, x):
        """Horner evaluation; exact for rational ``x``."""
        acc = 1
        for a in reversed(self.coeffs):
            acc = acc * x + a
        return acc

    def derivative_at(self, x):
        n = self.degree
        full = list(self.coeffs) + [Fraction(1)]
        acc = 0
        for k in range(n, 0, -1):
            acc = acc * x + k * full[k]
        return acc

    def to_json(self) -> dict:
        return {"degree": self.degree, "coeffs": [str(a) for a in self.coeffs]}

    @classmethod
    def from_json(cls, obj) -> "Polynomial":
        coeffs = obj["coeffs"]
        if "degree" in obj and int(obj["degree"]) != len(coeffs):
            raise ValueError(f"degree {obj['degree']} does not match {len(coeffs)} coefficients")
        return cls(tuple(coeffs))


def save_polynomial(path, P: Polynomial):
    Path(path).write_text(json.dumps(P.to_json()))


def load_polynomial(path) -> Polynomial:
    return Polynomial.from_json(json.loads(Path(path).read_text()))


def wilkinson_poly(n: int) -> Polynomial:
    """``prod_{i=1..n} (x - i)`` with exact integer coefficients."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return Polynomial.from_roots(range(1, n + 1))


def wilkinson_nodes(n: int) -> tuple:
    """Interlacing nodes ``i + 1/2`` for ``i = 1 .. n-1``."""
    return tuple(Fraction(2 * i + 1, 2) for i in range(1, n))


def companion_matrix(P: Polynomial, prec=DOUBLE) -> Matrix:
    """Ones on the subdiagonal and ``-a_0 .. -a_{n-1}`` down the last column."""
    n = P.degree
    rows = [[0] * n for _ in range(n)]
    for i in range(1, n):
        rows[i][i - 1] = 1
    for i, a in enumerate(P.coeffs):
        rows[i][n - 1] = to_arb(-a, prec)
    return Matrix.from_rows(rows, prec)


@dataclass(frozen=True)
class ArrowheadData:
    """``A = [[diag(b), c], [c^T, d]]``; ``c_squared`` is kept exactly."""

    b: tuple
    c_squared: tuple
    c: tuple
    d: Fraction


def fiedler_arrowhead(P: Polynomial, b, prec=DOUBLE):
    """Symmetric arrowhead matrix with characteristic polynomial ``P``.

    With ``Q(x) = prod (x - b_i)`` the couplings are
    ``c_i = sqrt(-P(b_i) / Q'(b_i)) >= 0`` and the corner is
    ``d = -a_{n-1} - sum b_i``.  ``c_i^2`` and ``d`` are computed exactly.

    Raises
    ------
    PositiveRadicand
        If some ``P(b_i) / Q'(b_i) > 0``, which happens when the nodes do not
        interlace the roots.
    ValueError
        If the nodes are not strictly increasing, there are not ``n - 1`` of
        them, or a node is a root of ``P``.
    """
    n = P.degree
    b = tuple(_exact(x) for x in b)
    if len(b) != n - 1:
        raise ValueError(f"need {n - 1} nodes for degree {n}, got {len(b)}")
    if any(x >= y for x, y in zip(b, b[1:])):
        raise ValueError("nodes must be strictly increasing")
    csq = []
    for i, bi in enumerate(b):
        p = P(bi)
        if p == 0:
            raise ValueError(f"node {bi} is a root of the polynomial")
        dq = math.prod((bi - bj for j, bj in enumerate(b) if j != i), start=Fraction(1))
        r = -p / dq
        if r < 0:
            raise PositiveRadicand(f"P(b)/Q'(b) = {float(-r):.6g} > 0 at node {bi}; "
                                   "nodes do not interlace the roots")
        csq.append(r)
    d = -P.coeffs[-1] - sum(b, Fraction(0))
    with working(prec):
        c = tuple(to_arb(x, prec + 16).sqrt().mid() for x in csq)
        c = tuple(to_arb(x, prec) for x in c)
    data = ArrowheadData(b, tuple(csq), c, d)
    rows = [[0] * n for _ in range(n)]
    for i in range(n - 1):
        rows[i][i] = to_arb(b[i], prec)
        rows[i][n - 1] = rows[n - 1][i] = c[i]
    rows[n - 1][n - 1] = to_arb(d, prec)
    return data, Matrix.from_rows(rows, prec)


def _bootstrap_symmetric(A: Matrix, bootstrap):
    low = A.at_precision(DOUBLE)
    if bootstrap == "qr":
        res = qr_with_newton_test(low, low)
        return res.E, res.spectrum, {"qr_iterations": res.iterations, "qr_certified": res.certified}
    w, v = np.linalg.eigh(low.to_numpy())
    return Matrix.from_numpy(v, DOUBLE), Spectrum(w, DOUBLE), {}


def refine_roots(P: Polynomial, base_init="arrowhead", nodes=None, prec_bits=1024, iters=4,
                 bootstrap="lapack"):
    """Roots of ``P`` as refined eigenvalues of a matrix built from it.

    Parameters
    ----------
    P : Polynomial
        Polynomial with simple roots.
    base_init : {"arrowhead", "companion"}
        Matrix to diagonalize.
    nodes : sequence, optional
        Interlacing nodes for the arrowhead; defaults to ``i + 1/2``, which
        suits polynomials whose roots are ``1 .. n``.
    prec_bits, iters :
        Precision and number of Newton iterations.
    bootstrap : {"lapack", "qr"}
        Double-precision starting point for the arrowhead: LAPACK's symmetric
        eigensolver, or QR iteration stopped as soon as the Newton
        certificate holds (a much rougher start).  The
        companion matrix is not normal, so it always starts from LAPACK's
        general eigensolver with the left factor inverted at ``prec_bits``.

    Returns
    -------
    roots : Spectrum
        Ordered by increasing real part.
    trace : IterationTrace
    """
    if base_init not in ROUTES:
        raise ValueError(f"unknown route {base_init!r}; expected one of {ROUTES}")
    n = P.degree
    meta = {"route": base_init, "degree": n}
    if base_init == "arrowhead":
        nodes = wilkinson_nodes(n) if nodes is None else nodes
        _, A = fiedler_arrowhead(P, nodes, prec_bits)
        E, sigma, extra = _bootstrap_symmetric(A, bootstrap)
        meta.update(extra)
        E = E.at_precision(prec_bits)
        F = E.T
    else:
        A = companion_matrix(P, prec_bits)
        w, v = np.linalg.eig(A.to_numpy().astype(float))
        order = np.argsort(w.real, kind="stable")
        w, v = w[order], v[:, order]
        if np.all(np.abs(w.imag) == 0):
            w, v = w.real, v.real
        E = Matrix.from_numpy(v, prec_bits)
        st, _ = inverse_solve(E, Matrix.from_numpy(np.linalg.inv(v), prec_bits), max_iter=16)
        E, F = st.E, st.F
        sigma = Spectrum(w, DOUBLE)
    state, trace, _ = diag_solve(A, E, F, sigma.at_precision(prec_bits), target_residual=0,
                                 max_iter=iters)
    trace.solver = f"roots_{base_init}"
    trace.metadata.update(meta)
    vals = sorted(state.Sigma.values, key=lambda z: (float(z.real.mid()), float(z.imag.mid())))
    return Spectrum(vals, prec_bits), trace
