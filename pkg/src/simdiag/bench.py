"""Seeded experiment drivers behind the command-line interface.

Each driver builds its random instance from a PCG64 stream, runs a solver and
returns plain records; output formatting lives in :mod:`simdiag.cli`.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .diag import THRESHOLD as THRESHOLD1, diag_solve
from .inverse import inverse_solve
from .mp import (DOUBLE, MIN_PREC, Matrix, Spectrum, gaussian_array,
                 log10, make_rng, norm_frobenius, to_arb, working)
from .poly import ROUTES, refine_roots, wilkinson_poly
from .qr import QR_BASIC_THRESHOLD, qr_basic, qr_with_newton_test
from .simdiag2 import THRESHOLD as THRESHOLD2, simdiag2_solve

FIELDS = ("real", "complex")
MAX_RESAMPLES = 64
SEED_STRIDE = 1_000_003         # offset between resampling attempts
QR_SENTINEL = -1


@dataclass
class RunConfig:
    """Parameters of one experiment, validated on construction."""

    subcommand: str = "test1"
    n: int = 10
    perturb_exp: int = 6
    field: str = "real"
    seed: int = 0
    precision_bits: int = 1024
    iters: int = 7
    thresholds: dict = dc_field(default_factory=dict)
    output_format: str = "csv"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.precision_bits < MIN_PREC:
            raise ValueError(f"precision must be >= {MIN_PREC} bits, got {self.precision_bits}")
        if self.perturb_exp < 0:
            raise ValueError(f"perturbation exponent must be >= 0, got {self.perturb_exp}")
        if self.field not in FIELDS:
            raise ValueError(f"field must be one of {FIELDS}, got {self.field!r}")
        if self.iters < 0:
            raise ValueError(f"iters must be >= 0, got {self.iters}")
        if self.output_format not in ("csv", "json"):
            raise ValueError(f"format must be csv or json, got {self.output_format!r}")

    def metadata(self) -> dict:
        return {"n": self.n, "field": self.field, "perturb_exp": self.perturb_exp,
                "seed": self.seed, "precision_bits": self.precision_bits}


def _small(e, prec):
    return to_arb(Fraction(1, 10 ** e), prec)


def _unit(a: np.ndarray, prec) -> Matrix:
    m = Matrix.from_numpy(a, prec)
    return m / norm_frobenius(m)


def _gap_ok(values, scale_bits):
    v = np.asarray(values)
    if len(v) < 2:
        return True
    d = np.abs(v[:, None] - v[None, :])[~np.eye(len(v), dtype=bool)]
    return d.min() > 2.0 ** -scale_bits * max(1.0, np.abs(v).max())


def _cond_limit(prec):
    # beyond ~2^40 the double inverse is too rough to seed the inverse iteration
    return min(2.0 ** (prec / 4), 2.0 ** 40)


def _exact_pair(E: np.ndarray, prec):
    """``(E, F)`` at ``prec`` bits with ``F E = I`` to working precision."""
    st, _ = inverse_solve(Matrix.from_numpy(E, prec), Matrix.from_numpy(np.linalg.inv(E), prec))
    return st.E, st.F


class Test1Instance(NamedTuple):
    M: Matrix
    E: Matrix
    F: Matrix
    Sigma: Spectrum
    offset: int


def build_test1(cfg: RunConfig) -> Test1Instance:
    """``M = E Sigma E^-1 + 10^-e A`` with ``||A||_F = 1``; draws are resampled if degenerate."""
    n, prec = cfg.n, cfg.precision_bits
    for attempt in range(MAX_RESAMPLES):
        offset = attempt * SEED_STRIDE
        rng = make_rng(cfg.seed + offset)
        E = gaussian_array(rng, (n, n), cfg.field)
        sig = gaussian_array(rng, n, cfg.field)
        A = gaussian_array(rng, (n, n), cfg.field)
        if np.linalg.cond(E) <= _cond_limit(prec) and _gap_ok(sig, prec // 4):
            break
    else:
        raise RuntimeError("could not draw a well-conditioned instance")
    Em, Fm = _exact_pair(E, prec)
    S = Spectrum(sig, prec)
    with working(prec):
        M = Em @ S.as_matrix() @ Fm + _unit(A, prec) * _small(cfg.perturb_exp, prec)
    return Test1Instance(M, Em, Fm, S, offset)


def run_test1(cfg: RunConfig):
    """Single-matrix refinement from the exact decomposition of the unperturbed matrix.

    Runs exactly ``cfg.iters`` iterations (no early stop).
    """
    inst = build_test1(cfg)
    thr = cfg.thresholds.get("certificate", THRESHOLD1)
    _, trace, _ = diag_solve(inst.M, inst.E, inst.F, inst.Sigma, target_residual=0,
                             max_iter=cfg.iters, threshold=thr)
    trace.metadata.update(cfg.metadata(), solver="newton_diag", seed_offset=inst.offset)
    return trace


class Test2Instance(NamedTuple):
    M1: Matrix
    M2: Matrix
    E0: Matrix
    F0: Matrix
    Sigma1: Spectrum
    Sigma2: Spectrum
    offset: int


def build_test2(cfg: RunConfig) -> Test2Instance:
    """``M_k = F^-1 Sigma_k E^-1`` and the perturbed start ``(E + tA, F + tB, Sigma_k + tC_k)``.

    ``t = 10^-e``; ``A`` and ``B`` have unit Frobenius norm and ``C_1``,
    ``C_2`` are diagonal with unit Frobenius norm.
    """
    n, prec = cfg.n, cfg.precision_bits
    for attempt in range(MAX_RESAMPLES):
        offset = attempt * SEED_STRIDE
        rng = make_rng(cfg.seed + offset)
        E = gaussian_array(rng, (n, n), cfg.field)
        F = gaussian_array(rng, (n, n), cfg.field)
        s1 = gaussian_array(rng, n, cfg.field)
        s2 = gaussian_array(rng, n, cfg.field)
        A = gaussian_array(rng, (n, n), cfg.field)
        B = gaussian_array(rng, (n, n), cfg.field)
        C = gaussian_array(rng, n, cfg.field)
        D = gaussian_array(rng, n, cfg.field)
        det = np.abs(s1[:, None] * s2[None, :] - s1[None, :] * s2[:, None])[~np.eye(n, dtype=bool)]
        lim = _cond_limit(prec)
        if (np.linalg.cond(E) <= lim and np.linalg.cond(F) <= lim
                and det.min() > 2.0 ** -(prec // 4) * max(1.0, np.abs(s1).max(), np.abs(s2).max()) ** 2):
            break
    else:
        raise RuntimeError("could not draw a well-conditioned instance")
    Em, Einv = _exact_pair(E, prec)
    Fm, Finv = _exact_pair(F, prec)
    S1, S2 = Spectrum(s1, prec), Spectrum(s2, prec)
    t = _small(cfg.perturb_exp, prec)
    with working(prec):
        M1 = Finv @ S1.as_matrix() @ Einv
        M2 = Finv @ S2.as_matrix() @ Einv
        E0 = Em + _unit(A, prec) * t
        F0 = Fm + _unit(B, prec) * t
        c = np.diag(C) / np.linalg.norm(C)
        d = np.diag(D) / np.linalg.norm(D)
        S10 = S1 + Spectrum.from_matrix(Matrix.from_numpy(c, prec) * t)
        S20 = S2 + Spectrum.from_matrix(Matrix.from_numpy(d, prec) * t)
    return Test2Instance(M1, M2, E0, F0, S10, S20, offset)


def run_test2(cfg: RunConfig):
    """Two-matrix refinement from a perturbed exact common diagonalizer."""
    inst = build_test2(cfg)
    thr = cfg.thresholds.get("certificate", THRESHOLD2)
    _, trace, _ = simdiag2_solve(inst.M1, inst.M2, inst.E0, inst.F0, inst.Sigma1, inst.Sigma2,
                                 target_residual=0, max_iter=cfg.iters, threshold=thr)
    trace.metadata.update(cfg.metadata(), solver="newton_simdiag2", seed_offset=inst.offset)
    return trace


# ---------------------------------------------------------------------------
# QR comparison and polynomial roots
# ---------------------------------------------------------------------------

class QRCompareRow(NamedTuple):
    n: int
    trial: int
    iters_alg1: int
    iters_alg3: int


def random_psd(n, rng, prec=DOUBLE) -> Matrix:
    """``G G^T`` for a real Gaussian ``G``."""
    G = gaussian_array(rng, (n, n), "real")
    return Matrix.from_numpy(G @ G.T, prec)


def run_qr_compare(min_n=3, max_n=20, trials=10, seed=0, threshold=QR_BASIC_THRESHOLD,
                   cert_threshold=THRESHOLD1, max_iter=20_000, prec=DOUBLE) -> list:
    """Iteration counts of plain QR and QR with the Newton test on random PSD matrices.

    A run that exhausts ``max_iter`` is recorded as ``-1``.
    """
    if min_n < 2 or max_n < min_n:
        raise ValueError("need 2 <= min_n <= max_n")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = make_rng(seed)
    rows = []
    for n in range(min_n, max_n + 1):
        for trial in range(trials):
            A = random_psd(n, rng, prec)
            b = qr_basic(A, threshold, max_iter)
            h = qr_with_newton_test(A, A, max_iter, cert_threshold)
            rows.append(QRCompareRow(n, trial, b.iterations if b.converged else QR_SENTINEL,
                                     h.iterations if h.certified else QR_SENTINEL))
    return rows


def run_wilkinson(n=20, prec=1024, iters=4, route="arrowhead", bootstrap="lapack"):
    """Roots of ``prod (x - i)`` refined at ``prec`` bits; returns ``(roots, trace)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if route not in ROUTES:
        raise ValueError(f"route must be one of {ROUTES}")
    roots, trace = refine_roots(wilkinson_poly(n), route, prec_bits=prec, iters=iters,
                                bootstrap=bootstrap)
    trace.metadata.update({"n": n, "precision_bits": prec})
    return roots, trace


def root_error(roots: Spectrum) -> float:
    """``log10 max_k |root_k - k|`` for roots sorted in increasing order."""
    with working(roots.prec):
        worst = max(abs(v - (k + 1)).mid() for k, v in enumerate(roots.values))
    return log10(worst)


__all__ = ["RunConfig", "run_test1", "run_test2", "run_qr_compare", "run_wilkinson",
           "build_test1", "build_test2", "random_psd", "QRCompareRow", "QR_SENTINEL",
           "root_error"]
