"""Newton iteration for ``F E - I = 0``.

Both factors receive the same correction ``I + X`` with ``X = -Z/2``, once on
the right of ``E`` and once on the left of ``F``; the new residual is exactly
``Z^2 (Z - 3I) / 4`` so the norm squares at every step when ``||Z|| <= 1``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

from .mp import Matrix, identity, norm_inf
from .records import IterationTrace, SolveStatus

CERTIFIED_RADIUS = 0.5


@dataclass(frozen=True)
class InversePairState:
    E: Matrix
    F: Matrix
    Z: Matrix
    iteration: int = 0

    @classmethod
    def start(cls, E: Matrix, F: Matrix, iteration=0) -> "InversePairState":
        prec = max(E.prec, F.prec)
        E, F = E.at_precision(prec), F.at_precision(prec)
        return cls(E, F, F @ E - identity(E.n, prec), iteration)

    @property
    def residual(self):
        return norm_inf(self.Z)


def inverse_step(state: InversePairState) -> InversePairState:
    """One update ``E <- E (I - Z/2)``, ``F <- (I - Z/2) F``."""
    W = identity(state.E.n, state.E.prec) - state.Z / 2
    return InversePairState.start(state.E @ W, W @ state.F, state.iteration + 1)


def inverse_solve(E0: Matrix, F0: Matrix, target_residual=None, max_iter=64):
    """Iterate :func:`inverse_step` until ``||F E - I|| <= target_residual``.

    Parameters
    ----------
    E0, F0 : Matrix
        Starting pair; ``F0`` is usually a low-precision inverse of ``E0``.
    target_residual : float or arb, optional
        Stopping threshold on the infinity norm of ``Z``.  Defaults to
        ``2**(32 - prec)``.
    max_iter : int
        Hard cap on the number of updates.

    Returns
    -------
    state : InversePairState
    trace : IterationTrace
        ``trace.certified`` tells whether ``||Z_0|| < 1/2``, the sufficient
        condition for quadratic convergence.  Uncertified starts still run.
    """
    state = InversePairState.start(E0, F0)
    prec = state.E.prec
    if target_residual is None:
        target_residual = 2.0 ** (32 - prec)
    trace = IterationTrace("newton_inverse", {"n": state.E.n, "precision_bits": prec})
    err = state.residual
    trace.certified = bool(err < CERTIFIED_RADIUS)
    trace.status = SolveStatus.MAX_ITER
    for it in range(1, max_iter + 1):
        if err <= target_residual:
            trace.status = SolveStatus.CONVERGED
            break
        t0 = time.perf_counter()
        state = inverse_step(state)
        trace.add(it, None, err, time.perf_counter() - t0)
        err = state.residual
    else:
        if err <= target_residual:
            trace.status = SolveStatus.CONVERGED
    trace.final_err_res = err
    return state, trace
