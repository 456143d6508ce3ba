import numpy as np
import pytest
from flint import arb
from hypothesis import given
from hypothesis import strategies as st

from simdiag.inverse import CERTIFIED_RADIUS, InversePairState, inverse_solve, inverse_step
from simdiag.mp import Matrix, gaussian_array, identity, make_rng, norm_inf, working
from simdiag.records import SolveStatus

PREC = 256


def perturbed_pair(n, seed, radius, field="real", prec=PREC):
    """``(E, F)`` with ``F E = I + Z0`` and ``||Z0||_inf = radius`` (up to rounding)."""
    rng = make_rng(seed)
    e = gaussian_array(rng, (n, n), field) + 3 * np.eye(n)
    z = gaussian_array(rng, (n, n), field)
    z *= radius / np.abs(z).sum(axis=1).max()
    E = Matrix.from_numpy(e, prec)
    st_, _ = inverse_solve(E, Matrix.from_numpy(np.linalg.inv(e), prec))
    E, Einv = st_.E, st_.F
    Z0 = Matrix.from_numpy(z, prec)
    return E, (identity(n, prec) + Z0) @ Einv


def test_exact_pair_is_a_fixed_point():
    E = identity(3, PREC) * 2
    F = identity(3, PREC) / 2
    st_ = inverse_step(InversePairState.start(E, F))
    assert st_.E == E and st_.F == F and st_.residual == 0


def test_step_residual_matches_closed_form():
    E, F = perturbed_pair(5, 1, 0.3)
    s0 = InversePairState.start(E, F)
    s1 = inverse_step(s0)
    Z = s0.Z
    eye = identity(5, PREC)
    predicted = Z @ Z @ (Z - eye * 3) / 4
    assert norm_inf(s1.Z - predicted) < arb(2) ** (-PREC + 24)


@given(st.integers(1, 8), st.integers(0, 10_000), st.floats(0.01, 0.45), st.sampled_from(["real", "complex"]))
def test_contraction_squares_the_residual(n, seed, radius, field):
    E, F = perturbed_pair(n, seed, radius, field)
    s = InversePairState.start(E, F)
    floor = arb(2) ** (-PREC + 16)
    for _ in range(4):
        nxt = inverse_step(s)
        with working(PREC):
            assert nxt.residual <= (s.residual ** 2 + floor).mid()
        s = nxt


def test_solve_reports_certification_and_converges():
    E, F = perturbed_pair(6, 3, 0.4)
    state, trace = inverse_solve(E, F)
    assert trace.certified
    assert trace.status is SolveStatus.CONVERGED
    assert state.residual <= arb(2) ** (32 - PREC)
    assert trace.rows[0].err_res > CERTIFIED_RADIUS * 0.5
    assert all(b.err_res < a.err_res for a, b in zip(trace.rows, trace.rows[1:]))


def test_uncertified_start_still_runs():
    E, F = perturbed_pair(4, 0, 0.8)
    _, trace = inverse_solve(E, F, max_iter=3)
    assert not trace.certified
    assert trace.iterations == 3


def test_target_zero_runs_exactly_max_iter():
    E, F = perturbed_pair(3, 2, 0.1)
    _, trace = inverse_solve(E, F, target_residual=0, max_iter=5)
    assert trace.iterations == 5 and trace.status is SolveStatus.MAX_ITER


def test_precision_is_the_wider_of_the_two_factors():
    E, F = perturbed_pair(3, 2, 0.1)
    state, _ = inverse_solve(E.at_precision(64), F, max_iter=1)
    assert state.E.prec == PREC


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_nonfinite_inputs_are_rejected(bad):
    with pytest.raises(ArithmeticError):
        Matrix.from_numpy(np.array([[bad]]))
