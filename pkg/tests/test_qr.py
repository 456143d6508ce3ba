import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import mp_lower_max, mp_max_entry, scalar, to_mp
from simdiag.bench import random_psd
from simdiag.family import match_spectra
from simdiag.mp import (Matrix, Spectrum, gaussian_array, identity, make_rng,
                        norm_lower_tri_max, working)
from simdiag.qr import (QR_BASIC_THRESHOLD, householder_qr, hybrid_eigensolve,
                        qr_basic, qr_with_newton_test)
from simdiag.records import SolveStatus

PREC = 192


def orthogonal(n, seed, prec=PREC):
    """Orthogonal to working precision (a double-precision Q would not be)."""
    Q, _ = householder_qr(Matrix.from_numpy(gaussian_array(make_rng(seed), (n, n), "real"), prec))
    return Q


# --------------------------------------------------------------------------- factorization

def test_identity_factorizes_trivially():
    Q, R = householder_qr(identity(4, PREC))
    assert Q == identity(4, PREC) and R == identity(4, PREC)


def test_positive_upper_triangular_is_left_alone():
    A = Matrix.from_rows([[2, 1, 3], [0, 1, -4], [0, 0, 5]], PREC)
    Q, R = householder_qr(A)
    assert Q == identity(3, PREC) and R == A


@given(st.integers(1, 8), st.integers(0, 10 ** 6), st.sampled_from(["real", "complex"]))
def test_reconstruction_and_unitarity(n, seed, field):
    A = Matrix.from_numpy(gaussian_array(make_rng(seed), (n, n), field), PREC)
    Q, R = householder_qr(A)
    with mpmath.workprec(PREC):
        Am, Qm, Rm = to_mp(A, 60), to_mp(Q, 60), to_mp(R, 60)
        tol = mpmath.mpf(2) ** (16 - PREC) * n
        assert mp_max_entry(Qm * Rm - Am) <= tol * (1 + mp_max_entry(Am))
        assert mp_max_entry(Qm.H * Qm - mpmath.eye(n)) <= tol
        assert mp_lower_max(Rm) == 0
        for k in range(n):
            d = Rm[k, k]
            assert mpmath.im(d) == 0 and mpmath.re(d) >= 0


def test_zero_column_gives_zero_diagonal():
    A = Matrix.from_rows([[0, 1], [0, 2]], PREC)
    Q, R = householder_qr(A)
    assert R.entries[0] == 0
    assert np.allclose((Q @ R - A).to_numpy(), 0, atol=1e-50)


# --------------------------------------------------------------------------- plain QR

def test_diagonal_input_takes_one_step():
    A = Matrix.from_rows([[3, 0, 0], [0, 2, 0], [0, 0, 1]], PREC)
    res = qr_basic(A)
    assert res.iterations == 1 and res.converged and res.err == 0


def test_two_by_two_symmetric():
    for prec in (53, PREC):
        res = qr_basic(Matrix.from_rows([[2, 1], [1, 2]], prec))
        vals = sorted(np.real(res.spectrum.to_numpy()))
        assert res.converged and np.allclose(vals, [1, 3], atol=1e-5)


@pytest.mark.parametrize("prec", [53, PREC])
def test_psd_exit_criterion(prec):
    A = random_psd(10, make_rng(4), prec)
    res = qr_basic(A, 1e-6)
    assert res.converged
    # replay the accumulated similarity independently
    with mpmath.workprec(prec):
        Qm, Am = to_mp(res.Q, 50), to_mp(A, 50)
        Ak = Qm.H * Am * Qm
        assert mp_lower_max(Ak) <= 1e-6 * (1 + 1e-6)
        assert mp_max_entry(Qm.H * Qm - mpmath.eye(10)) <= res.iterations * 10 * 2.0 ** (16 - prec)


def test_max_iter_keeps_partial_result():
    A = random_psd(6, make_rng(1))
    res = qr_basic(A, 1e-30, max_iter=5)
    assert not res.converged and res.iterations == 5 and res.spectrum.n == 6


def test_similarity_is_preserved():
    A = random_psd(6, make_rng(2), PREC)
    res = qr_basic(A, 1e-3)
    with mpmath.workprec(PREC):
        tr0 = sum(scalar(v) for v in A.diagonal())
        tr1 = sum(scalar(v) for v in res.spectrum.values)
        # trace of the last iterate is the sum of its diagonal
        assert abs(tr0 - tr1) <= abs(tr0) * mpmath.mpf(2) ** (20 - PREC) * res.iterations


def test_numpy_and_arb_paths_agree_on_counts():
    A = random_psd(6, make_rng(5), 53)
    a = qr_basic(A)
    b = qr_basic(A.at_precision(64))
    assert abs(a.iterations - b.iterations) <= 1


# --------------------------------------------------------------------------- Newton hand-off

def test_nearly_diagonal_certifies_immediately():
    A = Matrix.from_rows([[1, 1e-9, 0], [1e-9, 5, 0], [0, 0, 9]], PREC)
    res = qr_with_newton_test(A)
    assert res.certified and res.iterations == 1 and res.report.u <= 0.136


def test_hand_off_point_satisfies_threshold():
    A = random_psd(7, make_rng(8))
    res = qr_with_newton_test(A)
    assert res.certified and res.report.satisfied
    assert res.F == res.E.H


def test_hand_off_never_needs_more_than_sampling_allows():
    A = random_psd(5, make_rng(3))
    res = qr_with_newton_test(A, max_iter=2)
    assert res.iterations <= 2


def test_hybrid_on_constructed_symmetric_matrix():
    n, prec = 8, 256
    Q = orthogonal(n, 12, prec)
    lam = Spectrum([1, 2.5, -3, 4, 7, -0.5, 10, 6], prec)
    with working(prec):
        A = Q @ lam.as_matrix() @ Q.T
    state, trace = hybrid_eigensolve(A)
    assert trace.status is SolveStatus.CONVERGED and trace.metadata["qr_certified"]
    perm = match_spectra(lam, state.Sigma)
    got = Spectrum([state.Sigma.values[j] for j in perm], prec)
    with mpmath.workprec(prec):
        err = max(abs(scalar(a) - scalar(b)) for a, b in zip(got.values, lam.values))
        assert err <= mpmath.mpf(10) ** -int(0.8 * prec * 0.30103)


def test_hybrid_on_diagonal_is_immediate():
    A = Matrix.from_rows([[1, 0], [0, 4]], 256)
    state, trace = hybrid_eigensolve(A)
    assert trace.iterations == 0 and trace.metadata["qr_iterations"] == 1
    assert state.Sigma == Spectrum([1, 4], 256)
