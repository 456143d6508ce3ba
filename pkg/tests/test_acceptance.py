"""Acceptance criteria, each run at its stated size and tolerance.

Every test prints one ``PASS``/``FAIL`` line (also collected into the pytest
terminal summary) before asserting.
"""
import math
import statistics
import time
from fractions import Fraction

import numpy as np
import pytest
from flint import arb

import conftest
from oracles import det_bareiss, to_fraction
from simdiag.bench import (RunConfig, build_test1, root_error, run_qr_compare, run_test1,
                           run_test2, run_wilkinson)
from simdiag.diag import DiagState, diag_step, solve_linearized
from simdiag.inverse import InversePairState, inverse_solve, inverse_step
from simdiag.mp import (Matrix, Spectrum, gaussian_array, identity, make_rng, norm_inf,
                        working)
from simdiag.poly import Polynomial, fiedler_arrowhead
from simdiag.records import digit_doubling
from simdiag.simdiag2 import solve_linearized2

PRECISION_FLOOR = 0.9           # digits stop doubling at about 2^(-0.9 prec)


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    conftest.ACCEPTANCE_LINES.append(line)
    return ok


def max_entry(m: Matrix) -> float:
    # magnitudes here stay far above the double underflow limit
    return float(np.abs(np.array([complex(z) for z in m.entries])).max())


# --------------------------------------------------------------------------- 1

def test_criterion_1_linearized_solves_are_exact():
    prec, wide = 256, 512
    t0 = time.perf_counter()
    solve_time = 0.0
    worst, failures, count = -math.inf, 0, 0
    for n in (2, 5, 10, 30):
        for field in ("real", "complex"):
            for seed in range(200):
                rng = make_rng(seed)
                s1 = Spectrum(gaussian_array(rng, n, field), prec)
                s2 = Spectrum(gaussian_array(rng, n, field), prec)
                Z = Matrix.from_numpy(gaussian_array(rng, (n, n), field), prec)
                D = Matrix.from_numpy(gaussian_array(rng, (n, n), field), prec)
                ts = time.perf_counter()
                u = solve_linearized(s1, Z, D)
                X2, Y2, S1, S2 = solve_linearized2(s1, s2, Z, D)
                solve_time += time.perf_counter() - ts
                with working(wide):
                    Zw, Dw = Z.at_precision(wide), D.at_precision(wide)
                    A1, A2 = s1.as_matrix().at_precision(wide), s2.as_matrix().at_precision(wide)
                    X, Y = u.X.at_precision(wide), u.Y.at_precision(wide)
                    res = [
                        Zw + X + Y,
                        Dw - u.S.as_matrix().at_precision(wide) + A1 @ X + Y @ A1,
                        Zw - S1.as_matrix().at_precision(wide) + A1 @ X2.at_precision(wide)
                        + Y2.at_precision(wide) @ A1,
                        Dw - S2.as_matrix().at_precision(wide) + A2 @ X2.at_precision(wide)
                        + Y2.at_precision(wide) @ A2,
                    ]
                    size = 1 + max(max_entry(m) for m in (Zw, Dw, A1, A2))
                    for r in res:
                        rel = max_entry(r) / size
                        count += 1
                        worst = max(worst, math.log2(rel) if rel > 0 else -math.inf)
                        failures += not rel <= 2.0 ** -240
    elapsed = time.perf_counter() - t0
    # the budget covers the two linearized solves; the high-precision residual
    # replay is verification overhead and is reported separately
    ok = failures == 0 and solve_time < 10
    report(1, ok, f"{count} residual equations, {failures} above 2^-240 "
                  f"(worst 2^{worst:.1f}), solves {solve_time:.1f} s (limit 10 s), "
                  f"{elapsed:.1f} s including verification")
    assert ok


# --------------------------------------------------------------------------- 2, 3

def certified_decay(number, runner, subcommand, threshold):
    lines_ok = True
    details = []
    for field in ("real", "complex"):
        certified, bound_ok, final_ok, slowest = 0, True, True, 0.0
        for seed in range(20):
            cfg = RunConfig(subcommand, n=10, perturb_exp=6, field=field, seed=seed,
                            precision_bits=1024, iters=7)
            t0 = time.perf_counter()
            trace = runner(cfg)
            slowest = max(slowest, time.perf_counter() - t0)
            u1 = trace.rows[0].certificate
            if u1 is None or not u1 <= threshold:
                continue
            certified += 1
            eps = trace.residuals()
            with working(1024):
                for i, e in enumerate(eps):
                    bound_ok &= bool(e <= (arb(2) ** (1 - 2 ** i) * eps[0]).mid())
            final_ok &= bool(trace.final_err_res <= arb("1e-250"))
        ok = certified >= 16 and bound_ok and final_ok and slowest < 5
        lines_ok &= ok
        details.append(f"{field}: {certified}/20 certified at iteration 1 (need 16), "
                       f"decay bound {'held' if bound_ok else 'violated'}, "
                       f"final<=1e-250 {'yes' if final_ok else 'no'}, slowest run {slowest:.2f} s")
    report(number, lines_ok, "; ".join(details))
    return lines_ok


def test_criterion_2_single_matrix_certified_decay():
    assert certified_decay(2, run_test1, "test1", 0.136)


def test_criterion_3_two_matrix_certified_decay():
    assert certified_decay(3, run_test2, "test2", 0.094)


# --------------------------------------------------------------------------- 4

CRITERION_4 = [(t, f, n) for n in (10, 50, 100) for t in ("test1", "test2") for f in ("real", "complex")]


@pytest.mark.slow
@pytest.mark.parametrize("subcommand,field,n", CRITERION_4,
                         ids=[f"{t}-{f}-n{n}" for t, f, n in CRITERION_4])
def test_criterion_4_convergence_beyond_certificate(subcommand, field, n):
    runner = run_test1 if subcommand == "test1" else run_test2
    floor = arb(2) ** (-PRECISION_FLOOR * 1024)
    good, slowest, bad_seeds = 0, 0.0, []
    for seed in range(10):
        cfg = RunConfig(subcommand, n=n, perturb_exp=3, field=field, seed=seed,
                        precision_bits=1024, iters=7)
        t0 = time.perf_counter()
        trace = runner(cfg)
        slowest = max(slowest, time.perf_counter() - t0)
        if digit_doubling(trace.residuals(), ratio=1.9, start=1e-4, floor=floor):
            good += 1
        else:
            bad_seeds.append(seed)
    ok = good >= 9 and (n < 100 or slowest < 60)
    report(4, ok, f"{subcommand} {field} n={n}: {good}/10 digit-doubling (need 9), "
                  f"failing seeds {bad_seeds}, slowest run {slowest:.1f} s")
    assert ok


# --------------------------------------------------------------------------- 5

def test_criterion_5_inverse_pair_contraction():
    prec = 256
    noise = arb(2) ** (-prec + 16)
    step_ok, bound_ok = True, True
    for seed in range(100):
        rng = make_rng(seed)
        n = 2 + seed % 19
        field = "real" if seed % 2 == 0 else "complex"
        e = gaussian_array(rng, (n, n), field) + 3 * np.eye(n)
        z = gaussian_array(rng, (n, n), field)
        z *= 0.4 * (1 - 1e-9) / np.abs(z).sum(axis=1).max()
        st_, _ = inverse_solve(Matrix.from_numpy(e, prec), Matrix.from_numpy(np.linalg.inv(e), prec))
        E, Einv = st_.E, st_.F
        F = (identity(n, prec) + Matrix.from_numpy(z, prec)) @ Einv
        s = InversePairState.start(E, F)
        step_ok &= bool(s.residual <= arb("0.4") + noise)
        for i in range(1, 8):
            nxt = inverse_step(s)
            with working(prec):
                step_ok &= bool(nxt.residual <= (s.residual ** 2 + noise).mid())
                bound = (arb(2) ** (1 - 2 ** i) * arb("0.4")).mid()
                # the bound is only meaningful above the rounding level
                if bound > 2 * noise:
                    bound_ok &= bool(nxt.residual <= bound)
            s = nxt
    ok = step_ok and bound_ok
    report(5, ok, f"100 states: step contraction {'held' if step_ok else 'violated'}, "
                  f"2^(1-2^i)*0.4 bound {'held' if bound_ok else 'violated'}")
    assert ok


# --------------------------------------------------------------------------- 6

def test_criterion_6_wilkinson_twenty():
    t0 = time.perf_counter()
    roots, trace = run_wilkinson(20, prec=1024, iters=6, route="arrowhead")
    elapsed = time.perf_counter() - t0
    eps = trace.residuals()
    err = root_error(roots)
    ok = (eps[4] <= arb("1e-200") and eps[6] <= arb("1e-280") and err <= -50 and elapsed < 10)
    report(6, ok, f"start {eps[0].str(3, radius=False)}, iter4 {eps[4].str(3, radius=False)}, "
                  f"iter6 {eps[6].str(3, radius=False)}, max|root-k| 1e{err:.0f}, {elapsed:.1f} s")
    assert ok


# --------------------------------------------------------------------------- 7

def test_criterion_7_qr_with_newton_test_stops_no_later():
    rows = run_qr_compare(3, 20, trials=10, seed=0, threshold=1e-6, cert_threshold=0.136)
    both = [r for r in rows if r.iters_alg1 >= 0 and r.iters_alg3 >= 0]
    wins = sum(r.iters_alg3 <= r.iters_alg1 for r in both)
    frac = wins / len(rows)
    by_n = {}
    for r in rows:
        by_n.setdefault(r.n, []).append(r.iters_alg3 >= 0 and r.iters_alg3 <= r.iters_alg1)
    per_n = " ".join(f"{n}:{sum(v)}" for n, v in by_n.items())
    ok = frac >= 0.9
    report(7, ok, f"{wins}/{len(rows)} trials with alg3 <= alg1 ({frac:.0%}, need 90%); per n {per_n}")
    assert ok


# --------------------------------------------------------------------------- 8

def median_step_time(n, prec=128, repeats=3):
    inst = build_test1(RunConfig(n=n, perturb_exp=6, field="real", seed=0, precision_bits=prec))
    state = DiagState.start(inst.M, inst.E, inst.F, inst.Sigma)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        state = diag_step(inst.M, state)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def test_criterion_8_step_cost_scaling():
    t100 = median_step_time(100)
    t200 = median_step_time(200)
    ratio = t200 / t100
    ok = ratio <= 10
    report(8, ok, f"median diag_step {t100:.3f} s at n=100, {t200:.3f} s at n=200, ratio {ratio:.2f} (limit 10)")
    assert ok


# --------------------------------------------------------------------------- 9

def test_criterion_9_arrowhead_identity():
    prec = 256
    rng = make_rng(2024)
    node_ok, det_ok = True, True
    for trial in range(50):
        n = 2 + trial % 5
        while True:
            raw = np.sort(rng.standard_normal(n) * 4)
            if np.diff(raw).min() > 1e-3:
                break
        roots = [Fraction(float(r)) for r in raw]
        nodes = [(a + b) / 2 for a, b in zip(roots, roots[1:])]
        P = Polynomial.from_roots(roots)
        info, A = fiedler_arrowhead(P, nodes, prec)
        tol = Fraction(2) ** (16 - prec)
        for i, (b, c) in enumerate(zip(info.b, info.c)):
            dq = math.prod((b - bj for j, bj in enumerate(info.b) if j != i), start=Fraction(1))
            lhs, rhs = P(b), -to_fraction(c) ** 2 * dq
            node_ok &= abs(lhs - rhs) <= tol * max(1, abs(lhs), abs(rhs))
        rows = [[to_fraction(z.real) for z in row] for row in A.rows()]
        scale = 1 + max(abs(a) for a in P.coeffs)
        for k in range(n + 1):
            x = roots[0] - 1 + Fraction(k) * (roots[-1] - roots[0] + 2) / n
            d = det_bareiss([[(x if i == j else 0) - rows[i][j] for j in range(n)] for i in range(n)])
            det_ok &= abs(d - P(x)) <= tol * scale * max(1, abs(x)) ** n
    ok = node_ok and det_ok
    report(9, ok, f"50 polynomials of degree 2..6: node identity {'held' if node_ok else 'violated'}, "
                  f"det(xI-A)=P(x) at n+1 points {'held' if det_ok else 'violated'}")
    assert ok
