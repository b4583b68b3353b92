"""Acceptance gate: eleven machine-checked criteria for the growth suite.

Each test prints one pass/fail line so the gate can be read off a plain
pytest run. Heavy trajectories are computed once per module and shared.
"""

import math
import time

import numpy as np
import pytest

from specgrowth import (
    CommutatorChain,
    GrowthRecord,
    PropagationPlan,
    build_halfwave,
    build_harmonic,
    build_zoll_surrogate,
    chodosh_order_check,
    conjugated_potential,
    cosine_potential,
    expand_ad_power,
    fit_growth_exponent,
    growth_lower_constant,
    lie_norm_expansion,
    oracle_propagate,
    propagate,
    sobolev_norm,
    verify_nilpotency,
)

TWO_PI = 2.0 * math.pi
DELTA = 0.25
EPSILON = 0.25
FIT_WINDOW = (100.0, 1000.0)
RICHARDSON_DENOMS = (250, 500, 1000)


@pytest.fixture
def report(capsys):
    """Print one live pass/fail line per criterion, then enforce it."""

    def _report(index, ok, detail):
        line = f"criterion {index}: {'PASS' if ok else 'FAIL'} ({detail})"
        with capsys.disabled():
            print(line, flush=True)
        assert ok, line

    return _report


def growth_fits(model, t_end=1000.0):
    plan = PropagationPlan(t_end=t_end, record_orders=(1.0, 2.0))
    traj = propagate(model, model.basis_state(0), plan)
    record = GrowthRecord.from_trajectory(traj, (1.0, 2.0))
    fits = {r: fit_growth_exponent(record, r, window=FIT_WINDOW) for r in (1.0, 2.0)}
    return record, fits


@pytest.fixture(scope="module")
def harmonic_run():
    start = time.perf_counter()
    model = build_harmonic(8192, DELTA)
    record, fits = growth_fits(model)
    return record, fits, time.perf_counter() - start


@pytest.fixture(scope="module")
def halfwave_run():
    model = build_halfwave(1064, 0.5, cosine_potential(EPSILON))
    return growth_fits(model)


@pytest.fixture(scope="module")
def zoll_run():
    model = build_zoll_surrogate(1064, 1.0, cosine_potential(EPSILON))
    record, fits = growth_fits(model)
    return model, record, fits


@pytest.fixture(scope="module")
def stepper_runs():
    """Final states of both steppers at t = 2 pi for three step sizes."""
    model = build_harmonic(256, DELTA)
    rng = np.random.default_rng(2026)
    c = rng.normal(size=256) + 1j * rng.normal(size=256)
    psi0 = model.state(c / np.linalg.norm(c))
    exact = oracle_propagate(model, psi0, TWO_PI)
    runs = {}
    for scheme in ("magnus-midpoint", "strang"):
        errors = []
        final_norms = []
        for denom in RICHARDSON_DENOMS:
            plan = PropagationPlan(
                t_end=TWO_PI,
                dt=TWO_PI / denom,
                scheme=scheme,
                sample_times=np.array([TWO_PI]),
                record_orders=(1.0,),
            )
            traj = propagate(model, psi0, plan, leakage_threshold=math.inf)
            state = traj.states[-1]
            errors.append(float(np.linalg.norm(state.coeffs - exact.coeffs)))
            final_norms.append(state.norm())
        runs[scheme] = (errors, final_norms)
    return model, psi0, exact, runs


def richardson_slope(errors):
    x = np.log([TWO_PI / d for d in RICHARDSON_DENOMS])
    y = np.log(errors)
    design = np.column_stack([np.ones_like(x), x])
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(sol[1])


def test_criterion_01_harmonic_growth_law(harmonic_run, report):
    record, fits, elapsed = harmonic_run
    s1, s2 = fits[1.0].slope, fits[2.0].slope
    leak = float(np.max(record.leakage))
    ok = (
        abs(s1 - 1.0) <= 0.1
        and abs(s2 - 2.0) <= 0.15
        and leak < 1e-10
        and elapsed < 60.0
    )
    report(
        1,
        ok,
        f"slopes {s1:.4f}/{s2:.4f}, max leakage {leak:.2e}, {elapsed:.2f}s",
    )


def test_criterion_02_halfwave_growth(halfwave_run, report):
    _record, fits = halfwave_run
    s1, s2 = fits[1.0].slope, fits[2.0].slope
    ok = abs(s1 - 1.0) <= 0.15 and abs(s2 - 2.0) <= 0.15
    report(2, ok, f"slopes {s1:.4f}/{s2:.4f}")


def test_criterion_03_zoll_growth_and_corrector(zoll_run, report):
    model, _record, fits = zoll_run
    s1, s2 = fits[1.0].slope, fits[2.0].slope
    jj = np.abs(model.mode_index)
    mask = (jj >= 64) & (jj <= 512)
    products = np.abs(model.corrector[mask]) * jj[mask]
    target = 0.5  # mass^2 / 2 at mass = 1
    spread = float(np.max(np.abs(products / target - 1.0)))
    ok = abs(s1 - 1.0) <= 0.15 and abs(s2 - 2.0) <= 0.15 and spread <= 0.05
    report(
        3,
        ok,
        f"slopes {s1:.4f}/{s2:.4f}, corrector within {100 * spread:.3f}% of m^2/2",
    )


def test_criterion_04_steppers_match_oracle(stepper_runs, report):
    _model, _psi0, _exact, runs = stepper_runs
    details = []
    ok = True
    for scheme, (errors, _norms) in runs.items():
        finest = errors[-1]
        slope = richardson_slope(errors)
        at_roundoff = max(errors) <= 1e-10
        scheme_ok = finest <= 1e-4 and (abs(slope - 2.0) <= 0.2 or at_roundoff)
        ok = ok and scheme_ok
        if at_roundoff:
            details.append(
                f"{scheme} exact to roundoff (max error {max(errors):.2e}), "
                "order bound vacuous"
            )
        else:
            details.append(f"{scheme} error {finest:.2e}, order {slope:.3f}")
    report(4, ok, "; ".join(details))


def test_criterion_05_conjugated_potential_periodicity(report):
    models = (
        build_harmonic(64, DELTA),
        build_halfwave(32, 0.5, cosine_potential(EPSILON)),
        build_zoll_surrogate(32, 1.0, cosine_potential(EPSILON)),
    )
    rng = np.random.default_rng(7)
    worst = 0.0
    for model in models:
        for t in rng.uniform(0.0, 50.0, size=100):
            early = conjugated_potential(model, t)
            late = conjugated_potential(model, t + TWO_PI)
            for k in range(model.coupling.bandwidth + 1):
                dev = float(np.max(np.abs(late.band(k) - early.band(k))))
                worst = max(worst, dev)
    ok = worst <= 1e-12
    report(5, ok, f"max entry deviation over one period {worst:.2e}")


def test_criterion_06_unitarity(stepper_runs, report):
    model, psi0, exact, runs = stepper_runs
    drift = max(
        abs(norms[-1] - 1.0) for _errors, norms in runs.values()
    )
    oracle_dev = abs(exact.norm() - 1.0)
    for t in (1.0, 10.0, 100.0, 1000.0):
        oracle_dev = max(oracle_dev, abs(oracle_propagate(model, psi0, t).norm() - 1.0))
    ok = drift <= 1e-10 and oracle_dev <= 1e-12
    report(
        6,
        ok,
        f"stepper drift {drift:.2e} over 1000 steps, oracle deviation {oracle_dev:.2e}",
    )


def test_criterion_07_nilpotency(report):
    harmonic = build_harmonic(64, DELTA)
    halfwave = build_halfwave(32, 0.5, cosine_potential(EPSILON))
    chain = CommutatorChain.build(harmonic, 2)
    second = chain.interior_max_abs(2)
    rep_h = verify_nilpotency(harmonic)
    rep_w = verify_nilpotency(halfwave)
    ok = (
        second == 0.0
        and rep_w.residuals[1] == 0.0
        and rep_h.n_star == 1
        and rep_w.n_star == 1
    )
    report(
        7,
        ok,
        f"interior second bracket {second:g} (exact), surrogate residual "
        f"{rep_w.residuals[1]:g} (exact), N* = {rep_h.n_star}/{rep_w.n_star}",
    )


def test_criterion_08_polynomial_norm_exactness(report):
    model = build_harmonic(2048, DELTA)
    psi0 = model.basis_state(64)
    worst = 0.0
    for t in (1.0, 5.0, 25.0):
        poly = lie_norm_expansion(model, psi0, 1, t)
        direct = sobolev_norm(oracle_propagate(model, psi0, t), model, 1.0) ** 2
        worst = max(worst, abs(poly - direct) / direct)
    routes_ok = True
    for r in (1, 2):
        for m in range(5):
            expand_ad_power(model, m, r)  # raises if the routes disagree
    ok = worst <= 1e-8 and routes_ok
    report(
        8,
        ok,
        f"polynomial vs oracle relative error {worst:.2e}; "
        "expansion routes agree for M <= 4, r <= 2",
    )


def test_criterion_09_lower_bound_constant(report):
    model = build_harmonic(1024, DELTA)
    psi0 = model.basis_state(8)
    t = 400.0
    measured = sobolev_norm(oracle_propagate(model, psi0, t), model, 1.0) / t
    target = math.sqrt(growth_lower_constant(model, psi0, 1))
    ratio = measured / target
    ok = abs(ratio - 1.0) <= 0.02
    report(9, ok, f"measured/sqrt(c*) = {ratio:.5f} at t = {t:g}")


def test_criterion_10_symbol_order_verdicts(report):
    coupling = lambda mm, nn: np.where(np.abs(mm - nn) == 1, DELTA, 0.0)
    ladder = lambda mm, nn: np.where(mm == nn, mm + 0.5, 0.0)
    ones = lambda mm, nn: np.ones_like(mm, dtype=float)
    a_rep = chodosh_order_check(coupling, 0.0)
    k_rep = chodosh_order_check(ladder, 1.0)
    bad_rep = chodosh_order_check(ones, 0.0)
    ok = a_rep.consistent and k_rep.consistent and not bad_rep.consistent
    report(
        10,
        ok,
        f"coupling: {a_rep.description}; ladder: {k_rep.description}; "
        f"all-ones: {bad_rep.description}",
    )


def test_criterion_11_slope_ceiling(harmonic_run, halfwave_run, zoll_run, report):
    fits = [harmonic_run[1], halfwave_run[1], zoll_run[2]]
    excess = max(f[r].slope - r - 0.1 for f in fits for r in (1.0, 2.0))
    ok = excess <= 0.0
    report(11, ok, f"worst slope excess over the r + 0.1 ceiling: {excess:+.4f}")
