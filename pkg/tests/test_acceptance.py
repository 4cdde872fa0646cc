"""Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned.

The two baseline runs (128 x 129, t = 50) take a few minutes each and are
shared by criteria 2, 3, 4, 5, 8 and 10.
"""
import time

import numpy as np
import pytest

from stratflow import lemmas, scenarios
from stratflow.cli import main
from stratflow.diagnostics import dissipation_series, monotone_violations
from stratflow.grid import Grid
from stratflow.manufactured import ORDER_FLOOR, convergence_table, observed_order
from stratflow.profiles import Stratification
from stratflow.rearrangement import (brute_force_rearrangement, check_gradient_bound,
                                     decompose_levels, energy_gap, vertical_rearrangement)
from stratflow.transport import initial_theta, run

pytestmark = pytest.mark.slow

BASELINES = ("ipm-baseline", "stokes-baseline")

# pinned tolerances
MANUFACTURED_SECONDS = 10.0
RESID_E_TOL = 1e-3
RESID_K_TOL = 5e-3
K_MIN = 1e-12
MONOTONE_FLOOR = 1e-14
EXPONENT_FLOOR = -2.0
CASCADE_GAP = 0.8
FIT_WINDOW = (10.0, 50.0)
ORACLE_FIELDS = 25
RATIO_RANGE = (0.05, 20.0)
RATIO_SPREAD = 2.0
GRADIENT_FLOOR = 0.5
HALF_H2_REL = 0.10
EPSILONS = (0.01, 0.05, 0.1)
DRIFT_FACTOR = 5.0


@pytest.fixture(scope="session")
def baselines():
    out = {}
    for name in BASELINES:
        preset = scenarios.get_preset(name)
        t0 = time.perf_counter()
        res = run(preset.config)
        out[name] = (res, time.perf_counter() - t0)
    return out


def _series(res, name):
    return np.array([getattr(r, name) for r in res.records])


def test_c01_manufactured_convergence(verdict):
    t0 = time.perf_counter()
    orders = {}
    for model in ("ipm", "stokes"):
        for fd in (2, 4):
            rows = convergence_table(model, fd, levels=3, n1=16, n2_start=65)
            orders[(model, fd)] = observed_order(rows)
    elapsed = time.perf_counter() - t0
    ok = all(o >= ORDER_FLOOR[fd] for (_, fd), o in orders.items()) and elapsed < MANUFACTURED_SECONDS
    detail = ", ".join(f"{m}/fd{fd} {o:.2f}" for (m, fd), o in orders.items())
    verdict(1, ok, f"orders {detail}; {elapsed:.1f} s")
    assert ok


def test_c02_dissipation_identity(verdict, baselines):
    parts, ok = [], True
    for name in BASELINES:
        res, secs = baselines[name]
        d = dissipation_series(res.records, K_MIN)
        worst = float(d[:, 1].max())
        ok &= res.ok and worst <= RESID_E_TOL and len(d) > 0
        parts.append(f"{name} max {worst:.2e} over {len(d)} samples ({secs:.0f} s)")
    verdict(2, ok, "; ".join(parts) + f" (tol {RESID_E_TOL:g})")
    assert ok


def test_c03_lyapunov_monotone(verdict, baselines):
    parts, ok = [], True
    for name in BASELINES:
        res, _ = baselines[name]
        vE = len(monotone_violations(_series(res, "E"), MONOTONE_FLOOR))
        vK = len(monotone_violations(_series(res, "K"), MONOTONE_FLOOR))
        ok &= res.ok and vE == 0 and vK == 0
        parts.append(f"{name} E/K violations {vE}/{vK}")
    verdict(3, ok, "; ".join(parts))
    assert ok


def test_c04_second_variation(verdict, baselines):
    parts, ok = [], True
    for name in BASELINES:
        res, _ = baselines[name]
        d = dissipation_series(res.records, K_MIN)
        worst = float(d[:, 2].max())
        ok &= worst <= RESID_K_TOL
        parts.append(f"{name} max {worst:.2e}")
    verdict(4, ok, "; ".join(parts) + f" (tol {RESID_K_TOL:g})")
    assert ok


def test_c05_decay_exponents(verdict, baselines):
    parts, ok = [], True
    for name in BASELINES:
        res, _ = baselines[name]
        t = _series(res, "t")
        fE = lemmas.fit_power_law(lemmas.Trajectory.clipped(t, _series(res, "E")), *FIT_WINDOW)
        K = lemmas.Trajectory.clipped(t[1:], _series(res, "K")[1:])
        ts = t[(t >= FIT_WINDOW[0]) & (t <= FIT_WINDOW[1])]
        fK = lemmas.fit_power_law(lemmas.Trajectory(ts, lemmas.time_average(K, ts)), *FIT_WINDOW)
        floor_ok = fE.exponent <= EXPONENT_FLOOR
        cascade_ok = fK.exponent <= fE.exponent - CASCADE_GAP
        ok &= floor_ok and cascade_ok
        parts.append(f"{name} E {fE.exponent:.3f} (floor {EXPONENT_FLOOR}: {'ok' if floor_ok else 'no'}), "
                     f"avg K {fK.exponent:.3f} (cascade: {'ok' if cascade_ok else 'no'})")
    verdict(5, ok, "; ".join(parts))
    assert ok


def _oracle_field(grid, rng):
    X1, X2 = grid.mesh
    f = 1.0 - X2
    amp = rng.choice([0.01, 0.05, 0.3])
    for _ in range(4):
        k, m = rng.integers(1, 6), rng.integers(1, 4)
        f = f + amp * rng.normal() * np.sin(k * X1 + rng.uniform(0, 2 * np.pi)) * np.sin(m * np.pi * X2)
    return f


def test_c06_rearrangement_oracle(verdict):
    grid = Grid(128, 129)
    rng = np.random.default_rng(20240601)
    worst, gap_ok, idem_ok = 0.0, True, True
    for _ in range(ORACLE_FIELDS):
        f = _oracle_field(grid, rng)
        star = vertical_rearrangement(grid, f)
        worst = max(worst, float(np.max(np.abs(star - brute_force_rearrangement(grid, f)))))
        gap_ok &= energy_gap(grid, f, star=star)["gap"] >= 0.0
        idem_ok &= np.array_equal(vertical_rearrangement(grid, grid.lift(star)), star)
    ok = worst <= 2.0 / grid.n2 and gap_ok and idem_ok
    verdict(6, ok, f"{ORACLE_FIELDS} fields: sup diff {worst:.2e} (tol {2 / grid.n2:.2e}), "
                   f"gap >= 0 {gap_ok}, idempotent {idem_ok}")
    assert ok


def test_c07_gap_ratios(verdict):
    grid = Grid(128, 129)
    parts, ok = [], True
    for name in BASELINES:
        cfg = scenarios.get_preset(name).config
        strat = Stratification.parse(cfg.rho_s)
        ratios, grads, h2 = [], [], []
        for eps in EPSILONS:
            f = grid.lift(strat(grid.x2)) + initial_theta(grid, cfg.ic, eps)
            gap = energy_gap(grid, f)
            dec = decompose_levels(grid, f, strat)
            ratios.append(gap["ratio"])
            grads.append(check_gradient_bound(grid, f))
            h2.append(abs(dec.half_h2_integral(grid) - gap["gap"]) / gap["gap"] if dec.valid else np.inf)
        ok &= all(RATIO_RANGE[0] <= r <= RATIO_RANGE[1] for r in ratios)
        ok &= max(ratios) / min(ratios) <= RATIO_SPREAD
        ok &= min(grads) >= GRADIENT_FLOOR
        ok &= max(h2) <= HALF_H2_REL
        parts.append(f"{name} ratio {min(ratios):.3f}..{max(ratios):.3f}, grad >= {min(grads):.3f}, "
                     f"half-h2 rel err {max(h2):.1e}")
    verdict(7, ok, "; ".join(parts))
    assert ok


def _fixture_suite():
    T0 = np.linspace(0.0, 50.0, 5001)
    T1 = np.linspace(1.0, 50.0, 4901)
    tr = lemmas.Trajectory
    good, bad = [], []
    one = tr(T0, np.ones_like(T0))
    good.append(lemmas.lemma21_bound(tr(T0, 1 / (1 + T0)), one, 1.0, 2.0))
    bad.append(lemmas.lemma21_bound(tr(T0, 1 / (1 + T0)), tr(T0, np.full_like(T0, 0.5)), 1.0, 2.0))
    n = 2.0
    f, g, h = T1**-n, n * T1 ** -(n + 1), n * (n + 1) * T1 ** -(n + 2)
    r = lemmas.lemma22_check(tr(T1, f), tr(T1, g), tr(T1, h), n, 1.0, rel_slack=1e-3)
    good += [r.g, r.h]
    g_bad = g.copy()
    g_bad[300] *= 1e6
    r = lemmas.lemma22_check(tr(T1, f), tr(T1, g_bad), tr(T1, h), n, 1.0, rel_slack=1e-3)
    bad += [r.g, r.h]
    good.append(lemmas.lemma23_check(tr(T1, T1**-n), n, lemmas.averaged_constant(1.0, n) * (1 + 1e-4), 1.0))
    bad.append(lemmas.lemma23_check(tr(T1, T1**-1.5), n, 1.0, 1.0))
    return good, bad


def test_c08_lemma_suite(verdict, baselines):
    t0 = time.perf_counter()
    good, bad = _fixture_suite()
    elapsed = time.perf_counter() - t0
    fixtures_ok = all(v.holds and v.margin > 0 for v in good)
    guards_ok = all(v.status == lemmas.NOT_APPLICABLE for v in bad)
    parts = [f"fixtures {sum(v.holds for v in good)}/{len(good)} hold, "
             f"{sum(not v.applicable for v in bad)}/{len(bad)} adversarial not-applicable ({elapsed:.2f} s)"]
    data_ok = True
    for name in BASELINES:
        res, _ = baselines[name]
        out = lemmas.cascade_suite(_series(res, "t"), _series(res, "E"), _series(res, "K"),
                                   _series(res, "u2_l2sq"), a=_series(res, "theta_h3") ** 2,
                                   window=FIT_WINDOW)
        checks = [out["lemma22"].g, out["lemma22"].h, out["lemma23"], out["lemma21"]]
        data_ok &= all(v.holds for v in checks)
        parts.append(f"{name} n={out['n']:.3f} C={out['C']:.3e} margins "
                     + "/".join(f"{v.margin:.2f}" if v.holds else v.status for v in checks))
    ok = fixtures_ok and guards_ok and data_ok and elapsed < 1.0
    verdict(8, ok, "; ".join(parts))
    assert ok


def test_c09_determinism(verdict, tmp_path):
    outputs = {}
    for threads in (1, 2):
        for name in ("ipm-baseline", "stokes-baseline"):
            dest = tmp_path / f"{name}-{threads}"
            code = main(["run", "--preset", name, "--set", "t_end=1", "--threads", str(threads),
                         "--out", str(dest)])
            assert code in (0, 3)
            outputs[(name, threads)] = (dest / "diagnostics.csv").read_bytes()
    same = all(outputs[(n, 1)] == outputs[(n, 2)] for n in ("ipm-baseline", "stokes-baseline"))
    verdict(9, same, "ipm/stokes baselines (t_end = 1): diagnostics.csv identical for --threads 1 and 2"
            if same else "diagnostics.csv differs across --threads")
    assert same


def test_c10_distribution_preserved(verdict, baselines):
    parts, ok = [], True
    for name in BASELINES:
        res, _ = baselines[name]
        last = res.drift[-1]
        n2 = res.config.n2
        ok &= res.ok and abs(last["t"] - res.config.t_end) < 1e-9 and last["star_sup_dist"] <= DRIFT_FACTOR / n2
        parts.append(f"{name} t={last['t']:g} sup |rho* - rho0*| {last['star_sup_dist']:.2e}")
    verdict(10, ok, "; ".join(parts) + f" (tol {DRIFT_FACTOR / 129:.2e})")
    assert ok
