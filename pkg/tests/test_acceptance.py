"""Acceptance suite: ten numbered criteria, one summary line each.

Each test computes its checks, records a single PASS/FAIL line (shown in
the pytest terminal summary), and then asserts.  Tolerances are stated
inline next to each check.
"""

import math
import time

import numpy as np
import pytest

import branchflow as bf
from branchflow import (CostParams, GridSpec, OptimizerConfig,
                        PolyhedralMeasure, Segment, SourceSpec,
                        build_polyhedral_recovery, competitor_bound, cost_f,
                        finite_eps_cost, kappa, limit_energy,
                        mass_bound_check, mass_fraction_near, minimize,
                        q_infinity, sigma_step, validate_kirchhoff)
from branchflow import fields
from test_solver import interior_faces, kkt_sigma

P12 = CostParams(d=1, p=2.0, a=1.0)


def test_criterion_1_closed_form_reduced_cost(acceptance_record):
    # d=1, p=2: q_inf(xi, r) = (1-xi)^2, f_a(m) = 2 + 2 sqrt(a) m; rel <= 1%
    t0 = time.time()
    worst = 0.0
    for xi in (0.0, 0.3, 0.7):
        for r_hat in (0.0, 0.5, 2.0):
            got = q_infinity(xi, r_hat, P12)
            worst = max(worst, abs(got - (1 - xi) ** 2) / max((1 - xi) ** 2,
                                                              1e-30))
    for a in (0.25, 1.0):
        params = CostParams(d=1, p=2.0, a=a)
        for m in (0.5, 1.0, 2.0):
            want = 2.0 + 2.0 * math.sqrt(a) * m
            got = cost_f(m, params).f_value
            worst = max(worst, abs(got - want) / want)
    dt = time.time() - t0
    ok = worst <= 0.01 and dt < 5.0
    acceptance_record(1, ok, f"closed-form q/f rel err {worst:.2e} "
                             f"(tol 1e-2), {dt:.1f}s (< 5s)")
    assert ok


def test_criterion_2_cost_property_suite(acceptance_record):
    t0 = time.time()
    failures = []
    for d, p in ((1, 2.0), (2, 3.0), (3, 4.0)):
        for a in (0.1, 1.0):
            params = CostParams(d=d, p=p, a=a)
            kap = kappa(params)
            masses = np.linspace(0.2, 4.0, 20)
            fvals = np.array([cost_f(m, params).f_value for m in masses])
            if cost_f(0.0, params).f_value != 0.0:
                failures.append((d, p, a, "f(0)"))
            if np.any(np.diff(fvals) < -1e-6 * np.abs(fvals[:-1])):
                failures.append((d, p, a, "monotone"))
            if np.any(fvals < kap * (1 - 1e-6)):
                failures.append((d, p, a, "kappa bound"))
            ub = np.array([competitor_bound(m, params) for m in masses])
            if np.any(fvals > ub + 1e-9):
                failures.append((d, p, a, "competitor bound"))
            # subadditivity on in-sample sums (tol 1e-6 relative)
            for i in range(20):
                for j in range(i, 20):
                    s = masses[i] + masses[j]
                    k = np.argmin(np.abs(masses - s))
                    if abs(masses[k] - s) < 1e-9:
                        lhs = fvals[k]
                        rhs = fvals[i] + fvals[j]
                        if lhs > rhs * (1 + 1e-6):
                            failures.append((d, p, a, "subadditive"))
    dt = time.time() - t0
    ok = not failures and dt < 120.0
    acceptance_record(2, ok, f"f-property suite 3x2 params, 20 masses: "
                             f"{len(failures)} failures, {dt:.1f}s (< 2min)")
    assert ok, failures


def test_criterion_3_q_monotonicity(acceptance_record):
    from branchflow import transition_energy
    failures = []
    for d, p in ((1, 2.0), (2, 3.0), (3, 4.0)):
        params = CostParams(d=d, p=p, a=1.0)
        xis, r1s, r2s = [0.0, 0.4, 0.8], [0.2, 0.6, 1.0], [2.0, 4.0, 8.0]
        q = {(xi, r1, r2): transition_energy(
                xi, r1, r2, params,
                resolution=int(192 * (r2 - r1)) + 64).energy
             for xi in xis for r1 in r1s for r2 in r2s}
        tol = 1e-6
        for r1 in r1s:
            for r2 in r2s:
                if not (q[(0.8, r1, r2)] <= q[(0.4, r1, r2)] + tol
                        <= q[(0.0, r1, r2)] + 2 * tol):
                    failures.append((d, p, r1, r2, "xi"))
                mid = q[(0.4, r1, r2)]
                if mid > 0.5 * (q[(0.0, r1, r2)] + q[(0.8, r1, r2)]) + tol:
                    failures.append((d, p, r1, r2, "convexity"))
        for xi in xis:
            for r1 in r1s:
                if not (q[(xi, r1, 8.0)] <= q[(xi, r1, 4.0)] + tol
                        <= q[(xi, r1, 2.0)] + 2 * tol):
                    failures.append((d, p, xi, r1, "r2"))
            for r2 in r2s:
                if not (q[(xi, 0.2, r2)] <= q[(xi, 0.6, r2)] + tol
                        <= q[(xi, 1.0, r2)] + 2 * tol):
                    failures.append((d, p, xi, r2, "r1"))
        if transition_energy(1.0, 0.5, 4.0, params).energy > 1e-10:
            failures.append((d, p, "q(1)=0"))
    ok = not failures
    acceptance_record(3, ok, f"q-monotonicity 3x3x3 grid per (d,p): "
                             f"{len(failures)} failures")
    assert ok, failures


def test_criterion_4_a_to_zero_limit(acceptance_record):
    kap = kappa(P12)
    gaps = []
    for a in (1.0, 0.1, 0.01, 0.001):
        f = cost_f(1.0, CostParams(d=1, p=2.0, a=a)).f_value
        gaps.append(abs(f - kap))
    mono = all(lo > hi for lo, hi in zip(gaps[:-1], gaps[1:]))
    ok = mono and gaps[-1] < 0.1
    acceptance_record(4, ok, f"|f_a(1) - kappa| = "
                             f"{', '.join('%.3f' % g for g in gaps)} "
                             f"(monotone, final < 0.1)")
    assert ok


def test_criterion_5_finite_eps_equivalence(acceptance_record):
    f = cost_f(1.0, P12).f_value
    gaps = [abs(finite_eps_cost(1.0, 1.0, eps, P12) - f)
            for eps in (0.1, 0.05, 0.025)]
    mono = gaps[0] > gaps[1] > gaps[2]
    ok = mono and gaps[-1] < 0.1 * f
    acceptance_record(5, ok, f"finite-eps gap {gaps[0]:.3f} > {gaps[1]:.3f} "
                             f"> {gaps[2]:.3f}, final {gaps[2]/f:.1%} (< 10%)")
    assert ok


def test_criterion_6_sigma_step_exactness(acceptance_record):
    t0 = time.time()
    rng = np.random.default_rng(11)
    worst_kkt, worst_div = 0.0, 0.0
    for cells in ((8, 8), (16, 16)):
        grid = GridSpec(extent=(1.0, 1.0), cells=cells)
        eps = 0.25
        spec = SourceSpec(np.array([[0.3, 0.5], [0.7, 0.5]]),
                          np.array([1.0, -1.0]), eps)
        eta = fields.eta_barrier(eps, 1.0, 2)
        u = bf.ScalarField.ones(grid)
        u.data[:] = eta + (1 - eta) * rng.uniform(0.2, 1.0, cells)
        u.data[u.boundary_mask()] = 1.0
        cfg = OptimizerConfig(eps=eps, a=1.0, cg_tol=1e-12)
        sig = sigma_step(u, spec, cfg, grid=grid)
        worst_kkt = max(worst_kkt, float(np.linalg.norm(
            interior_faces(sig) - kkt_sigma(u, spec, grid, eps))))
        worst_div = max(worst_div, fields.divergence_residual(sig, spec))
    # and the residual stays small after every sigma-step of a real run
    grid = GridSpec(extent=(1.0, 1.0), cells=(32, 32))
    spec = SourceSpec(np.array([[0.3, 0.5], [0.7, 0.5]]),
                      np.array([1.0, -1.0]), 0.1)
    res = minimize(spec, grid, OptimizerConfig(eps=0.1, a=1.0, max_outer=10))
    worst_div = max(worst_div, res.residual)
    dt = time.time() - t0
    ok = worst_kkt < 1e-8 and worst_div < 1e-8 and dt < 30.0
    acceptance_record(6, ok, f"KKT mismatch {worst_kkt:.1e} (< 1e-8), "
                             f"div residual {worst_div:.1e} (< 1e-8), "
                             f"{dt:.1f}s (< 30s)")
    assert ok


def test_criterion_7_optimizer_descent(acceptance_record):
    t0 = time.time()
    grid = GridSpec(extent=(1.0, 1.0), cells=(128, 128))
    spec = SourceSpec(np.array([[0.25, 0.5], [0.75, 0.5]]),
                      np.array([1.0, -1.0]), 0.05)
    cfg = OptimizerConfig(eps=0.05, a=1.0, max_outer=40,
                          continuation=(0.2, 0.1))
    res = minimize(spec, grid, cfg)
    stages = {}
    for tr, te in zip(res.trace, res.trace_eps):
        stages.setdefault(te, []).append(tr.total)
    mono = all(all(b <= a + 1e-10 for a, b in zip(v, v[1:]))
               for v in stages.values())
    seg = Segment(start=np.array([0.25, 0.5]), end=np.array([0.75, 0.5]),
                  multiplicity=1.0)
    meas = PolyhedralMeasure(segments=[seg])
    lim = limit_energy(meas, P12)
    ratio = res.trace[-1].total / lim
    frac = mass_fraction_near(res.sigma, meas, 3 * 0.05)
    dt = time.time() - t0
    ok = mono and 0.8 <= ratio <= 1.2 and frac >= 0.9 and dt < 300.0
    acceptance_record(7, ok, f"trace monotone per stage: {mono}, "
                             f"E/limit {ratio:.3f} (in [0.8, 1.2]), "
                             f"mass in 3eps {frac:.3f} (>= 0.9), "
                             f"{dt:.0f}s (< 5min)")
    assert ok
    # stash the converged run for criterion 10
    test_criterion_7_optimizer_descent.result = res


def test_criterion_8_recovery_upper_bound(acceptance_record):
    # unit segment, m = 1, a = 1, d = 1 in a 2x1 box
    seg = Segment(start=np.array([0.5, 0.5]), end=np.array([1.5, 0.5]),
                  multiplicity=1.0)
    meas = PolyhedralMeasure(segments=[seg])
    lim = limit_energy(meas, P12)
    grid = GridSpec(extent=(2.0, 1.0), cells=(256, 128))
    gaps = []
    conf_ok = True
    for eps in (0.1, 0.05, 0.025):
        src = SourceSpec(np.array([seg.start, seg.end]),
                         np.array([1.0, -1.0]), eps)
        rec = build_polyhedral_recovery(meas, src, eps, 1e-2, P12, grid)
        eb = fields.energy(rec.sigma, rec.u, eps, 1.0, 2.0)
        gaps.append(eb.total - lim)
        inside = mass_fraction_near(rec.sigma, meas,
                                    rec.support_radius + max(grid.h))
        conf_ok = conf_ok and inside >= 1.0 - 1e-9
    mono = gaps[0] > gaps[1] > gaps[2] > 0.0
    # divergence identity within O(h): halve h at fixed eps, residual
    # roughly halves; frozen constant 120 from a calibration run
    res_h = []
    for nc in (128, 256):
        g = GridSpec(extent=(2.0, 1.0), cells=(nc, nc // 2))
        src = SourceSpec(np.array([seg.start, seg.end]),
                         np.array([1.0, -1.0]), 0.1)
        rec = build_polyhedral_recovery(meas, src, 0.1, 1e-2, P12, g)
        res_h.append(fields.divergence_residual(rec.sigma, src))
    first_order = res_h[1] < 0.75 * res_h[0] and res_h[1] <= 120.0 / 256.0
    ok = mono and conf_ok and first_order
    acceptance_record(8, ok, f"gap {gaps[0]:.2f} > {gaps[1]:.2f} > "
                             f"{gaps[2]:.2f} > 0, confinement {conf_ok}, "
                             f"div residual O(h): {res_h[0]:.3f} -> "
                             f"{res_h[1]:.3f}")
    assert ok


def test_criterion_9_kirchhoff(acceptance_record):
    j = np.array([0.5, 0.6])
    ytree = PolyhedralMeasure(segments=[
        Segment(start=np.array([0.3, 0.85]), end=j, multiplicity=1.0),
        Segment(start=np.array([0.7, 0.85]), end=j, multiplicity=1.0),
        Segment(start=j, end=np.array([0.5, 0.2]), multiplicity=2.0),
    ])
    src = SourceSpec(np.array([[0.3, 0.85], [0.7, 0.85], [0.5, 0.2]]),
                     np.array([1.0, 1.0, -2.0]), 0.05)
    y_ok = validate_kirchhoff(ytree, src) == []
    bad = PolyhedralMeasure(segments=[
        Segment(start=np.array([0.3, 0.85]), end=np.array([0.6, 0.5]),
                multiplicity=1.0)])
    bad_src = SourceSpec(np.array([[0.3, 0.85], [0.5, 0.2]]),
                         np.array([1.0, -1.0]), 0.05)
    v = validate_kirchhoff(bad, bad_src)
    located = {tuple(float(c) for c in np.round(x, 6)) for x, _, _ in v}
    bad_ok = (0.6, 0.5) in located and (0.5, 0.2) in located
    ok = y_ok and bad_ok
    acceptance_record(9, ok, f"Y-tree (1,1,2) balanced: {y_ok}; unbalanced "
                             f"segment flagged at {sorted(located)}")
    assert ok


def test_criterion_10_mass_bound(acceptance_record):
    results = []
    run7 = getattr(test_criterion_7_optimizer_descent, "result", None)
    if run7 is not None:
        results.append(("criterion-7 run", run7))
    grid = GridSpec(extent=(1.0, 1.0), cells=(64, 64))
    for a in (0.5, 1.0, 2.0):
        spec = SourceSpec(np.array([[0.3, 0.5], [0.7, 0.5]]),
                          np.array([1.0, -1.0]), 0.1)
        cfg = OptimizerConfig(eps=0.1, a=a, max_outer=20)
        results.append((f"a={a}", minimize(spec, grid, cfg)))
    checks = [(name, mass_bound_check(res, res.trace[0].total,
                                      res.config.a, 0.5))
              for name, res in results]
    ok = all(passed for _, passed in checks)
    acceptance_record(10, ok, f"mass bound at lambda=1/2 on "
                              f"{len(checks)} converged runs: "
                              f"{'all pass' if ok else checks}")
    assert ok
