"""Exit criteria, each at its stated tolerance and runtime bound.

Every test prints one ``criterion N: PASS|FAIL`` line (also repeated in the
pytest summary).  Run just this file with ``pytest tests/test_acceptance.py -v``.
"""

import io
import math
import sys
import time

import numpy as np
import pytest

from annr.baselines import nannr_run
from annr.engine import ANNR, EngineConfig
from annr.exceptions import DegenerateSimplexError
from annr.external import ExternalFunction
from annr.geometry import circumcenter, simplex_volumes
from annr.harness import ExperimentConfig, run_experiment
from annr.oracle import gram_volume, oracle_check
from annr.testbed import builtin, make_test_set, mae

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

SIGMA = math.sqrt(0.1)


# shared experiments (criterion 8 reuses them) ---------------------------------

@pytest.fixture(scope="module")
def halting_run():
    f = builtin("gaussian")
    # minimal seeded-walk budget keeps the 50k-step cap affordable; the
    # per-step cell walk keeps the planar triangulation complete
    cfg = EngineConfig(dim=2, box=f.box, lam="auto", epsilon=1e-3, budget=50_000, walk_steps=2,
                       top_k=0, seed=0, check_invariants=True)
    eng = ANNR(cfg, f)
    t0 = time.perf_counter()
    trace = eng.run()
    return trace, time.perf_counter() - t0


@pytest.fixture(scope="module")
def lambda_runs():
    f = builtin("gaussian")
    out = {}
    for lam in (0.1, 1.0, 10.0):
        # N = 500 evaluations in total: 4 corners + 10 uniform + 486 queries
        cfg = EngineConfig(dim=2, box=f.box, lam=lam, epsilon=1e-12, budget=500 - 14, seed=0,
                           check_invariants=True)
        trace = ANNR(cfg, f).run()
        norms = np.linalg.norm(trace.query_points, axis=1)
        out[lam] = (float(np.mean(norms <= 2 * SIGMA)), trace)
    return out


def _methods(target, params, budget, **kw):
    res = {}
    test = None
    for method in ("annr", "defer", "nannr"):
        cfg = ExperimentConfig(method=method, target=target, target_params=params, budget=budget,
                               repetitions=10, seed=0, epsilon=1e-12, test_mode="grid", test_size=10_000,
                               check_invariants=True, **kw)
        if test is None:
            f = cfg.make_target()
            test = make_test_set(f, cfg.test_size, cfg.test_mode, cfg.test_seed)
        res[method] = run_experiment(cfg, test=test)
    return res


@pytest.fixture(scope="module")
def spiral_results():
    t0 = time.perf_counter()
    res = _methods("spiral", {}, 400)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def rotation_results():
    t0 = time.perf_counter()
    grid = {}
    for angle in (0, 10, 20, 30, 40):
        grid[angle] = {}
        test = None
        for method in ("annr", "defer"):
            cfg = ExperimentConfig(method=method, target="ellipse", target_params={"angle": angle},
                                   budget=300, repetitions=10, seed=0, epsilon=1e-12, test_mode="grid",
                                   test_size=10_000, check_invariants=True)
            if test is None:
                test = make_test_set(cfg.make_target(), cfg.test_size, "grid")
            grid[angle][method] = run_experiment(cfg, test=test)
    return grid, time.perf_counter() - t0


@pytest.fixture(scope="module")
def ball_results():
    f = builtin("ball")
    n_total = 10_000
    # corners only: their values are all 0, so lambda is set to what the
    # automatic rule gives for the function's [0, 1] range, Vol(A) / 1
    cfg = EngineConfig(dim=6, box=f.box, lam=f.box.volume, epsilon=1e-300, budget=n_total - 64,
                       n_init=0, walk_steps=25, top_k=4, seed=0, check_invariants=True)
    t0 = time.perf_counter()
    eng = ANNR(cfg, f)
    trace = eng.run()
    baseline = nannr_run(f.box, f, n_total, seed=0)
    elapsed = time.perf_counter() - t0
    test = make_test_set(f, 100_000, "uniform", seed=1)
    return {
        "trace": trace,
        "annr_points": trace.query_points,
        "nannr_points": baseline.points,
        "annr_mae": mae(eng.dataset.predict, test),
        "nannr_mae": mae(baseline.predict, test),
        "n_annr": len(eng.dataset),
        "elapsed": elapsed,
    }


def _shell_fraction(points):
    r = np.linalg.norm(points, axis=1)
    return float(np.mean((r >= 0.7) & (r <= 1.3)))


# criteria -------------------------------------------------------------------

def test_criterion_01_geometry_kernels(report):
    t0 = time.perf_counter()
    worst_vol, worst_res = 0.0, 0.0
    for m in (1, 2, 3, 6):
        rng = np.random.default_rng(100 + m)
        s = rng.standard_normal((1000, m + 1, m))
        ref = np.array([gram_volume(x) for x in s])
        got = simplex_volumes(s)
        worst_vol = max(worst_vol, float(np.max(np.abs(got - ref) / ref)))
        for x in s:
            try:
                c, r = circumcenter(x)
            except DegenerateSimplexError:
                continue
            worst_res = max(worst_res, float(np.max(np.abs(np.linalg.norm(x - c, axis=1) - r)) / r))
    elapsed = time.perf_counter() - t0
    ok = worst_vol <= 1e-10 and worst_res < 1e-8 and elapsed < 5
    report(1, ok, f"max volume rel err {worst_vol:.2e} (<=1e-10), max equidistance residual "
                  f"{worst_res:.2e} (<1e-8), {elapsed:.2f} s (<5 s)")
    assert ok


def test_criterion_02_walk_soundness_recall(report):
    t0 = time.perf_counter()
    rows = []
    ok = True
    for dim, n, need in ((2, 10, 0.95), (2, 25, 0.95), (2, 50, 0.95), (3, 20, 0.90)):
        res = oracle_check(dim, n, 10, 2000)
        rows.append(f"m={dim} n={n}: sound {res['soundness']:.3f} recall {res['recall']:.4f}")
        ok &= res["soundness"] == 1.0 and res["recall"] >= need
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    report(2, ok, "; ".join(rows) + f"; {elapsed:.1f} s (<60 s)")
    assert ok


def test_criterion_03_halting(report, halting_run):
    trace, elapsed = halting_run
    steps = len(trace)
    reached = min(trace.scores) < 1e-3
    ok = steps < 50_000 and trace.scores[-1] < 1e-3 and reached and elapsed < 300
    report(3, ok, f"halted after {steps} queries (<50000), final s_t {trace.scores[-1]:.3g} (<1e-3), "
                  f"lambda {trace.lam:.3f}, {elapsed:.0f} s (<300 s)")
    assert ok


def test_criterion_04_lambda_tradeoff(report, lambda_runs):
    fr = [lambda_runs[lam][0] for lam in (0.1, 1.0, 10.0)]
    ok = fr[0] <= fr[1] <= fr[2] and fr[2] >= 1.5 * fr[0]
    report(4, ok, f"fraction within 2 sigma at lambda 0.1/1/10: {fr[0]:.3f} / {fr[1]:.3f} / {fr[2]:.3f} "
                  f"(non-decreasing, last >= 1.5x first: {fr[2] / max(fr[0], 1e-12):.2f}x)")
    assert ok


def test_criterion_05_spiral_comparison(report, spiral_results):
    res, elapsed = spiral_results
    m = {k: v.mae_mean for k, v in res.items()}
    failed = sum(len(v.runs) - len(v.ok) for v in res.values())
    ok = m["annr"] < m["defer"] and m["annr"] < m["nannr"] and failed == 0 and elapsed < 600
    report(5, ok, f"MAE over 10 seeds at N=400: annr {m['annr']:.4f}, defer {m['defer']:.4f}, "
                  f"nannr {m['nannr']:.4f}; {failed} failed runs; {elapsed:.0f} s (<600 s)")
    assert ok


def test_criterion_06_rotation_stability(report, rotation_results):
    grid, elapsed = rotation_results
    annr = [grid[a]["annr"].mae_mean for a in sorted(grid)]
    defer = [grid[a]["defer"].mae_mean for a in sorted(grid)]
    sa, sd = float(np.std(annr)), float(np.std(defer))
    ok = sa < sd and elapsed < 600
    report(6, ok, f"std of MAE across 0-40 deg: annr {sa:.5f} vs rectangular {sd:.5f}; "
                  f"annr {np.round(annr, 4).tolist()}, rectangular {np.round(defer, 4).tolist()}; "
                  f"{elapsed:.0f} s (<600 s)")
    assert ok


def test_criterion_07_ball_concentration(report, ball_results):
    b = ball_results
    fa, fn = _shell_fraction(b["annr_points"]), _shell_fraction(b["nannr_points"])
    ratio = fa / max(fn, 1e-12)
    ok = ratio >= 3 and b["annr_mae"] < b["nannr_mae"] and b["elapsed"] < 1800
    report(7, ok, f"shell fraction annr {fa:.4f} vs nannr {fn:.4f} ({ratio:.1f}x, need >=3x); "
                  f"MAE on 1e5 uniform points annr {b['annr_mae']:.5f} vs nannr {b['nannr_mae']:.5f}; "
                  f"{b['n_annr']} evaluations; {b['elapsed']:.0f} s (<1800 s)")
    assert ok


def test_criterion_08_empty_circumsphere(report, halting_run, lambda_runs, spiral_results,
                                         rotation_results, ball_results):
    counts = {"halting": halting_run[0].violations}
    counts["lambda"] = sum(t.violations for _, t in lambda_runs.values())
    counts["spiral"] = sum(r.trace.violations for r in spiral_results[0]["annr"].runs)
    counts["rotation"] = sum(r.trace.violations for a in rotation_results[0].values() for r in a["annr"].runs)
    counts["ball"] = ball_results["trace"].violations
    total = sum(counts.values())
    ok = total == 0
    report(8, ok, f"violations {total} ({', '.join(f'{k} {v}' for k, v in counts.items())})")
    assert ok


def test_criterion_09_external_roundtrip(report):
    f = builtin("gaussian")
    cfg = EngineConfig(dim=2, box=f.box, budget=100, seed=7, epsilon=1e-12)
    t0 = time.perf_counter()
    local = io.StringIO()
    ANNR(cfg, f).run().write_csv(local, timing=False)
    with ExternalFunction([sys.executable, "-m", "annr.external", "gaussian"], dim=2) as ext:
        remote = io.StringIO()
        trace = ANNR(cfg, ext).run()
        trace.write_csv(remote, timing=False)
        calls = ext.calls
    elapsed = time.perf_counter() - t0
    ok = len(trace) == 100 and remote.getvalue() == local.getvalue() and elapsed < 60
    report(9, ok, f"{len(trace)} queries ({calls} protocol evaluations), traces identical: "
                  f"{remote.getvalue() == local.getvalue()}, {elapsed:.1f} s (<60 s)")
    assert ok


def test_criterion_10_out_of_scope(report):
    report(10, "N/A ", "gravitational-wave and latent-density tables need external simulators and a "
                       "trained model; criterion 9's protocol round-trip stands in for them")
