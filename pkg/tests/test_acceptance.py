"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest
from conftest import quadratic, scalar_system

from semictrl import BlowUp, ControlSignal, HypothesisFailed, TimeGrid, ZeroMap, build_semigroup, solve_mild, steer
from semictrl.cli import main
from semictrl.config import load_shipped
from semictrl.linearized import gramian, lti_controllability_map
from semictrl.runner import run_scenario
from semictrl.verify import (
    check_b1,
    check_b2,
    check_frechet_limit,
    check_lemma4,
    check_theorem7,
    gronwall_check,
    random_gronwall_triples,
    sample_control_pairs,
)

# frozen closed-form oracles (see tests/oracles.py)
DECAY_GRAMIAN = 0.43233235838169365
DECAY_ENDPOINT = 0.6321205588285577
FRECHET_SLOPE_AT_ZERO = 2.0088528057950574


@pytest.fixture
def verdict(capsys):
    def emit(n, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} ({detail})")
        assert ok, detail

    return emit


def _quadratic_scenario():
    s = load_shipped("scalar-quadratic-steer")
    sys = s.build_system()
    return sys, build_semigroup(sys.generator, s.build_grid()), s.build_picard()


def test_01_linear_one_shot_steering(verdict):
    start = time.perf_counter()
    sys = scalar_system()
    sg = build_semigroup(sys.generator, TimeGrid(1.0, 1000))
    res = steer(sys, sg, [1.0])
    elapsed = time.perf_counter() - start
    err = float(np.abs(res.control.values - 1.0).max())
    ok = res.success and res.iterations == 1 and res.residual <= 1e-10 and err <= 1e-8 and elapsed < 1.0
    verdict(1, "linear one-shot steering", ok, f"iterations={res.iterations} residual={res.residual:.3g} max|u-1|={err:.3g} t={elapsed:.3f}s")


def test_02_gramian_accuracy(verdict):
    errs = []
    for n in (1000, 2000):
        sys = scalar_system(-1.0)
        sg = build_semigroup(sys.generator, TimeGrid(1.0, n))
        errs.append(abs(gramian(lti_controllability_map(sys, sg)).matrix[0, 0] - DECAY_GRAMIAN))
    ratio = errs[0] / errs[1]
    verdict(2, "Gramian accuracy", errs[0] <= 1e-5 and ratio >= 3.5, f"error={errs[0]:.3g} refinement ratio={ratio:.3f}")


def test_03_mild_solver_oracle(verdict):
    grid = TimeGrid(1.0, 1000)
    sys = scalar_system(-1.0)
    start = time.perf_counter()
    x = solve_mild(sys, build_semigroup(sys.generator, grid), ControlSignal.constant(grid, [1.0]), [0.0])
    t_linear = time.perf_counter() - start
    err = abs(x.final_state[0] - DECAY_ENDPOINT)
    sys2 = scalar_system(f=quadratic())
    start = time.perf_counter()
    try:
        solve_mild(sys2, build_semigroup(sys2.generator, grid), ControlSignal.zeros(grid), [2.0])
        blew_up = False
    except BlowUp:
        blew_up = True
    t_blow = time.perf_counter() - start
    ok = err <= 1e-5 and blew_up and t_linear < 1.0 and t_blow < 1.0
    verdict(3, "mild-solver oracle", ok, f"error={err:.3g} blowup={blew_up} t={t_linear:.3f}s/{t_blow:.3f}s")


def test_04_frechet_rate(verdict):
    sys, sg, cfg = _quadratic_scenario()
    grid = sg.grid
    scales = 2.0 ** -np.arange(3, 11)
    res = check_frechet_limit(sys, sg, ControlSignal.zeros(grid), ControlSignal.constant(grid, [1.0]), scales, cfg)
    decreasing = bool(np.all(np.diff(res.ratios) < 0))
    ok = abs(res.slope - 2.0) <= 0.1 and decreasing and abs(res.slope - FRECHET_SLOPE_AT_ZERO) <= 1e-3
    verdict(4, "Frechet remainder rate", ok, f"slope={res.slope:.4f} oracle={FRECHET_SLOPE_AT_ZERO:.4f} ratios decreasing={decreasing}")


def test_05_b1_b2_certification(verdict):
    est = check_b1(quadratic(), 1.0)
    lip = check_b2(quadratic(), 1.0)
    ok = abs(est.gamma - 1) <= 0.02 and abs(est.alpha - 1) <= 0.05 and est.fit_r2 >= 0.999 and abs(lip - 2) <= 0.01
    verdict(5, "Taylor remainder and Jacobian Lipschitz constants", ok, f"gamma={est.gamma:.6f} alpha={est.alpha:.6f} r2={est.fit_r2:.6f} lipschitz={lip:.6f}")


def test_06_lemma4_bound(verdict):
    sys, sg, cfg = _quadratic_scenario()
    res = check_lemma4(sys, sg, cfg, radius=0.1, n_pairs=200, strict=False)
    lin = check_lemma4(sys.with_nonlinearity(ZeroMap(1)), sg, cfg, radius=0.1, n_pairs=200, strict=False)
    ok = res.violations == 0 and lin.violations == 0 and lin.c_empirical <= lin.k + 1e-10
    verdict(
        6,
        "solution-map Lipschitz bound",
        ok,
        f"c_emp={res.c_empirical:.4g} c_theo={res.c_theoretical:.4g} violations={res.violations}; f=0: c_emp={lin.c_empirical:.4g} k={lin.k:.4g}",
    )


def test_07_theorem7_bound(verdict):
    sys, sg, cfg = _quadratic_scenario()
    pairs = sample_control_pairs(sg.grid, 1, 0.1, 20, seed=1)
    res = check_theorem7(sys, sg, pairs, cfg, strict=False)
    verdict(7, "derivative continuity bound", res.ratio_max <= 1.0, f"max ratio={res.ratio_max:.4g} over {len(res.ratios)} pairs")


def test_08_heat_probe(verdict):
    start = time.perf_counter()
    rec = run_scenario(load_shipped("heat1d-cubic-steer"))
    elapsed = time.perf_counter() - start
    rows = {row["radius"]: row for row in rec.outputs.get("summary", [])}
    cells = [c for c in rec.outputs.get("cells", []) if c["radius"] == 0.05]
    ok = (
        rec.succeeded
        and len(cells) == 8
        and all(c["success"] and c["residual"] <= 1e-6 and c["iterations"] <= 20 for c in cells)
        and rows[0.01]["mean_contraction"] < rows[0.05]["mean_contraction"]
        and elapsed < 60
    )
    detail = (
        f"success at 0.05: {sum(c['success'] for c in cells)}/8, max residual={rows[0.05]['max_residual']:.3g}, "
        f"max iterations={rows[0.05]['max_iterations']}, mean contraction 0.01/0.05="
        f"{rows[0.01]['mean_contraction']:.3g}/{rows[0.05]['mean_contraction']:.3g}, t={elapsed:.2f}s"
    )
    verdict(8, "heat steering demonstration", ok, detail)


def test_09_gronwall_selftest(verdict):
    grid = TimeGrid(1.0, 1000)
    t = grid.times
    extremal = gronwall_check(np.exp(t), np.ones_like(t), 1.0, grid)
    try:
        gronwall_check(2 * np.exp(t), np.ones_like(t), 1.0, grid)
        violating = "accepted"
    except HypothesisFailed:
        violating = "HypothesisFailed"
    triples = random_gronwall_triples(np.random.default_rng(0), grid, 10)
    passed = sum(gronwall_check(f, g, k, grid) for f, g, k in triples)
    rec = run_scenario(load_shipped("gronwall-selftest"))
    ok = extremal and violating == "HypothesisFailed" and passed == 10 and rec.outputs["passed"]
    verdict(9, "Gronwall self-test", ok, f"extremal={extremal} violating={violating} random={passed}/10 scenario={rec.outputs['passed']}")


def test_10_determinism(verdict, tmp_path):
    outs = []
    for run in ("a", "b"):
        code = main(["run", "heat1d-cubic-verify", "--seed", "42", "--out", str(tmp_path / run), "--format", "json"])
        assert code == 0
        outs.append((tmp_path / run / "heat1d-cubic-verify.result.json").read_bytes())
    verdict(10, "determinism", outs[0] == outs[1], f"{len(outs[0])} bytes, identical={outs[0] == outs[1]}")
