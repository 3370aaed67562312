import time

import numpy as np
import pytest
from conftest import heat_system, quadratic, scalar_system
from oracles import heat_cubic_endpoint

from semictrl import BlowUp, ControlSignal, NoConvergence, PicardConfig, TimeGrid, build_semigroup, solution_map, solve_mild

# x' = -x + 1 from 0: 1 - exp(-1)
DECAY_ENDPOINT = 0.6321205588285577
# x' = x^2 from 0.5 over [0, 0.5]: 0.5 / (1 - 0.25)
RICCATI_ENDPOINT = 0.6666666666666666


def _solve(sys, grid, u_value, x0, cfg=PicardConfig()):
    sg = build_semigroup(sys.generator, grid)
    u = ControlSignal.constant(grid, np.full(sys.input_dim, u_value))
    return solve_mild(sys, sg, u, x0, cfg)


def test_integrator_is_identity_ramp(unit_grid):
    x = _solve(scalar_system(), unit_grid, 1.0, [0.0])
    np.testing.assert_allclose(x.states[:, 0], unit_grid.times, atol=1e-12)
    assert abs(x.final_state[0] - 1.0) < 1e-6


def test_linear_decay_endpoint(unit_grid):
    start = time.perf_counter()
    x = _solve(scalar_system(-1.0), unit_grid, 1.0, [0.0])
    assert time.perf_counter() - start < 1.0
    assert abs(x.final_state[0] - DECAY_ENDPOINT) < 1e-5


def test_riccati_from_nonzero_start():
    x = _solve(scalar_system(f=quadratic()), TimeGrid(0.5, 500), 0.0, [0.5])
    assert abs(x.final_state[0] - RICCATI_ENDPOINT) < 1e-4


def test_blowup_detected_near_escape_time(unit_grid):
    start = time.perf_counter()
    with pytest.raises(BlowUp, match=r"\[0\.49"):
        _solve(scalar_system(f=quadratic()), unit_grid, 0.0, [2.0])
    assert time.perf_counter() - start < 1.0


def test_no_convergence_reported():
    cfg = PicardConfig(max_iterations=2, max_subinterval_halvings=0, tol=1e-15)
    with pytest.raises(NoConvergence):
        _solve(scalar_system(f=quadratic()), TimeGrid(1.0, 100), 0.0, [0.5], cfg)


def test_steep_solution_near_escape():
    # escape at t = 1/0.9, so the solution reaches 9 at t = 1
    sys = scalar_system(f=quadratic())
    x = _solve(sys, TimeGrid(1.0, 1000), 0.0, [0.9])
    assert x.final_state[0] == pytest.approx(0.9 / (1 - 0.9), rel=1e-3)


@pytest.mark.parametrize("sys", [scalar_system(f=quadratic()), heat_system(4), scalar_system(-2.0)])
def test_zero_control_is_equilibrium(sys):
    grid = TimeGrid(0.5, 50)
    S = solution_map(sys, build_semigroup(sys.generator, grid))
    assert S(ControlSignal.zeros(grid, sys.input_dim)).is_zero


def test_linear_case_equals_direct_quadrature():
    sys = scalar_system(-1.5, 2.0)
    grid = TimeGrid(1.0, 80)
    sg = build_semigroup(sys.generator, grid)
    u = ControlSignal.from_function(grid, lambda t: np.sin(4 * t))
    x = solve_mild(sys, sg, u, [0.0])
    w = grid.weights()
    direct = np.sum(w * np.exp(-1.5 * (1.0 - grid.times)) * 2.0 * np.sin(4 * grid.times))
    assert abs(x.final_state[0] - direct) <= 1e-12
    assert x.picard_iterations == 1


def test_second_order_refinement():
    sys = scalar_system(-1.0)
    errs = [abs(_solve(sys, TimeGrid(1.0, n), 1.0, [0.0]).final_state[0] - DECAY_ENDPOINT) for n in (20, 40, 80)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8)


def test_heat_cubic_against_stiff_integrator():
    # DST-based modal right-hand side integrated by Radau, independent of the package
    grid = TimeGrid(0.2, 400)
    x0 = 0.5 * np.linspace(1.0, -0.5, 16)
    control = lambda t: 0.3 * np.cos(3 * t) * np.ones(16)
    sys = heat_system(16)
    x = solve_mild(sys, build_semigroup(sys.generator, grid), ControlSignal.from_function(grid, control), x0)
    ref = heat_cubic_endpoint(16, control, 0.2, x0)
    assert np.abs(x.final_state - ref).max() < 5e-5


def test_control_grid_must_match(unit_grid):
    sys = scalar_system()
    with pytest.raises(ValueError):
        solve_mild(sys, build_semigroup(sys.generator, unit_grid), ControlSignal.zeros(TimeGrid(1.0, 10)), [0.0])


def test_picard_config_validation():
    with pytest.raises(ValueError):
        PicardConfig(tol=0.0)
    with pytest.raises(ValueError):
        PicardConfig(max_iterations=0)
