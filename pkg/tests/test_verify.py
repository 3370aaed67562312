import numpy as np
import pytest
from conftest import heat_system, quadratic, scalar_system
from oracles import riccati_endpoint, riccati_endpoint_derivative

from semictrl import ControlSignal, DegenerateFit, HypothesisFailed, PointwisePolynomial, TimeGrid, ZeroMap, build_semigroup
from semictrl.verify import (
    check_b1,
    check_b2,
    check_frechet_limit,
    check_lemma4,
    check_theorem7,
    gronwall_check,
    gronwall_selftest,
    lemma4_constant,
    random_gronwall_triples,
    sample_control_pairs,
    verify_system,
)

SCALES = 2.0 ** -np.arange(3, 11)
# log-log slopes of |S(u_bar + e) - S(u_bar) - DS(u_bar) e| over SCALES, from the closed form
FRECHET_SLOPE_AT_ZERO = 2.0088528057950574
FRECHET_SLOPE_AT_TENTH = 2.0092476132451442


def _oracle_slope(base):
    sig = np.abs(riccati_endpoint(base + SCALES) - riccati_endpoint(base) - riccati_endpoint_derivative(base) * SCALES)
    return np.polyfit(np.log(SCALES), np.log(sig), 1)[0]


def test_frozen_slopes():
    assert _oracle_slope(0.1) == pytest.approx(FRECHET_SLOPE_AT_TENTH, abs=1e-12)
    # at u_bar = 0 the derivative is the identity map on constants: DS(0) e = e
    sig = np.sqrt(SCALES) * np.tan(np.sqrt(SCALES)) - SCALES
    assert np.polyfit(np.log(SCALES), np.log(sig), 1)[0] == pytest.approx(FRECHET_SLOPE_AT_ZERO, abs=1e-12)


class TestRemainderAndJacobianConstants:
    def test_quadratic(self):
        est = check_b1(quadratic(), 1.0)
        assert abs(est.gamma - 1) <= 0.02 and abs(est.alpha - 1) <= 0.05 and est.fit_r2 >= 0.999
        assert check_b2(quadratic(), 1.0) == pytest.approx(2.0, abs=0.01)

    def test_zero_map(self):
        with pytest.raises(DegenerateFit):
            check_b1(ZeroMap(2), 1.0)
        assert check_b2(ZeroMap(2), 1.0) == 0.0

    def test_cubic(self):
        cubic = PointwisePolynomial((0.0, 1.0), 1)
        assert abs(check_b1(cubic, 1.0).gamma - 1) <= 0.05
        assert check_b2(cubic, 1.0) <= 6.1

    def test_envelope_bounds_samples(self):
        f = PointwisePolynomial((0.5, 1.0), 3)
        est = check_b1(f, 0.5, seed=3)
        rng = np.random.default_rng(11)
        for _ in range(50):
            x1, x2 = rng.uniform(-0.25, 0.25, (2, 3))
            r = np.linalg.norm(f(x1) - f(x2) - f.jvp(x2, x1 - x2))
            # fresh pairs can sit slightly above the sampled envelope
            assert r <= 1.5 * est.bound(np.linalg.norm(x1 - x2))

    def test_seeded(self):
        a, b = check_b1(quadratic(), 1.0, seed=7), check_b1(quadratic(), 1.0, seed=7)
        assert a == b

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            check_b1(quadratic(), 1.0, n_samples=50)


class TestSolutionMapLipschitz:
    def test_quadratic_no_violations(self, quad_scalar):
        res = check_lemma4(*quad_scalar, radius=0.1, n_pairs=200)
        assert res.violations == 0 and res.c_empirical <= res.c_theoretical

    def test_linear_case(self, integrator):
        res = check_lemma4(*integrator, radius=0.1, n_pairs=50)
        assert res.L == 0 and res.c_theoretical == pytest.approx(res.k)
        assert res.k == pytest.approx(1.0, abs=1e-12)
        assert res.c_empirical <= res.k + 1e-10

    def test_constant_difference_is_extremal(self, integrator):
        # u1 - u2 constant: sup_t |x1 - x2| = |du| tau = ||du||_L2 sqrt(tau) with tau = 1
        g = integrator[1].grid
        u1, u2 = ControlSignal.constant(g, [0.3]), ControlSignal.constant(g, [-0.2])
        res = check_lemma4(*integrator, pairs=[(u1, u2)])
        assert res.c_empirical == pytest.approx(1.0, abs=1e-12)

    def test_equal_controls_skipped(self, integrator):
        g = integrator[1].grid
        u = ControlSignal.constant(g, [0.3])
        res = check_lemma4(*integrator, pairs=[(u, u)])
        assert res.skipped == 1 and res.ratios == []

    def test_constant_formula(self, quad_scalar):
        c, k, L = lemma4_constant(*quad_scalar, 0.05)
        assert L == pytest.approx(0.1) and c == pytest.approx(k * np.exp(0.1))


class TestFrechet:
    def test_quadratic_at_zero(self, quad_scalar):
        sys, sg = quad_scalar
        res = check_frechet_limit(sys, sg, ControlSignal.zeros(sg.grid), ControlSignal.constant(sg.grid, [1.0]), SCALES)
        assert abs(res.slope - 2.0) <= 0.1
        assert abs(res.slope - FRECHET_SLOPE_AT_ZERO) <= 1e-3
        assert np.all(np.diff(res.ratios) < 0)

    def test_quadratic_at_nonzero_base(self, quad_scalar):
        sys, sg = quad_scalar
        res = check_frechet_limit(sys, sg, ControlSignal.constant(sg.grid, [0.1]), ControlSignal.constant(sg.grid, [1.0]), SCALES)
        assert abs(res.slope - 2.0) <= 0.15
        assert abs(res.slope - FRECHET_SLOPE_AT_TENTH) <= 1e-3

    def test_linear_remainder_vanishes(self):
        sys = scalar_system(-1.0)
        sg = build_semigroup(sys.generator, TimeGrid(1.0, 100))
        res = check_frechet_limit(sys, sg, ControlSignal.zeros(sg.grid), ControlSignal.constant(sg.grid, [1.0]), SCALES)
        assert max(res.sigma_norms) <= 1e-14

    def test_rate_bound(self, quad_scalar):
        sys, sg = quad_scalar
        res = check_frechet_limit(sys, sg, ControlSignal.zeros(sg.grid), ControlSignal.constant(sg.grid, [1.0]), SCALES)
        c, _, _ = lemma4_constant(sys, sg, res.visited_radius)
        est = check_b1(sys.nonlinearity, res.visited_radius)
        assert np.all(np.array(res.sigma_norms) <= res.sigma_bound(sg.bound_M, est.alpha, est.gamma, c, sg.grid.tau))


class TestDerivativeContinuity:
    def test_quadratic_pairs(self, quad_scalar):
        pairs = sample_control_pairs(quad_scalar[1].grid, 1, 0.1, 20, seed=1)
        res = check_theorem7(*quad_scalar, pairs)
        assert res.ratio_max <= 1.0

    def test_linear_derivative_constant(self, integrator):
        pairs = sample_control_pairs(integrator[1].grid, 1, 0.1, 5, seed=2)
        res = check_theorem7(*integrator, pairs)
        assert max(res.differences) <= 1e-12

    def test_equal_controls(self, quad_scalar):
        u = ControlSignal.constant(quad_scalar[1].grid, [0.05])
        res = check_theorem7(*quad_scalar, [(u, u)])
        assert res.differences == [0.0]


class TestGronwall:
    grid = TimeGrid(1.0, 1000)

    def test_extremal_case(self):
        t = self.grid.times
        assert gronwall_check(np.exp(t), np.ones_like(t), 1.0, self.grid)

    def test_zero_f(self):
        t = self.grid.times
        assert gronwall_check(np.zeros_like(t), 0.5 + t, 2.0, self.grid)

    def test_violated_hypothesis(self):
        t = self.grid.times
        with pytest.raises(HypothesisFailed):
            gronwall_check(2 * np.exp(t), np.ones_like(t), 1.0, self.grid)

    def test_decreasing_g_rejected(self):
        t = self.grid.times
        with pytest.raises(HypothesisFailed):
            gronwall_check(np.zeros_like(t), 1.0 - t, 1.0, self.grid)

    def test_random_triples(self):
        triples = random_gronwall_triples(np.random.default_rng(0), self.grid, 10)
        assert all(gronwall_check(f, g, k, self.grid) for f, g, k in triples)

    def test_selftest_summary(self):
        res = gronwall_selftest(self.grid)
        assert res == {"extremal_passes": True, "violating_input": "HypothesisFailed", "random_passed": 10, "random_total": 10}


class TestVerifySystem:
    def test_quadratic_report(self, quad_scalar):
        rep = verify_system(*quad_scalar, n_pairs=40, theorem7_pairs=5, seed=0)
        assert rep.passed, rep.checks
        assert rep.lemma4_c_empirical <= rep.lemma4_c_theoretical
        assert set(rep.checks) == {"lemma4", "frechet", "b1", "b2", "theorem7", "gronwall"}

    def test_linear_report_marks_degenerate_fit(self, integrator):
        rep = verify_system(*integrator, checks=["b1", "lemma4"], n_pairs=10)
        assert rep.b1_degenerate and rep.passed

    def test_heat_report(self):
        sys = heat_system(8)
        sg = build_semigroup(sys.generator, TimeGrid(0.2, 100))
        rep = verify_system(sys, sg, control_radius=1.0, n_pairs=20, theorem7_pairs=4, checks=["lemma4", "b1", "theorem7"], seed=42)
        assert rep.passed, rep.checks

    def test_unknown_check(self, integrator):
        with pytest.raises(ValueError):
            verify_system(*integrator, checks=["lemma5"])
