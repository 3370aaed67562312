"""Experiment dispatch: one scenario in, one RunRecord out."""

from __future__ import annotations

import datetime
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .config import Scenario, load_scenarios
from .errors import SemictrlError
from .linearized import gramian, lti_controllability_map
from .mild import solve_mild
from .model import ControlSignal
from .semigroup import build_semigroup
from .steering import reachable_radius_probe, steer
from .verify import verify_system

logger = logging.getLogger(__name__)

EXIT_CODES = {"ok": 0, "config": 2, "solver": 3, "hypothesis": 4}


@dataclass
class RunRecord:
    scenario: str
    version: str
    config: Dict[str, Any]
    status: str = "ok"
    outputs: Dict[str, Any] = field(default_factory=dict)
    error: Optional[Dict[str, str]] = None
    timestamp: str = ""
    duration: float = 0.0

    @property
    def succeeded(self) -> bool:
        return self.status == "ok"

    @property
    def exit_code(self) -> int:
        if self.error is None:
            return 0
        return EXIT_CODES.get(self.error["category"], 1)

    def machine_dict(self) -> Dict[str, Any]:
        """Everything reproducible; wall-clock fields are left out."""
        return {
            "scenario": self.scenario,
            "version": self.version,
            "status": self.status,
            "config": self.config,
            "outputs": self.outputs,
            "error": self.error,
        }


def _spectrum(W) -> Dict[str, Any]:
    return {
        "eigenvalues": W.eigenvalues.tolist(),
        "condition_number": W.condition_number,
        "positive_definite": W.is_positive_definite,
    }


def _simulate(s: Scenario, sys, sg, cfg):
    p = s.params
    grid = sg.grid
    if p["control"]["kind"] == "zero":
        u = ControlSignal.zeros(grid, sys.input_dim)
    else:
        u = ControlSignal.constant(grid, p["control"]["value"])
    traj = solve_mild(sys, sg, u, p["x0"], cfg)
    return {
        "times": grid.times.tolist(),
        "states": traj.states.tolist(),
        "final_state": traj.final_state.tolist(),
        "picard_iterations": traj.picard_iterations,
    }


def _steer(s: Scenario, sys, sg, cfg):
    p = s.params
    res = steer(sys, sg, p["target"], p["mode"], p["tol"], p["max_iter"], cfg)
    out = _steering_dict(res)
    out["gramian"] = _spectrum(gramian(lti_controllability_map(sys, sg)))
    return out


def _steering_dict(res):
    return {
        "success": res.success,
        "mode": res.mode,
        "iterations": res.iterations,
        "residual": res.residual,
        "residual_history": list(res.residual_history),
        "contraction_estimate": res.contraction_estimate,
        "final_state": res.final_state.tolist(),
        "control": res.control.values.tolist(),
    }


def probe_directions(seed: int, n: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((n, dim))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def _probe(s: Scenario, sys, sg, cfg):
    p = s.params
    if "directions" in p:
        dirs = np.array(p["directions"])
    else:
        dirs = probe_directions(s.seed, p["n_directions"], sys.state_dim)
    cells = reachable_radius_probe(sys, sg, dirs, p["radii"], p["tol"], p["max_iter"], cfg)
    summary = []
    for r in p["radii"]:
        row = [c for c in cells if c.radius == r]
        ok = [c for c in row if c.success]
        summary.append(
            {
                "radius": r,
                "n_success": len(ok),
                "n_total": len(row),
                "max_residual": max(c.residual for c in row),
                "max_iterations": max(c.iterations for c in row),
                "mean_contraction": float(np.mean([c.contraction_estimate for c in row])),
            }
        )
    return {
        "directions": dirs.tolist(),
        "cells": [asdict(c) for c in cells],
        "summary": summary,
        "gramian": _spectrum(gramian(lti_controllability_map(sys, sg))),
    }


def _verify(s: Scenario, sys, sg, cfg):
    p = dict(s.params)
    rep = verify_system(sys, sg, cfg, seed=s.seed, **p)
    out = rep.as_dict()
    out["passed"] = rep.passed
    return out


def _gramian(s: Scenario, sys, sg, cfg):
    W = gramian(lti_controllability_map(sys, sg))
    out = _spectrum(W)
    out["matrix"] = W.matrix.tolist()
    return out


EXPERIMENTS = {"simulate": _simulate, "steer": _steer, "probe": _probe, "verify": _verify, "gramian": _gramian}


def run_scenario(s: Scenario) -> RunRecord:
    """Run one scenario; library errors are captured in the record, not raised."""
    rec = RunRecord(s.name, __version__, s.to_dict())
    rec.timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    start = time.perf_counter()
    try:
        sys = s.build_system()
        sg = build_semigroup(sys.generator, s.build_grid())
        rec.outputs = EXPERIMENTS[s.experiment](s, sys, sg, s.build_picard())
    except SemictrlError as exc:
        logger.info("scenario %s failed: %s", s.name, exc)
        rec.status = "failed"
        rec.error = {"category": exc.category, "type": type(exc).__name__, "message": str(exc)}
        partial = getattr(exc, "result", None)
        if partial is not None:
            rec.outputs = _steering_dict(partial)
    rec.duration = time.perf_counter() - start
    return rec


def run_file(ref: str, seed: Optional[int] = None) -> List[RunRecord]:
    """Load a config (path or shipped name) and run each scenario in it.

    ConfigError propagates, since there is no scenario to attach it to.
    """
    scenarios = load_scenarios(ref)
    if seed is not None:
        scenarios = [s.with_seed(seed) for s in scenarios]
    return [run_scenario(s) for s in scenarios]
