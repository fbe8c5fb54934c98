"""Adaptive outer loop: CGA on a mesh, residual-driven bisection, repeat.

Also the three a posteriori indicators.  Only the residual one, ||R||/gamma,
is constant-free; the two jump-based ones have their unknown constants set
to 1 and are relative indicators only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidArgument, OptimizerError
from .mesh import PiecewiseFn, TimeMesh, jumps, l2_norm, refine_where, refined_intervals, transfer, uniform_mesh
from .optimizer import CgaConfig, CgaResult, cga_run

RESTART = ("initial_guess", "previous_result")
GAMMA_MODES = ("reset", "continue")


@dataclass(frozen=True)
class AcgaConfig:
    beta_refine: float = 0.875
    max_refinements: int = 4
    restart_from: str = "previous_result"
    theta_est: float = 0.0          # 0 disables the estimator stop
    inner: CgaConfig = field(default_factory=CgaConfig)
    gamma_mode: str = "continue"
    level_stop: bool = False        # stop when final gradient norms stop decreasing
    level_stop_ratio: float = 0.99

    def __post_init__(self):
        if not (0.0 < self.beta_refine < 1.0):
            raise InvalidArgument("beta_refine must lie in (0, 1)")
        if self.max_refinements < 0:
            raise InvalidArgument("max_refinements must be non-negative")
        if self.restart_from not in RESTART:
            raise InvalidArgument(f"restart_from must be one of {RESTART}")
        if self.gamma_mode not in GAMMA_MODES:
            raise InvalidArgument(f"gamma_mode must be one of {GAMMA_MODES}")

    def to_dict(self):
        d = asdict(self)
        d["inner"] = self.inner.to_dict()
        return d


@dataclass(eq=False)
class RefinementRecord:
    level: int
    mesh: TimeMesh
    nno: int
    norm_r1: float
    norm_r2: float
    est_gradient_jump: float
    est_lipschitz_jump: float
    est_residual: float
    result: CgaResult
    indicator: PiecewiseFn
    problem: object
    refined: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def e(self) -> PiecewiseFn:
        return self.result.e

    @property
    def trace(self):
        return self.result.trace

    def summary(self) -> dict:
        return {
            "level": self.level, "nno": self.nno,
            "norm_r1": self.norm_r1, "norm_r2": self.norm_r2,
            "est_gradient_jump": self.est_gradient_jump, "est_lipschitz_jump": self.est_lipschitz_jump, "est_residual": self.est_residual,
            "cga_iterations": self.result.iterations, "termination": self.result.reason,
            "final_grad_norm": self.result.grad_norm, "final_gamma": self.result.gamma,
            "refined_intervals": int(self.refined.size),
        }


@dataclass(eq=False)
class AcgaResult:
    records: list
    stop_reason: str

    @property
    def final(self) -> RefinementRecord:
        return self.records[-1]

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, k):
        return self.records[k]


def _jump_terms(e: PiecewiseFn):
    tau = e.mesh.tau
    jmp = np.abs(jumps(e))
    tbar = 0.5 * (tau[1:] + tau[:-1])
    return jmp, tbar


def estimator_residual(r: PiecewiseFn, gamma: float) -> float:
    """||R|| / gamma, an upper estimate of ||E* - E_tau||."""
    if not gamma > 0:
        raise InvalidArgument("gamma must be positive")
    return l2_norm(r) / gamma


def estimator_gradient_jump(gradient: PiecewiseFn, e: PiecewiseFn, mesh: TimeMesh | None = None) -> float:
    mesh = e.mesh if mesh is None else mesh
    tauE = PiecewiseFn(mesh, mesh.tau * e.values)
    jmp, tbar = _jump_terms(e)
    return l2_norm(gradient) * (l2_norm(tauE) + float(np.sum(jmp * np.sqrt(tbar))))


def estimator_lipschitz_jump(e: PiecewiseFn, mesh: TimeMesh | None, gamma: float, lipschitz_d: float = 1.0) -> float:
    if not gamma > 0:
        raise InvalidArgument("gamma must be positive")
    mesh = e.mesh if mesh is None else mesh
    tauE = PiecewiseFn(mesh, mesh.tau * e.values)
    return lipschitz_d / gamma * (l2_norm(tauE) + float(np.sum(np.abs(jumps(e)))))


def acga_run(make_problem, cfg: AcgaConfig = AcgaConfig(), mesh0: TimeMesh | None = None,
             t_end: float = 363.0, callback=None) -> AcgaResult:
    """Run the adaptive loop.

    ``make_problem(mesh)`` must return an ``InverseProblem`` on ``mesh``
    with data and CTL profiles already mapped onto it.
    """
    mesh = uniform_mesh(t_end, 1.0) if mesh0 is None else mesh0
    records = []
    prev_e = None
    offset = 0
    stop = "max_refinements"
    for level in range(cfg.max_refinements + 1):
        prob = make_problem(mesh)
        if prev_e is None or cfg.restart_from == "initial_guess":
            start = prob.prior
        else:
            start = transfer(prev_e, mesh)
        try:
            res = cga_run(start, prob, cfg.inner, gamma_offset=offset)
        except OptimizerError as exc:
            exc.level = level
            raise
        gam = res.gamma
        R = res.gradient
        indicator = PiecewiseFn(mesh, np.abs(R.values) / gam)
        dr = prob.residuals(res.evaluation.traj)
        rec = RefinementRecord(
            level, mesh, mesh.n_nodes, dr.norm_r1, dr.norm_r2,
            estimator_gradient_jump(R, res.e), estimator_lipschitz_jump(res.e, mesh, gam),
            estimator_residual(R, gam), res, indicator, prob)
        records.append(rec)
        if callback is not None:
            callback(rec)
        if cfg.gamma_mode == "continue":
            offset += res.iterations
        if cfg.theta_est > 0 and rec.est_residual <= cfg.theta_est:
            stop = "estimator"
            break
        if cfg.level_stop and level > 0 and \
                res.grad_norm >= cfg.level_stop_ratio * records[-2].result.grad_norm:
            stop = "gradient_stabilized"
            break
        if level == cfg.max_refinements:
            break
        new = refine_where(mesh, indicator, cfg.beta_refine)
        rec.refined = refined_intervals(mesh, indicator, cfg.beta_refine)
        if new.same_as(mesh):
            stop = "no_refinement"
            break
        prev_e = res.e
        mesh = new
    return AcgaResult(records, stop)
