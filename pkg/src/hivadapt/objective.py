"""Tikhonov functional, gradient, stationarity residual and data residuals.

The functional is evaluated on the sub-grid of the forward solve:

    J(E) = 1/2 sum_i h_i z1 (log10 S_i - log10 g1_i)^2
         + 1/2 sum_i h_i z2 (log10 V_i - log10 g2_i)^2
         + gamma/2 sum_k tau_k (E_k - E0_k)^2

with S = u1 + u2, V = u3 taken at the right end of each sub-step and
clipped below at ``floor``.  With one sub-step per interval this is the
rectangle rule on the mesh itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import AdjointTrajectory, solve_adjoint
from .data import LOG_FLOOR, InterpolatedData
from .errors import InvalidArgument
from .forward import DEFAULT_N_SUB, NewtonConfig, StateTrajectory, solve_forward, sub_steps
from .mesh import PiecewiseFn, TimeMesh, l2_norm
from .model import ModelParams


@dataclass(frozen=True, eq=False)
class SmoothingWeights:
    z1: PiecewiseFn
    z2: PiecewiseFn

    def __post_init__(self):
        for z in (self.z1, self.z2):
            if np.any(z.values < 0) or np.any(z.values > 1):
                raise InvalidArgument("smoothing weights must lie in [0, 1]")

    @classmethod
    def ones(cls, mesh):
        one = PiecewiseFn.constant(mesh, 1.0)
        return cls(one, one)

    @classmethod
    def zeros(cls, mesh):
        zero = PiecewiseFn.constant(mesh, 0.0)
        return cls(zero, zero)


def taper_weight(t, t_end: float, taper_days: float):
    """1 inside [taper, T - taper], cosine ramp 0 -> 1 over each end window."""
    t = np.asarray(t, dtype=float)
    if taper_days == 0:
        return np.ones_like(t)
    dist = np.minimum(t, t_end - t)
    x = np.clip(dist / taper_days, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * x)


def build_smoothing(mesh: TimeMesh, taper_days: float = 0.0, zeta=None) -> SmoothingWeights:
    """Cosine-tapered weights sampled at interval midpoints (``zeta`` unused, kept for symmetry)."""
    if taper_days < 0:
        raise InvalidArgument("taper_days must be non-negative")
    if taper_days > mesh.t_end / 2:
        raise InvalidArgument("taper_days exceeds half the span")
    z = PiecewiseFn(mesh, taper_weight(mesh.midpoints, mesh.t_end, taper_days))
    return SmoothingWeights(z, z)


@dataclass(frozen=True, eq=False)
class TikhonovConfig:
    gamma: float
    e_prior: PiecewiseFn
    taper_days: float = 0.0
    floor: float = LOG_FLOOR

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgument("gamma must be positive")
        if not self.floor > 0:
            raise InvalidArgument("floor must be positive")


def _logs(fine, floor):
    Y = fine[1:]
    lS = np.log10(np.maximum(Y[:, 0] + Y[:, 1], floor))
    lV = np.log10(np.maximum(Y[:, 2], floor))
    return lS, lV


def misfit_terms(traj: StateTrajectory, data: InterpolatedData, w: SmoothingWeights | None = None,
                 floor: float = LOG_FLOOR):
    """The two data-misfit integrals (without the 1/2 factor split out)."""
    if not data.mesh.same_as(traj.mesh) or data.n_sub != traj.n_sub:
        raise InvalidArgument("trajectory and data live on different meshes")
    h = sub_steps(traj.mesh, traj.n_sub)
    lS, lV = _logs(traj.fine, floor)
    if w is None:
        w1 = w2 = 1.0
    else:
        w1 = np.repeat(w.z1.values, traj.n_sub)
        w2 = np.repeat(w.z2.values, traj.n_sub)
    a = 0.5 * float(np.sum(h * w1 * (lS - data.log10_g1_fine) ** 2))
    b = 0.5 * float(np.sum(h * w2 * (lV - data.log10_g2_fine) ** 2))
    return a, b


def evaluate_j(traj: StateTrajectory, e: PiecewiseFn, data: InterpolatedData,
               cfg: TikhonovConfig, w: SmoothingWeights | None = None) -> float:
    if not (e.mesh.same_as(traj.mesh) and cfg.e_prior.mesh.same_as(traj.mesh)):
        raise InvalidArgument("E, prior and trajectory must share a mesh")
    a, b = misfit_terms(traj, data, w, cfg.floor)
    reg = 0.5 * cfg.gamma * float(np.sum(traj.mesh.tau * (e.values - cfg.e_prior.values) ** 2))
    return a + b + reg


def assemble_gradient(traj: StateTrajectory, adj: AdjointTrajectory, e: PiecewiseFn,
                      d_fn: PiecewiseFn, cfg: TikhonovConfig, component: int = 2) -> PiecewiseFn:
    """g_k = gamma (E_k - E0_k) + d_k <lambda u2>_k.

    <lambda u2>_k averages lambda_component * u2 over the left sub-nodes of
    interval k (the left node itself when n_sub = 1).  ``component=3``
    swaps in lambda3 for inspection only.
    """
    if component not in (2, 3):
        raise InvalidArgument("component must be 2 or 3")
    n, N = traj.n_sub, traj.mesh.n_intervals
    lam = adj.fine[:-1, component - 1]
    u2 = traj.fine[:-1, 1]
    avg = (lam * u2).reshape(N, n).mean(axis=1)
    g = cfg.gamma * (e.values - cfg.e_prior.values) + d_fn.values * avg
    return PiecewiseFn(traj.mesh, g)


def stationarity_residual(traj, adj, e, d_fn, cfg, component: int = 2) -> PiecewiseFn:
    return assemble_gradient(traj, adj, e, d_fn, cfg, component)


@dataclass(frozen=True)
class DataResiduals:
    r1: np.ndarray
    r2: np.ndarray
    norm_r1: float
    norm_r2: float


def data_residuals(traj: StateTrajectory, data: InterpolatedData,
                   floor: float = LOG_FLOOR) -> DataResiduals:
    """Nodal |log10 misfits| / nno for virus (r1) and total T cells (r2)."""
    if not data.mesh.same_as(traj.mesh):
        raise InvalidArgument("trajectory and data live on different meshes")
    X = traj.states
    nno = traj.mesh.n_nodes
    lV = np.log10(np.maximum(X[:, 2], floor))
    lS = np.log10(np.maximum(X[:, 0] + X[:, 1], floor))
    r1 = np.abs(lV - data.log10_g2_nodes) / nno
    r2 = np.abs(lS - data.log10_g1_nodes) / nno
    return DataResiduals(r1, r2, float(np.linalg.norm(r1)), float(np.linalg.norm(r2)))


@dataclass(eq=False)
class Evaluation:
    e: PiecewiseFn
    gamma: float
    traj: StateTrajectory
    j: float
    adj: AdjointTrajectory | None = None
    grad: PiecewiseFn | None = None


@dataclass(eq=False)
class InverseProblem:
    """Everything needed to evaluate J and its gradient on one mesh."""
    mesh: TimeMesh
    data: InterpolatedData
    d_fn: PiecewiseFn
    prior: PiecewiseFn
    x0: tuple
    params: ModelParams = field(default_factory=ModelParams)
    weights: SmoothingWeights | None = None
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    n_sub: int = DEFAULT_N_SUB
    floor: float = LOG_FLOOR
    grad_component: int = 2

    def __post_init__(self):
        for f in (self.d_fn, self.prior):
            if not f.mesh.same_as(self.mesh):
                raise InvalidArgument("d and prior must live on the problem mesh")
        if not self.data.mesh.same_as(self.mesh) or self.data.n_sub != self.n_sub:
            raise InvalidArgument("data must live on the problem mesh and sub-grid")
        if self.weights is None:
            self.weights = SmoothingWeights.ones(self.mesh)

    def tikhonov(self, gamma: float) -> TikhonovConfig:
        return TikhonovConfig(gamma, self.prior, floor=self.floor)

    def forward(self, e: PiecewiseFn) -> StateTrajectory:
        return solve_forward(e, self.d_fn, self.x0, self.mesh, self.params, self.newton, self.n_sub)

    def evaluate(self, e: PiecewiseFn, gamma: float, traj: StateTrajectory | None = None) -> Evaluation:
        traj = self.forward(e) if traj is None else traj
        return Evaluation(e, gamma, traj, evaluate_j(traj, e, self.data, self.tikhonov(gamma), self.weights))

    def objective(self, e: PiecewiseFn, gamma: float) -> float:
        return self.evaluate(e, gamma).j

    def with_gradient(self, ev: Evaluation) -> Evaluation:
        adj = solve_adjoint(ev.traj, ev.e, self.d_fn, self.data, self.weights,
                            self.params, self.newton, self.floor)
        ev.adj = adj
        ev.grad = assemble_gradient(ev.traj, adj, ev.e, self.d_fn, self.tikhonov(ev.gamma),
                                    self.grad_component)
        return ev

    def gradient(self, e: PiecewiseFn, gamma: float) -> PiecewiseFn:
        return self.with_gradient(self.evaluate(e, gamma)).grad

    def residuals(self, traj: StateTrajectory) -> DataResiduals:
        return data_residuals(traj, self.data, self.floor)


def grad_norm(g: PiecewiseFn) -> float:
    return l2_norm(g)
