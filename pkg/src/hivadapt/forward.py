"""Implicit Euler integration of the forward model with Newton steps.

Each mesh interval is split into ``n_sub`` equal sub-steps; E and d are
constant on the interval.  ``n_sub = 1`` is the plain one-step-per-interval
scheme.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, asdict

import numpy as np

from . import _kernels as K
from .errors import InvalidArgument, NewtonDivergence, SingularJacobian
from .mesh import PiecewiseFn, TimeMesh
from .model import ModelParams

DEFAULT_N_SUB = 32


@dataclass(frozen=True)
class NewtonConfig:
    tol_rel: float = 1e-10
    max_iter: int = 25
    damping: float = 0.5

    def __post_init__(self):
        if not self.tol_rel > 0:
            raise InvalidArgument("tol_rel must be positive")
        if self.max_iter < 1:
            raise InvalidArgument("max_iter must be >= 1")
        if not (0.0 < self.damping <= 1.0):
            raise InvalidArgument("damping must lie in (0, 1]")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """Forward solution.

    ``states`` holds one row per mesh node; ``fine`` one row per sub-grid
    node (``fine[::n_sub] == states``).
    """
    mesh: TimeMesh
    fine: np.ndarray
    n_sub: int
    newton_iters: int = 0

    @property
    def states(self) -> np.ndarray:
        return self.fine[::self.n_sub]

    @property
    def fine_times(self) -> np.ndarray:
        return self.mesh.subdivide(self.n_sub)

    @property
    def u1(self):
        return self.states[:, 0]

    @property
    def u2(self):
        return self.states[:, 1]

    @property
    def u3(self):
        return self.states[:, 2]

    def negative_nodes(self) -> np.ndarray:
        return np.flatnonzero(np.any(self.fine < 0, axis=1))


def sub_steps(mesh: TimeMesh, n_sub: int) -> np.ndarray:
    if n_sub < 1:
        raise InvalidArgument("n_sub must be >= 1")
    return np.repeat(mesh.tau / n_sub, n_sub)


def _raise(status, step, n_sub, what, trace=None):
    interval = step // n_sub
    msg = f"{what}: Newton failed at interval {interval} (sub-step {step})"
    if status == K.SINGULAR:
        raise SingularJacobian(msg + ": singular 3x3 system", step, interval, trace)
    raise NewtonDivergence(msg + ": no convergence", step, interval, trace)


def step_implicit(x_prev, tau: float, e: float, d: float,
                  p: ModelParams = ModelParams(), cfg: NewtonConfig = NewtonConfig()) -> np.ndarray:
    """One implicit Euler step x = x_prev + tau f(x)."""
    if not tau > 0:
        raise InvalidArgument("tau must be positive")
    x_prev = np.asarray(x_prev, dtype=float)
    if not np.all(np.isfinite(x_prev)):
        raise InvalidArgument("x_prev must be finite")
    X, status, fail, _ = K.forward_sweep(
        np.array([float(tau)]), np.array([float(d) * float(e)]), x_prev, *p.as_tuple(),
        cfg.tol_rel, cfg.max_iter, cfg.damping)
    if status != K.OK:
        _raise(status, fail, 1, "forward step")
    return X[1].copy()


def solve_forward(e_fn: PiecewiseFn, d_fn: PiecewiseFn, x0, mesh: TimeMesh,
                  p: ModelParams = ModelParams(), cfg: NewtonConfig = NewtonConfig(),
                  n_sub: int = DEFAULT_N_SUB) -> StateTrajectory:
    if not (e_fn.mesh.same_as(mesh) and d_fn.mesh.same_as(mesh)):
        raise InvalidArgument("e_fn and d_fn must live on the given mesh")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (3,) or not np.all(np.isfinite(x0)):
        raise InvalidArgument("x0 must be three finite numbers")
    h = sub_steps(mesh, n_sub)
    de = np.repeat(e_fn.values * d_fn.values, n_sub)
    X, status, fail, its = K.forward_sweep(h, de, x0, *p.as_tuple(),
                                           cfg.tol_rel, cfg.max_iter, cfg.damping)
    if status != K.OK:
        _raise(status, fail, n_sub, "forward solve", trace=X[:fail + 1])
    traj = StateTrajectory(mesh, X, n_sub, its)
    neg = traj.negative_nodes()
    if neg.size:
        # monitored, not clipped: clipping would corrupt the gradient
        warnings.warn(f"negative state components at {neg.size} sub-nodes (first {neg[0]})",
                      RuntimeWarning, stacklevel=2)
    return traj
