"""Backward implicit solve of the adjoint system from lambda(T) = 0."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import InvalidArgument, MisfitDomainError, NewtonDivergence, SingularJacobian
from .forward import NewtonConfig, StateTrajectory, sub_steps
from .mesh import PiecewiseFn
from .model import ModelParams


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    mesh: object
    fine: np.ndarray
    n_sub: int
    newton_iters: int = 0

    @property
    def adjoints(self) -> np.ndarray:
        return self.fine[::self.n_sub]


def step_backward(l_next, tau: float, x, e: float, d: float, forcing,
                  p: ModelParams = ModelParams(), cfg: NewtonConfig = NewtonConfig()):
    """Solve l + tau * f~(l) = l_next for one step; returns (l, newton iterations).

    ``x`` is the forward state at the time level of the unknown.
    """
    if not tau > 0:
        raise InvalidArgument("tau must be positive")
    X = np.asarray(x, dtype=float).reshape(1, 3)
    L, status, fail, its = K.backward_sweep(
        np.array([float(tau)]), np.array([float(d) * float(e)]), X,
        np.array([float(forcing[0])]), np.array([float(forcing[1])]),
        np.asarray(l_next, dtype=float), *p.as_tuple(), cfg.tol_rel, cfg.max_iter)
    if status != K.OK:
        cls = SingularJacobian if status == K.SINGULAR else NewtonDivergence
        raise cls("adjoint step failed", 0, 0)
    return L[0].copy(), its


def misfit_forcings(traj: StateTrajectory, data, w1=None, w2=None, floor: float = 1e-2):
    """Per-sub-step forcings (misfit1, misfit2) at right sub-nodes."""
    n = traj.fine.shape[0] - 1
    if not np.all(np.isfinite(traj.fine)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(traj.fine), axis=1))[0])
        raise MisfitDomainError(f"non-finite state at sub-node {bad}", node=bad)
    w1 = np.ones(n) if w1 is None else np.asarray(w1, float)
    w2 = np.ones(n) if w2 is None else np.asarray(w2, float)
    return K.misfit_forcing(traj.fine, data.log10_g1_fine, data.log10_g2_fine, w1, w2, floor)


def solve_adjoint(traj: StateTrajectory, e_fn: PiecewiseFn, d_fn: PiecewiseFn, data,
                  weights=None, p: ModelParams = ModelParams(), cfg: NewtonConfig = NewtonConfig(),
                  floor: float = 1e-2, forcing=None) -> AdjointTrajectory:
    """Backward recurrence over the sub-grid of ``traj``.

    ``forcing`` overrides the misfit forcings (pair of per-sub-step arrays).
    """
    mesh, n_sub = traj.mesh, traj.n_sub
    if not (e_fn.mesh.same_as(mesh) and d_fn.mesh.same_as(mesh)):
        raise InvalidArgument("e_fn, d_fn and traj must share a mesh")
    if forcing is None:
        if not data.mesh.same_as(mesh) or data.n_sub != n_sub:
            raise InvalidArgument("data do not live on the trajectory mesh")
        w1 = w2 = None
        if weights is not None:
            w1 = np.repeat(weights.z1.values, n_sub)
            w2 = np.repeat(weights.z2.values, n_sub)
        m1, m2 = misfit_forcings(traj, data, w1, w2, floor)
    else:
        m1, m2 = (np.asarray(f, dtype=float) for f in forcing)
    h = sub_steps(mesh, n_sub)
    de = np.repeat(e_fn.values * d_fn.values, n_sub)
    L, status, fail, its = K.backward_sweep(h, de, traj.fine, m1, m2, np.zeros(3), *p.as_tuple(),
                                            cfg.tol_rel, cfg.max_iter)
    if status != K.OK:
        cls = SingularJacobian if status == K.SINGULAR else NewtonDivergence
        raise cls(f"adjoint solve failed at interval {fail // n_sub}", fail, fail // n_sub)
    return AdjointTrajectory(mesh, L, n_sub, its)
