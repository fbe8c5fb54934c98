"""Fletcher-Reeves conjugate gradient on a fixed mesh.

Step length r = -(G, d) / (gamma_m ||d||^2) with the decaying schedule
gamma_m = gamma0 / (m + 1)^p.  A safeguard halves r until the functional
does not increase and the forward solve succeeds; iterates may be clamped
to an admissible box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DegenerateDirection, InvalidArgument, OptimizerError, SolverError
from .mesh import PiecewiseFn, inner

REASONS = ("theta", "growth", "stall", "max_iters", "step_failure")


@dataclass(frozen=True)
class CgaConfig:
    gamma0: float = 0.1
    p: float = 0.5
    theta: float = 1e-3
    max_iters: int = 200
    stall_window: int = 5
    stall_tol: float = 1e-4
    box: tuple = (1.0, 10.0)
    project: bool = True
    growth_factor: float | None = None   # None disables the growth stop
    safeguard: bool = True
    max_halvings: int = 40
    step_size: float | None = None       # accepted, unused by the update

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise InvalidArgument("gamma0 must be positive")
        if not (0.0 < self.p < 1.0):
            raise InvalidArgument("p must lie in (0, 1)")
        if not (0.0 < self.theta < 1.0):
            raise InvalidArgument("theta must lie in (0, 1)")
        if self.max_iters < 0:
            raise InvalidArgument("max_iters must be non-negative")
        if self.box[0] >= self.box[1]:
            raise InvalidArgument("box must be an increasing pair")
        if self.growth_factor is not None and not self.growth_factor > 1:
            raise InvalidArgument("growth_factor must exceed 1")

    def to_dict(self):
        d = asdict(self)
        d["box"] = list(self.box)
        return d


def reg_schedule(m: int, gamma0: float, p: float) -> float:
    if m < 0:
        raise InvalidArgument("m must be non-negative")
    return gamma0 / (m + 1) ** p


def fr_beta(g_norm: float, g_prev_norm: float) -> float:
    return (g_norm / g_prev_norm) ** 2


@dataclass
class CgaTrace:
    j: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    rel_change: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    step: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    reason: str = ""

    def append(self, j, gn, rel, gam):
        self.j.append(j)
        self.grad_norm.append(gn)
        self.rel_change.append(rel)
        self.gamma.append(gam)
        self.step.append(math.nan)
        self.beta.append(math.nan)

    def __len__(self):
        return len(self.j)

    def rows(self):
        return list(zip(range(len(self)), self.j, self.grad_norm, self.rel_change,
                        self.gamma, self.step, self.beta))


@dataclass(eq=False)
class CgaResult:
    e: PiecewiseFn
    trace: CgaTrace
    evaluation: object   # final Evaluation, gradient attached
    iterations: int

    @property
    def reason(self):
        return self.trace.reason

    @property
    def gamma(self) -> float:
        return self.evaluation.gamma

    @property
    def gradient(self) -> PiecewiseFn:
        return self.evaluation.grad

    @property
    def grad_norm(self) -> float:
        return self.trace.grad_norm[-1]


def _project(v, cfg):
    return np.clip(v, *cfg.box) if cfg.project else v


def cga_run(e0: PiecewiseFn, problem, cfg: CgaConfig = CgaConfig(), gamma_offset: int = 0,
            fr: bool = True) -> CgaResult:
    """Minimize the Tikhonov functional of ``problem`` from ``e0``.

    ``gamma_offset`` shifts the schedule index (continue-schedule mode);
    ``fr=False`` zeroes the conjugacy coefficient (steepest descent).
    """
    mesh = problem.mesh
    if not e0.mesh.same_as(mesh):
        raise InvalidArgument("e0 must live on the problem mesh")
    e = PiecewiseFn(mesh, _project(e0.values, cfg))
    tau = mesh.tau
    trace = CgaTrace()
    gam = reg_schedule(gamma_offset, cfg.gamma0, cfg.p)
    try:
        ev = problem.with_gradient(problem.evaluate(e, gam))
    except SolverError as exc:
        raise OptimizerError(f"cannot evaluate the starting iterate: {exc}", e=e.values) from exc

    d_prev = g_prev = None
    min_g = math.inf
    n_stall = 0
    rel = math.nan
    m = 0
    while True:
        G = ev.grad.values
        gn = math.sqrt(inner(G, G, mesh))
        trace.append(ev.j, gn, rel, gam)
        if gn <= cfg.theta:
            trace.reason = "theta"
            break
        if cfg.growth_factor is not None and gn > cfg.growth_factor * min_g:
            trace.reason = "growth"
            break
        if n_stall >= cfg.stall_window:
            trace.reason = "stall"
            break
        if m >= cfg.max_iters:
            trace.reason = "max_iters"
            break
        min_g = min(min_g, gn)

        if d_prev is None:
            d, beta = -G, 0.0
        else:
            beta = fr_beta(gn, math.sqrt(inner(g_prev, g_prev, mesh))) if fr else 0.0
            d = -G + beta * d_prev
            if inner(G, d, mesh) >= 0:
                d, beta = -G, 0.0   # restart on a non-descent direction
        dd = inner(d, d, mesh)
        if dd == 0.0:
            raise DegenerateDirection("zero search direction with nonzero gradient", e=e.values)
        r = -inner(G, d, mesh) / (gam * dd)

        accepted = None
        for _ in range(cfg.max_halvings + 1 if cfg.safeguard else 1):
            cand = PiecewiseFn(mesh, _project(e.values + r * d, cfg))
            try:
                ev_c = problem.evaluate(cand, gam)
            except SolverError:
                ev_c = None
            if ev_c is not None and np.all(np.isfinite(ev_c.traj.fine)) and math.isfinite(ev_c.j) \
                    and (not cfg.safeguard or ev_c.j <= ev.j):
                accepted = ev_c
                break
            r *= 0.5
        if accepted is None:
            if not cfg.safeguard:
                raise OptimizerError("iterate could not be evaluated", e=e.values)
            trace.reason = "step_failure"
            break
        trace.step[-1] = r
        trace.beta[-1] = beta

        new = accepted.e
        nn = math.sqrt(inner(new.values, new.values, mesh))
        rel = math.sqrt(inner(new.values - e.values, new.values - e.values, mesh)) / nn if nn > 0 else math.inf
        n_stall = n_stall + 1 if rel < cfg.stall_tol else 0
        d_prev, g_prev = d, G
        e = new
        m += 1
        gam = reg_schedule(m + gamma_offset, cfg.gamma0, cfg.p)
        # re-weight the regularization at the new gamma before the gradient
        accepted.gamma = gam
        accepted.j = problem.evaluate(e, gam, accepted.traj).j
        try:
            ev = problem.with_gradient(accepted)
        except SolverError as exc:
            raise OptimizerError(f"adjoint failed at iteration {m}: {exc}", e=e.values) from exc
    return CgaResult(e, trace, ev, m)
