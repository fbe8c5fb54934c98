"""Acute-infection model: right-hand sides, Jacobians and CTL profiles.

State ``u = (u1, u2, u3)``: uninfected target cells, infected cells,
free virions.  ``e`` is the immune-response function and ``d`` the
death rate of infected cells; both enter only through the product d*e.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class ModelParams:
    s: float = 1.0e4        # cells / (ml day)
    mu: float = 0.01        # 1/day
    beta1: float = 2.4e-8   # ml / (virion day)
    beta2: float = 2.4e-8   # ml / (cell day)
    d0: float = 0.26        # 1/day
    c: float = 2.4          # 1/day
    rho: float = 1.0e3      # virions / (cell day)

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (np.isfinite(v) and v > 0):
                raise InvalidArgument(f"model parameter {k} must be positive, got {v!r}")

    def as_tuple(self):
        return (self.s, self.mu, self.beta1, self.beta2, self.c, self.rho)

    def to_dict(self) -> dict:
        return asdict(self)


# default initial state; u1(0) is overridden by the first T-cell datum
INITIAL_STATE = (1_125_000.0, 0.0, 1.0)
EQUILIBRIUM_STATE = (1.0e6, 0.0, 0.0)


@dataclass(frozen=True)
class CtlParams:
    beta_ctl: float
    delta_t1: float = 2.5
    delta_t2: float = 5.0
    t1: float = 1.0
    t2: float = 1.0
    e0_base: float = 1.0
    d0: float = 0.26

    def __post_init__(self):
        if not (self.delta_t1 > 0 and self.delta_t2 > 0):
            raise InvalidArgument("delta_t1 and delta_t2 must be positive")

    @property
    def kappa(self) -> float:
        return 1.0 + 1.0e5 * self.beta_ctl

    def to_dict(self) -> dict:
        return asdict(self)


PATIENT_CTL = {
    1: CtlParams(beta_ctl=0.015, t2=1.0, e0_base=1.0),
    2: CtlParams(beta_ctl=0.1, t2=50.0, e0_base=1.0),
    3: CtlParams(beta_ctl=0.1, t2=50.0, e0_base=1.0),
    4: CtlParams(beta_ctl=0.1, t2=1.0, e0_base=1.4),
}


def rhs(x, e: float, d: float, p: ModelParams = ModelParams()) -> np.ndarray:
    u1, u2, u3 = x
    inf = p.beta1 * u1 * u3
    return np.array([
        p.s - inf - p.mu * u1,
        inf - d * e * u2,
        p.rho * u2 - p.beta2 * u1 * u3 - p.c * u3,
    ])


def rhs_jacobian(x, e: float, d: float, p: ModelParams = ModelParams()) -> np.ndarray:
    u1, u2, u3 = x
    return np.array([
        [-p.beta1 * u3 - p.mu, 0.0, -p.beta1 * u1],
        [p.beta1 * u3, -d * e, p.beta1 * u1],
        [-p.beta2 * u3, p.rho, -p.beta2 * u1 - p.c],
    ])


def adjoint_jacobian(x, e: float, d: float, p: ModelParams = ModelParams()) -> np.ndarray:
    """Jacobian in lambda of the adjoint right-hand side (constant in lambda)."""
    u1, _, u3 = x
    return np.array([
        [p.beta1 * u3 + p.mu, -p.beta1 * u3, p.beta2 * u3],
        [0.0, d * e, -p.rho],
        [p.beta1 * u1, -p.beta1 * u1, p.c + p.beta2 * u1],
    ])


def adjoint_rhs(lam, x, e: float, d: float, misfit1: float, misfit2: float,
                p: ModelParams = ModelParams()) -> np.ndarray:
    """d(lambda)/dt; affine in lambda with forcing (misfit1, misfit1, misfit2)."""
    return adjoint_jacobian(x, e, d, p) @ np.asarray(lam, float) + np.array([misfit1, misfit1, misfit2])


def ctl_f(t, cp: CtlParams):
    t = np.asarray(t, dtype=float)
    k = cp.kappa
    a = cp.beta_ctl / (1.0 + k * np.exp(-(t - cp.t1) / cp.delta_t1))
    b = cp.beta_ctl / (1.0 + k * np.exp(-(t - cp.t2) / cp.delta_t2))
    return a - b


def _bump(t, log10_v, cp):
    t = np.asarray(t, dtype=float)
    return np.where(t >= cp.t1, ctl_f(t, cp) * np.asarray(log10_v, float), 0.0)


def ctl_d(t, log10_v, cp: CtlParams):
    """Death rate d(t) = d0 + [t >= t1] f(t) log10 V(t), V from measured data."""
    return cp.d0 + _bump(t, log10_v, cp)


def ctl_e0(t, log10_v, cp: CtlParams):
    """Initial guess / prior E0(t) = E00 + [t >= t1] f(t) log10 V(t)."""
    return cp.e0_base + _bump(t, log10_v, cp)
