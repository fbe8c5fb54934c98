"""Factories that map a data source and CTL parameters onto a given mesh."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import ClinicalSeries, TwinSpec, interpolate_to_mesh, make_twin
from .errors import InvalidArgument
from .forward import DEFAULT_N_SUB, NewtonConfig
from .mesh import PiecewiseFn, TimeMesh, transfer
from .model import CtlParams, ModelParams, ctl_d, ctl_e0
from .objective import InverseProblem, build_smoothing


def ctl_profiles(series: ClinicalSeries, ctl: CtlParams, mesh: TimeMesh):
    """(d, E0) on ``mesh`` from the measured log10 V at interval midpoints."""
    mid = mesh.midpoints
    lv = series.log10_v_at(mid)
    return PiecewiseFn(mesh, ctl_d(mid, lv, ctl)), PiecewiseFn(mesh, ctl_e0(mid, lv, ctl))


def parse_e_profile(text: str, mesh: TimeMesh, series: ClinicalSeries | None = None,
                    ctl: CtlParams | None = None) -> PiecewiseFn:
    """``constant:<v>``, ``step:<t>:<a>:<b>`` or ``profile`` / ``patient1-profile``."""
    parts = text.split(":")
    try:
        if parts[0] == "constant" and len(parts) == 2:
            return PiecewiseFn.constant(mesh, float(parts[1]))
        if parts[0] == "step" and len(parts) == 4:
            t0, a, b = (float(x) for x in parts[1:])
            return PiecewiseFn(mesh, np.where(mesh.midpoints < t0, a, b))
    except ValueError:
        raise InvalidArgument(f"bad profile specification {text!r}") from None
    if parts[0] in ("profile", "patient1-profile") and len(parts) == 1:
        if series is None or ctl is None:
            raise InvalidArgument("profile needs a data series and CTL parameters")
        return ctl_profiles(series, ctl, mesh)[1]
    raise InvalidArgument(f"bad profile specification {text!r}")


@dataclass
class PatientSetup:
    """Callable ``mesh -> InverseProblem`` for clinical data."""
    series: ClinicalSeries
    ctl: CtlParams
    params: ModelParams = field(default_factory=ModelParams)
    x0: tuple | None = None
    n_sub: int = DEFAULT_N_SUB
    taper_days: float = 0.0
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __call__(self, mesh: TimeMesh) -> InverseProblem:
        d_fn, e0 = ctl_profiles(self.series, self.ctl, mesh)
        data = interpolate_to_mesh(self.series, mesh, self.n_sub)
        x0 = self.series.initial_state() if self.x0 is None else tuple(self.x0)
        return InverseProblem(mesh, data, d_fn, e0, x0, self.params,
                              build_smoothing(mesh, self.taper_days), self.newton, self.n_sub)


@dataclass
class TwinSetup:
    """Callable ``mesh -> InverseProblem`` with data regenerated from E* on every mesh.

    ``prior`` is a profile string evaluated on each mesh; d(t) comes from
    the CTL profile of ``series``.
    """
    series: ClinicalSeries
    ctl: CtlParams
    e_true: str
    noise: float = 0.0
    seed: int = 0
    prior: str = "constant:1"
    params: ModelParams = field(default_factory=ModelParams)
    x0: tuple | None = None
    n_sub: int = DEFAULT_N_SUB
    taper_days: float = 0.0
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    base_mesh: TimeMesh | None = None

    def e_true_on(self, mesh: TimeMesh) -> PiecewiseFn:
        # E* lives on the base mesh; transfers to refinements are exact
        base = self.base_mesh if self.base_mesh is not None else mesh
        return transfer(parse_e_profile(self.e_true, base, self.series, self.ctl), mesh)

    def __call__(self, mesh: TimeMesh) -> InverseProblem:
        if self.base_mesh is None:
            self.base_mesh = mesh
        d_fn, _ = ctl_profiles(self.series, self.ctl, mesh)
        x0 = self.series.initial_state() if self.x0 is None else tuple(self.x0)
        spec = TwinSpec(self.e_true_on(mesh), self.noise, self.noise, self.seed)
        data, _ = make_twin(self.params, d_fn, spec, mesh, x0, self.n_sub, self.newton)
        prior = parse_e_profile(self.prior, mesh, self.series, self.ctl)
        return InverseProblem(mesh, data, d_fn, prior, x0, self.params,
                              build_smoothing(mesh, self.taper_days), self.newton, self.n_sub)


def window_error(e: PiecewiseFn, e_true: PiecewiseFn, mask=None) -> float:
    """Relative weighted L2 error, optionally restricted to intervals in ``mask``."""
    tau = e.mesh.tau
    m = np.ones(tau.size, bool) if mask is None else np.asarray(mask, bool)
    num = np.sum(tau[m] * (e.values - e_true.values)[m] ** 2)
    den = np.sum(tau[m] * e_true.values[m] ** 2)
    return float(np.sqrt(num / den))


def identifiable_mask(traj, threshold: float = 1.0) -> np.ndarray:
    """Intervals whose left-node infected-cell count exceeds ``threshold``."""
    return traj.states[:-1, 1] > threshold
