"""Clinical records, CSV I/O, interpolation onto meshes, twin data."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, ParseError, SchemaError
from .mesh import PiecewiseFn, TimeMesh

T_OBS = 363.0
N_POINTS = 8
# pre-infection, weeks 0..4, six months, one year
DEFAULT_TIMES = (0.0, 7.0, 14.0, 21.0, 28.0, 35.0, 182.0, 363.0)
CSV_HEADER = ("time_days", "log10_viral_load", "total_t_cells_per_ml")
LOG_FLOOR = 1e-2

# log10 V and total T cells (x 1e3 cells/ml)
_PATIENTS = {
    1: ((0.0, 5.5, 7.75, 6.5, 5.5, 5.3, 4.5, 5.1),
        (1125.0, 825.0, 675.0, 525.0, 540.0, 525.0, 550.0, 600.0)),
    2: ((0.0, 5.5, 7.0, 5.75, 4.8, 3.8, 4.3, 4.0),
        (750.0, 630.0, 450.0, 280.0, 750.0, 570.0, 450.0, 530.0)),
    3: ((0.0, 5.7, 7.4, 6.8, 4.2, 3.8, 3.2, 3.7),
        (700.0, 430.0, 300.0, 480.0, 570.0, 450.0, 630.0, 510.0)),
    4: ((0.0, 3.7, 5.7, 6.0, 3.9, 3.5, 3.0, 3.0),
        (615.0, 700.0, 450.0, 615.0, 575.0, 520.0, 450.0, 615.0)),
}


@dataclass(frozen=True, eq=False)
class ClinicalSeries:
    patient_id: str
    times: np.ndarray
    log10_v: np.ndarray
    sigma: np.ndarray   # cells/ml

    def __post_init__(self):
        for name in ("times", "log10_v", "sigma"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        t, v, s = self.times, self.log10_v, self.sigma
        if not (t.shape == v.shape == s.shape == (N_POINTS,)):
            raise SchemaError(f"expected exactly {N_POINTS} data points, got {t.size}")
        if not np.all(np.isfinite(np.concatenate([t, v, s]))):
            raise SchemaError("data contain non-finite values")
        if np.any(np.diff(t) <= 0):
            raise SchemaError("times must be strictly increasing")
        if t[0] != 0.0:
            raise SchemaError("first time must be 0")
        if np.any(s <= 0):
            raise SchemaError("total T-cell counts must be positive")
        if np.any(v < 0):
            raise SchemaError("log10 viral load must be non-negative")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def equals(self, other: "ClinicalSeries") -> bool:
        return (self.patient_id == other.patient_id
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in ("times", "log10_v", "sigma")))

    def log10_v_at(self, t):
        return np.interp(t, self.times, self.log10_v)

    def sigma_at(self, t):
        return np.interp(t, self.times, self.sigma)

    def initial_state(self):
        """(Sigma(0), 0, 1): all T cells uninfected, a single virion."""
        return (float(self.sigma[0]), 0.0, 1.0)


def builtin_patient(n: int, times=DEFAULT_TIMES) -> ClinicalSeries:
    if n not in _PATIENTS:
        raise InvalidArgument(f"patient must be one of 1..4, got {n!r}")
    v, s = _PATIENTS[n]
    return ClinicalSeries(f"patient{n}", np.asarray(times, float), np.array(v), np.array(s) * 1e3)


def write_csv(series: ClinicalSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for t, v, s in zip(series.times, series.log10_v, series.sigma):
            w.writerow([repr(float(t)), repr(float(v)), repr(float(s))])


def load_csv(path, patient_id: str | None = None) -> ClinicalSeries:
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise SchemaError(f"{path}: header must be {','.join(CSV_HEADER)}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{reader.line_num}: expected 3 fields", reader.line_num)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError(f"{path}:{reader.line_num}: non-numeric field", reader.line_num) from None
    if len(rows) != N_POINTS:
        raise SchemaError(f"{path}: expected {N_POINTS} data rows, got {len(rows)}")
    a = np.array(rows)
    return ClinicalSeries(patient_id or path.stem, a[:, 0], a[:, 1], a[:, 2])


@dataclass(frozen=True, eq=False)
class InterpolatedData:
    """Observations on a mesh.

    ``g1``/``g2`` are interval values (midpoint samples); the ``*_fine``
    arrays hold one log10 value per sub-step and feed the functional; the
    ``*_nodes`` arrays feed the nodal residuals.
    """
    mesh: TimeMesh
    n_sub: int
    g1: PiecewiseFn
    g2: PiecewiseFn
    log10_g1_fine: np.ndarray
    log10_g2_fine: np.ndarray
    log10_g1_nodes: np.ndarray
    log10_g2_nodes: np.ndarray

    @property
    def log10_g1(self) -> np.ndarray:
        return np.log10(self.g1.values)

    @property
    def log10_g2(self) -> np.ndarray:
        return np.log10(self.g2.values)


def _check_span(mesh, t_end):
    if not np.isclose(mesh.t_end, t_end, rtol=1e-9, atol=0.0):
        raise InvalidArgument(f"mesh ends at {mesh.t_end}, data at {t_end}")


def interpolate_to_mesh(series: ClinicalSeries, mesh: TimeMesh, n_sub: int = 1,
                        floor: float = LOG_FLOOR) -> InterpolatedData:
    """Linear spline through the record: log10 V in log scale, Sigma linear."""
    _check_span(mesh, series.t_end)
    fine = mesh.subdivide(n_sub)
    fmid = 0.5 * (fine[1:] + fine[:-1])
    mid = mesh.midpoints

    def lg1(t):
        return np.log10(np.maximum(series.sigma_at(t), floor))

    def lg2(t):
        return np.maximum(series.log10_v_at(t), np.log10(floor))

    return InterpolatedData(
        mesh, n_sub,
        PiecewiseFn(mesh, 10.0 ** lg1(mid)), PiecewiseFn(mesh, 10.0 ** lg2(mid)),
        lg1(fmid), lg2(fmid), lg1(mesh.nodes), lg2(mesh.nodes))


def data_from_states(mesh: TimeMesh, fine_states: np.ndarray, n_sub: int,
                     floor: float = LOG_FLOOR) -> InterpolatedData:
    """Observations read off a sub-grid trajectory (right sub-node per sub-step)."""
    S = np.maximum(fine_states[:, 0] + fine_states[:, 1], floor)
    V = np.maximum(fine_states[:, 2], floor)
    lS, lV = np.log10(S), np.log10(V)
    nodes = slice(None, None, n_sub)
    # interval value: the sub-node nearest the interval midpoint from the right
    mid_idx = np.arange(mesh.n_intervals) * n_sub + max(n_sub // 2, 1)
    return InterpolatedData(
        mesh, n_sub, PiecewiseFn(mesh, S[mid_idx]), PiecewiseFn(mesh, V[mid_idx]),
        lS[1:], lV[1:], lS[nodes], lV[nodes])


@dataclass(frozen=True)
class TwinSpec:
    e_true: PiecewiseFn = field(repr=False)
    noise_sigma1: float = 0.0
    noise_sigma2: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.noise_sigma1 < 0 or self.noise_sigma2 < 0:
            raise InvalidArgument("noise levels must be non-negative")


def make_twin(model, d_fn: PiecewiseFn, spec: TwinSpec, mesh: TimeMesh, x0,
              n_sub: int | None = None, newton=None, floor: float = LOG_FLOOR):
    """Synthetic observations from E*: multiplicative uniform noise, seeded.

    Returns (InterpolatedData, e_true on ``mesh``).
    """
    from .forward import DEFAULT_N_SUB, NewtonConfig, solve_forward
    from .mesh import transfer

    e_true = transfer(spec.e_true, mesh) if not spec.e_true.mesh.same_as(mesh) else spec.e_true
    d_fn = transfer(d_fn, mesh) if not d_fn.mesh.same_as(mesh) else d_fn
    n_sub = DEFAULT_N_SUB if n_sub is None else n_sub
    traj = solve_forward(e_true, d_fn, x0, mesh, model, newton or NewtonConfig(), n_sub)
    X = traj.fine.copy()
    if spec.noise_sigma1 > 0 or spec.noise_sigma2 > 0:
        rng = np.random.default_rng(spec.rng_seed)
        eta1 = rng.uniform(-spec.noise_sigma1, spec.noise_sigma1, X.shape[0])
        eta2 = rng.uniform(-spec.noise_sigma2, spec.noise_sigma2, X.shape[0])
        # scale both T-cell compartments so the observed sum carries eta1
        X[:, 0] *= 1.0 + eta1
        X[:, 1] *= 1.0 + eta1
        X[:, 2] *= 1.0 + eta2
        X = np.maximum(X, 0.0)
    return data_from_states(mesh, X, n_sub, floor), e_true
