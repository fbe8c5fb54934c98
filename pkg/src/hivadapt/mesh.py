"""Time meshes and piecewise-constant functions on them.

A mesh is an ordered set of nodes ``0 = t_0 < ... < t_N = T``; interval
``k`` is ``(t_k, t_{k+1}]`` in zero-based indexing.  A ``PiecewiseFn``
carries one value per interval.  Both are immutable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

_SPAN_RTOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeMesh:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgument("a mesh needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgument("mesh nodes must be finite")
        if nodes[0] != 0.0:
            raise InvalidArgument(f"first node must be exactly 0, got {nodes[0]!r}")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidArgument("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_intervals(self) -> int:
        return self.nodes.size - 1

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def t_end(self) -> float:
        return float(self.nodes[-1])

    @property
    def tau(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[1:] + self.nodes[:-1])

    def locate(self, t) -> np.ndarray:
        """Interval index containing ``t`` (intervals are left-open; t=0 maps to 0)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.nodes, t, side="left") - 1
        return np.clip(idx, 0, self.n_intervals - 1)

    def subdivide(self, n_sub: int) -> np.ndarray:
        """Nodes of the uniform ``n_sub``-fold sub-grid of every interval."""
        if n_sub < 1:
            raise InvalidArgument("n_sub must be >= 1")
        frac = np.arange(n_sub) / n_sub
        inner = self.nodes[:-1, None] + frac[None, :] * self.tau[:, None]
        return np.append(inner.ravel(), self.nodes[-1])

    def same_as(self, other: "TimeMesh") -> bool:
        return self.nodes.shape == other.nodes.shape and bool(np.all(self.nodes == other.nodes))

    def contains_nodes_of(self, other: "TimeMesh") -> bool:
        return bool(np.all(np.isin(other.nodes, self.nodes)))

    def __len__(self):
        return self.n_intervals

    def __repr__(self):
        return f"TimeMesh(n_nodes={self.n_nodes}, t_end={self.t_end:g})"


@dataclass(frozen=True, eq=False)
class PiecewiseFn:
    mesh: TimeMesh
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim == 0:
            v = _frozen(np.full(self.mesh.n_intervals, float(v)))
        if v.shape != (self.mesh.n_intervals,):
            raise InvalidArgument(
                f"expected {self.mesh.n_intervals} interval values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, mesh: TimeMesh, value: float) -> "PiecewiseFn":
        return cls(mesh, np.full(mesh.n_intervals, float(value)))

    @classmethod
    def from_callable(cls, mesh: TimeMesh, fn) -> "PiecewiseFn":
        """Sample ``fn`` at interval midpoints."""
        return cls(mesh, np.asarray(fn(mesh.midpoints), dtype=float))

    def __call__(self, t):
        return self.values[self.mesh.locate(t)]

    def with_values(self, values) -> "PiecewiseFn":
        return PiecewiseFn(self.mesh, values)

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"PiecewiseFn(n={self.values.size}, min={self.values.min():.4g}, max={self.values.max():.4g})"


def uniform_mesh(t_end: float, step: float) -> TimeMesh:
    if not (t_end > 0 and step > 0):
        raise InvalidArgument("t_end and step must be positive")
    n = t_end / step
    nr = round(n)
    if nr < 1 or abs(n - nr) > _SPAN_RTOL * max(1.0, n):
        raise InvalidArgument(f"t_end={t_end} is not an integer multiple of step={step}")
    nodes = np.arange(nr + 1) * step
    nodes[-1] = t_end
    return TimeMesh(nodes)


def jumps(f: PiecewiseFn) -> np.ndarray:
    """Successor minus predecessor value at every interior node."""
    return np.diff(f.values)


def refine_where(mesh: TimeMesh, indicator, beta: float) -> TimeMesh:
    """Bisect every interval whose |indicator| reaches beta times the maximum."""
    if not (0.0 < beta < 1.0):
        raise InvalidArgument("beta must lie in (0, 1)")
    vals = indicator.values if isinstance(indicator, PiecewiseFn) else np.asarray(indicator, float)
    if vals.shape != (mesh.n_intervals,):
        raise InvalidArgument("indicator does not live on this mesh")
    a = np.abs(vals)
    amax = a.max()
    if not np.isfinite(amax):
        raise InvalidArgument("indicator contains non-finite values")
    if amax == 0.0:
        return mesh
    flag = a >= beta * amax
    mids = mesh.midpoints[flag]
    return TimeMesh(np.sort(np.concatenate([mesh.nodes, mids])))


def refined_intervals(mesh: TimeMesh, indicator, beta: float) -> np.ndarray:
    vals = indicator.values if isinstance(indicator, PiecewiseFn) else np.asarray(indicator, float)
    a = np.abs(vals)
    if a.max() == 0.0:
        return np.zeros(0, dtype=int)
    return np.flatnonzero(a >= beta * a.max())


def transfer(f: PiecewiseFn, target: TimeMesh) -> PiecewiseFn:
    """Midpoint sampling of ``f`` on ``target``; exact for nested meshes."""
    if not np.isclose(f.mesh.t_end, target.t_end, rtol=_SPAN_RTOL, atol=0.0):
        raise InvalidArgument(
            f"span mismatch: {f.mesh.t_end} vs {target.t_end}")
    return PiecewiseFn(target, f(target.midpoints))


def l2_norm(f: PiecewiseFn) -> float:
    """Mesh-weighted L2 norm sqrt(sum tau_k f_k^2)."""
    return float(np.sqrt(np.sum(f.mesh.tau * f.values ** 2)))


def weighted_l2(values, mesh: TimeMesh) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.sqrt(np.sum(mesh.tau * v ** 2)))


def inner(f, g, mesh: TimeMesh) -> float:
    return float(np.sum(mesh.tau * np.asarray(f) * np.asarray(g)))
