"""Chart-presented manifolds, interior sampling, and the built-in catalogs.

A manifold is never represented by abstract points, only by ``(chart_id, t)``
pairs. Each chart's ``param`` sends ``t`` to a canonical point of ``N`` in a
model space ``R^p`` (for the circle, the unit circle in ``R^2``). The map
``f: N -> R^m`` is then a :class:`SmoothMap` on the model space, and the
chart-local map is ``f o param``. Distances in the model space decide when
two chart points are the same point of ``N``; charts are never glued.

Domains are finite unions of open axis-aligned boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ._rng import rng_for
from .calculus import SmoothMap, compose, cos, sin
from .errors import ArgumentError, CatalogError, ShapeError

DEFAULT_MARGIN = 1e-3


@dataclass(frozen=True)
class Box:
    """Open box ``prod_i (lower_i, upper_i)``."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ShapeError("box bounds must be nonempty and of equal length")
        if any(not (hi > lo) for lo, hi in zip(self.lower, self.upper)):
            raise ArgumentError(f"empty box {self.lower} x {self.upper}")

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lower) and np.all(x < self.upper))

    def shrunk(self, margin: float) -> "Box":
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        pad = margin * (hi - lo)
        return Box(tuple((lo + pad).tolist()), tuple((hi - pad).tolist()))


def box(*intervals) -> Box:
    """``box((a, b), (c, d))`` is ``(a, b) x (c, d)``."""
    return Box(tuple(float(a) for a, _ in intervals), tuple(float(b) for _, b in intervals))


@dataclass(frozen=True)
class Chart:
    chart_id: str
    domain: Box
    param: SmoothMap
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if self.param.domain_dim != self.domain.dim:
            raise ShapeError(f"chart {self.chart_id}: param takes {self.param.domain_dim} inputs, box is {self.domain.dim}-dimensional")
        if not 0 < self.margin < 0.5:
            raise ArgumentError("chart margin must lie in (0, 1/2)")

    @property
    def interior(self) -> Box:
        return self.domain.shrunk(self.margin)

    def point(self, t) -> np.ndarray:
        """Canonical model-space point of ``N`` at chart coordinates ``t``."""
        return self.param(t)


@dataclass(frozen=True)
class ChartedManifold:
    dim_n: int
    charts: Tuple[Chart, ...]
    compact: bool
    name: str

    def __post_init__(self):
        if self.dim_n < 1:
            raise ArgumentError("manifold dimension must be positive")
        if not self.charts:
            raise ArgumentError(f"{self.name}: at least one chart required")
        model = {c.param.codomain_dim for c in self.charts}
        if len(model) != 1:
            raise ShapeError(f"{self.name}: charts map into model spaces of different dimension")
        for c in self.charts:
            if c.domain.dim != self.dim_n:
                raise ShapeError(f"{self.name}: chart {c.chart_id} is not {self.dim_n}-dimensional")
        ids = [c.chart_id for c in self.charts]
        if len(set(ids)) != len(ids):
            raise ArgumentError(f"{self.name}: duplicate chart ids")

    @property
    def model_dim(self) -> int:
        return self.charts[0].param.codomain_dim

    def chart(self, chart_id: str) -> Chart:
        for c in self.charts:
            if c.chart_id == chart_id:
                return c
        raise KeyError(chart_id)

    def point(self, chart_id: str, t) -> np.ndarray:
        return self.chart(chart_id).point(t)


def sample_points(man: ChartedManifold, count: int, seed: int) -> List[Tuple[str, np.ndarray]]:
    """Uniform interior points, charts taken round-robin.

    The first ``k`` points of a call with ``count >= k`` equal the points of
    the call with ``count = k``.
    """
    if count < 1:
        raise ArgumentError("count must be >= 1")
    u = rng_for(seed, "sample_points").random((count, man.dim_n))
    out = []
    for i in range(count):
        chart = man.charts[i % len(man.charts)]
        inner = chart.interior
        lo = np.asarray(inner.lower)
        hi = np.asarray(inner.upper)
        out.append((chart.chart_id, lo + u[i] * (hi - lo)))
    return out


def chart_local(f: SmoothMap, chart: Chart) -> SmoothMap:
    """``f o param`` on one chart."""
    return compose(f, chart.param, name=f"{f.name}@{chart.chart_id}")


# -- manifold catalog ---------------------------------------------------------


def _stereographic(n: int, from_north: bool, half_width: float = 2.0) -> Tuple[Box, SmoothMap]:
    sign = 1.0 if from_north else -1.0

    def func(t):
        s = t[0] * t[0]
        for c in t[1:]:
            s = s + c * c
        d = 1.0 + s
        return [2.0 * c / d for c in t] + [sign * (s - 1.0) / d]

    name = "stereo_north" if from_north else "stereo_south"
    return box(*[(-half_width, half_width)] * n), SmoothMap(func, n, n + 1, 2, name=name)


def _sphere_charts(n: int) -> Tuple[Chart, ...]:
    charts = []
    for cid, north in (("north", True), ("south", False)):
        dom, param = _stereographic(n, north)
        charts.append(Chart(cid, dom, param))
    return tuple(charts)


_ANGLE_RANGES = ((-0.3, math.pi + 0.3), (math.pi - 0.3, 2.0 * math.pi + 0.3))


def _angle_circle_charts() -> Tuple[Chart, ...]:
    param = SmoothMap(lambda t: [cos(t[0]), sin(t[0])], 1, 2, 2, name="angle")
    return tuple(Chart(f"arc{i}", box(r), param) for i, r in enumerate(_ANGLE_RANGES))


def _torus_charts(R: float = 2.0, r: float = 1.0) -> Tuple[Chart, ...]:
    def func(t):
        ring = R + r * cos(t[1])
        return [ring * cos(t[0]), ring * sin(t[0]), r * sin(t[1])]

    param = SmoothMap(func, 2, 3, 2, name="torus_angles")
    return tuple(
        Chart(f"patch{i}{j}", box(a, b), param)
        for i, a in enumerate(_ANGLE_RANGES)
        for j, b in enumerate(_ANGLE_RANGES)
    )


def _unit_interval() -> Tuple[Chart, ...]:
    return (Chart("unit", box((0.0, 1.0)), SmoothMap(lambda t: [t[0]], 1, 1, 2, name="id")),)


def _identity(m: int) -> SmoothMap:
    return SmoothMap(lambda x: list(x), m, m, 2, name="inclusion")


@dataclass(frozen=True)
class CatalogEntry:
    description: str
    immersion: bool
    injection: bool


CATALOG: Dict[str, CatalogEntry] = {
    "circle_in_R2": CatalogEntry("unit circle, two stereographic charts, f = inclusion into R^2", True, True),
    "circle_in_R3": CatalogEntry("unit circle, f(x, y) = (x, y, 0)", True, True),
    "sphere2_in_R3": CatalogEntry("unit 2-sphere, two stereographic charts, f = inclusion into R^3", True, True),
    "torus_in_R3": CatalogEntry("torus of radii 2 and 1, four angle charts, f = inclusion into R^3", True, True),
    "moment_curve_in_R3": CatalogEntry("N = (0, 1), f(t) = (t, t^2, t^3)", True, True),
    "interval_in_R1": CatalogEntry("N = (0, 1), f(t) = t", True, True),
    "figure_eight_immersion_R2": CatalogEntry(
        "circle, f(cos s, sin s) = (sin s, sin s cos s): immersion with one transverse double point", True, False
    ),
}


def builtin(name: str) -> Tuple[ChartedManifold, SmoothMap]:
    """Return ``(N, f)`` for a catalog entry; ``f`` acts on the model space."""
    if name == "circle_in_R2":
        return ChartedManifold(1, _sphere_charts(1), True, name), _identity(2)
    if name == "circle_in_R3":
        f = SmoothMap(lambda x: [x[0], x[1], 0.0], 2, 3, 2, name="inclusion")
        return ChartedManifold(1, _sphere_charts(1), True, name), f
    if name == "sphere2_in_R3":
        return ChartedManifold(2, _sphere_charts(2), True, name), _identity(3)
    if name == "torus_in_R3":
        return ChartedManifold(2, _torus_charts(), True, name), _identity(3)
    if name == "moment_curve_in_R3":
        f = SmoothMap(lambda x: [x[0], x[0] ** 2, x[0] ** 3], 1, 3, 2, name="moment")
        return ChartedManifold(1, _unit_interval(), False, name), f
    if name == "interval_in_R1":
        return ChartedManifold(1, _unit_interval(), False, name), _identity(1)
    if name == "figure_eight_immersion_R2":
        f = SmoothMap(lambda x: [x[1], x[0] * x[1]], 2, 2, 2, name="figure_eight")
        return ChartedManifold(1, _angle_circle_charts(), True, name), f
    raise CatalogError(f"unknown catalog entry {name!r}; valid entries: {', '.join(CATALOG)}")


# -- target maps F: R^m -> R^l --------------------------------------------------

TARGET_MAPS = {
    "height": "x -> x_m (l = 1)",
    "height_cubed": "x -> x_m^3 (l = 1)",
    "constant": "x -> 0 in R^l",
    "collapse_xy": "x -> (x_1^2 + x_2^2, 0, ..., 0) in R^l",
    "identity": "x -> x (l = m)",
    "proj_k": "x -> (x_1, ..., x_k) (l = k <= m), e.g. proj_2",
}


def default_codim(name: str, m: int):
    """Codomain dimension implied by a target-map name, or ``None`` if free."""
    if name in ("height", "height_cubed"):
        return 1
    if name == "identity":
        return m
    if name.startswith("proj_") and name[5:].isdigit():
        return int(name[5:])
    return None


def target_map(name: str, m: int, l: int | None = None) -> SmoothMap:
    """Named map ``F: R^m -> R^l`` used for reproducible experiments."""
    implied = default_codim(name, m)
    if l is None:
        if implied is None:
            raise ArgumentError(f"target map {name!r} needs an explicit codomain dimension l")
        l = implied
    if implied is not None and l != implied:
        raise ShapeError(f"target map {name!r} on R^{m} has codomain dimension {implied}, not {l}")
    if l < 1:
        raise ShapeError("l must be >= 1")
    if name == "height":
        return SmoothMap(lambda x: [x[m - 1]], m, 1, 2, name=name)
    if name == "height_cubed":
        return SmoothMap(lambda x: [x[m - 1] ** 3], m, 1, 2, name=name)
    if name == "constant":
        return SmoothMap(lambda x: [0.0] * l, m, l, 2, name=name)
    if name == "collapse_xy":
        if m < 2:
            raise ShapeError("collapse_xy needs m >= 2")
        return SmoothMap(lambda x: [x[0] * x[0] + x[1] * x[1]] + [0.0] * (l - 1), m, l, 2, name=name)
    if name == "identity":
        return _identity(m)
    if name.startswith("proj_") and name[5:].isdigit():
        if l > m:
            raise ShapeError(f"{name} needs k <= m = {m}")
        return SmoothMap(lambda x: list(x[:l]), m, l, 2, name=name)
    raise CatalogError(f"unknown target map {name!r}; valid names: {', '.join(TARGET_MAPS)}")
