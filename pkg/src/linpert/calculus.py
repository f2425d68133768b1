"""Forward-mode derivatives, a finite-difference oracle and numerical rank.

Maps are written once as plain Python functions over a list of numbers. At
order 0 they receive floats; at order 1 and 2 they receive :class:`Jet`
objects carrying a gradient (and Hessian) with respect to every input, so a
single pass yields value, Jacobian and Hessian stack. Because the value slot
of a jet is computed by exactly the same float operations as the order-0
path, the two agree bitwise.

Elementary functions (:func:`sin`, :func:`cos`, ...) dispatch on the argument
type, so map bodies should use them instead of :mod:`math`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, RegularityError, ShapeError

EPS = np.finfo(float).eps
DEFAULT_RANK_TOL_SCALE = 1e3


class Jet:
    """Truncated second-order Taylor expansion in ``n`` variables.

    ``h`` is ``None`` for first-order (dual number) arithmetic.
    """

    __slots__ = ("v", "g", "h")
    __array_ufunc__ = None  # make numpy scalars defer to our reflected operators

    def __init__(self, v, g, h=None):
        self.v = v
        self.g = g
        self.h = h

    def __repr__(self):
        return f"Jet({self.v!r}, {self.g!r}, {self.h!r})"

    def _lift(self, c):
        return Jet(c, np.zeros_like(self.g), None if self.h is None else np.zeros_like(self.h))

    def _unary(self, v, d1, d2):
        h = None
        if self.h is not None:
            h = d1 * self.h + d2 * np.outer(self.g, self.g)
        return Jet(v, d1 * self.g, h)

    def __add__(self, other):
        if isinstance(other, Jet):
            h = None if self.h is None else self.h + other.h
            return Jet(self.v + other.v, self.g + other.g, h)
        return Jet(self.v + other, self.g, self.h)

    def __radd__(self, other):
        return Jet(other + self.v, self.g, self.h)

    def __neg__(self):
        return Jet(-self.v, -self.g, None if self.h is None else -self.h)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Jet):
            h = None if self.h is None else self.h - other.h
            return Jet(self.v - other.v, self.g - other.g, h)
        return Jet(self.v - other, self.g, self.h)

    def __rsub__(self, other):
        return Jet(other - self.v, -self.g, None if self.h is None else -self.h)

    def __mul__(self, other):
        if isinstance(other, Jet):
            g = self.v * other.g + other.v * self.g
            h = None
            if self.h is not None:
                cross = np.outer(self.g, other.g)
                h = self.v * other.h + other.v * self.h + cross + cross.T
            return Jet(self.v * other.v, g, h)
        return Jet(self.v * other, other * self.g, None if self.h is None else other * self.h)

    def __rmul__(self, other):
        return Jet(other * self.v, other * self.g, None if self.h is None else other * self.h)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v / other, self.g / other, None if self.h is None else self.h / other)
        q = self.v / other.v
        g = (self.g - q * other.g) / other.v
        h = None
        if self.h is not None:
            cross = np.outer(g, other.g)
            h = (self.h - q * other.h - cross - cross.T) / other.v
        return Jet(q, g, h)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        if p == 0:
            return self._lift(self.v**0)
        if p == 1:
            return Jet(self.v**1, self.g, self.h)
        return self._unary(self.v**p, p * self.v ** (p - 1), p * (p - 1) * self.v ** (p - 2))

    def __rpow__(self, base):
        return exp(self * math.log(base))


def _dispatch(x, fn, d1, d2):
    if isinstance(x, Jet):
        v = fn(x.v)
        return x._unary(v, d1(x.v, v), d2(x.v, v))
    return fn(x)


def sin(x):
    return _dispatch(x, math.sin, lambda a, v: math.cos(a), lambda a, v: -v)


def cos(x):
    return _dispatch(x, math.cos, lambda a, v: -math.sin(a), lambda a, v: -v)


def exp(x):
    return _dispatch(x, math.exp, lambda a, v: v, lambda a, v: v)


def log(x):
    return _dispatch(x, math.log, lambda a, v: 1.0 / a, lambda a, v: -1.0 / (a * a))


def sqrt(x):
    return _dispatch(x, math.sqrt, lambda a, v: 0.5 / v, lambda a, v: -0.25 / (v * a))


def tanh(x):
    return _dispatch(x, math.tanh, lambda a, v: 1.0 - v * v, lambda a, v: -2.0 * v * (1.0 - v * v))


@dataclass(frozen=True)
class SmoothMap:
    """A map ``R^domain_dim -> R^codomain_dim`` of declared class ``C^order_r``.

    ``func`` takes a list of ``domain_dim`` numbers (floats or jets) and
    returns a sequence of ``codomain_dim`` numbers. ``domain`` is an optional
    union of open boxes (any objects with a ``contains`` method); ``None``
    means all of ``R^domain_dim``.
    """

    func: Callable[[list], Sequence]
    domain_dim: int
    codomain_dim: int
    order_r: int = 2
    domain: Optional[tuple] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.domain_dim < 1 or self.codomain_dim < 1:
            raise ShapeError("map dimensions must be positive")
        if self.order_r < 1:
            raise RegularityError("declared differentiability order must be >= 1")

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.domain_dim:
            raise ShapeError(f"{self.name or 'map'} expects {self.domain_dim} inputs, got {x.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise DomainError(f"non-finite input {x.tolist()} to {self.name or 'map'}")
        if self.domain is not None and not any(box.contains(x) for box in self.domain):
            raise DomainError(f"point {x.tolist()} lies outside the domain of {self.name or 'map'}")
        return x

    def __call__(self, x) -> np.ndarray:
        return self.eval(x, 0)

    def eval(self, x, order: int = 0):
        """Value (order 0), ``(value, jac)`` (1) or ``(value, jac, hess)`` (2)."""
        if order < 0 or order > min(self.order_r, 2):
            raise RegularityError(
                f"order-{order} derivative requested from a C^{self.order_r} map "
                f"(at most order {min(self.order_r, 2)} available)"
            )
        x = self.check_point(x)
        n = self.domain_dim
        if order == 0:
            out = self.func([float(v) for v in x])
            value = np.array([float(o) for o in out], dtype=float)
            self._check_output(value, x)
            return value
        eye = np.eye(n)
        if order == 1:
            args = [Jet(float(x[j]), eye[j].copy()) for j in range(n)]
        else:
            args = [Jet(float(x[j]), eye[j].copy(), np.zeros((n, n))) for j in range(n)]
        out = self.func(args)
        if len(out) != self.codomain_dim:
            raise ShapeError(f"{self.name or 'map'} returned {len(out)} components, declared {self.codomain_dim}")
        value = np.empty(self.codomain_dim)
        jac = np.zeros((self.codomain_dim, n))
        hess = np.zeros((self.codomain_dim, n, n)) if order == 2 else None
        for i, o in enumerate(out):
            if isinstance(o, Jet):
                value[i] = o.v
                jac[i] = o.g
                if hess is not None:
                    hess[i] = o.h
            else:
                value[i] = float(o)
        self._check_output(value, x)
        if not (np.all(np.isfinite(jac)) and (hess is None or np.all(np.isfinite(hess)))):
            raise DomainError(f"non-finite derivative of {self.name or 'map'} at {x.tolist()}")
        if order == 1:
            return value, jac
        return value, jac, hess

    def _check_output(self, value, x):
        if value.shape[0] != self.codomain_dim:
            raise ShapeError(f"{self.name or 'map'} returned {value.shape[0]} components, declared {self.codomain_dim}")
        if not np.all(np.isfinite(value)):
            raise DomainError(f"non-finite value of {self.name or 'map'} at {x.tolist()}")


def value_of(x) -> float:
    """Float value of a number or jet."""
    return x.v if isinstance(x, Jet) else float(x)


def compose(outer: SmoothMap, inner: SmoothMap, name: str = "") -> SmoothMap:
    """``outer o inner``; derivatives follow from jets flowing through both bodies.

    Domain violations of ``outer`` raise :class:`DomainError` naming the
    inner input that caused them.
    """
    if inner.codomain_dim != outer.domain_dim:
        raise ShapeError(
            f"cannot compose {outer.name or 'map'} (R^{outer.domain_dim}) after "
            f"{inner.name or 'map'} (into R^{inner.codomain_dim})"
        )
    outer_func, inner_func, boxes = outer.func, inner.func, outer.domain

    def func(t):
        y = inner_func(t)
        if boxes is not None:
            yv = np.array([value_of(c) for c in y])
            if not any(box.contains(yv) for box in boxes):
                tv = [value_of(c) for c in t]
                raise DomainError(f"image {yv.tolist()} of t={tv} leaves the domain of {outer.name or 'map'}")
        return outer_func(list(y))

    return SmoothMap(
        func,
        inner.domain_dim,
        outer.codomain_dim,
        min(outer.order_r, inner.order_r),
        inner.domain,
        name or f"{outer.name}∘{inner.name}",
    )


def jacobian(fmap: SmoothMap, x) -> np.ndarray:
    """Codomain x domain matrix of first partials by dual arithmetic."""
    return fmap.eval(x, 1)[1]


def hessian_stack(fmap: SmoothMap, x) -> np.ndarray:
    """One symmetrised Hessian per output component, shape ``(l, n, n)``."""
    if fmap.order_r < 2:
        raise RegularityError(f"Hessian requested from a C^{fmap.order_r} map")
    hess = fmap.eval(x, 2)[2]
    return 0.5 * (hess + np.swapaxes(hess, 1, 2))


def _steps(x, power):
    return EPS**power * np.maximum(1.0, np.abs(x))


def fd_jacobian(fmap: SmoothMap, x) -> np.ndarray:
    """Central-difference Jacobian, independent of the jet machinery."""
    x = fmap.check_point(x)
    h = _steps(x, 1.0 / 3.0)
    cols = []
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h[j]
        cols.append((fmap(x + e) - fmap(x - e)) / (2.0 * h[j]))
    return np.stack(cols, axis=1)


def fd_hessian_stack(fmap: SmoothMap, x) -> np.ndarray:
    """Second-order central differences of values, shape ``(l, n, n)``."""
    x = fmap.check_point(x)
    n = x.shape[0]
    h = _steps(x, 1.0 / 3.0)
    f0 = fmap(x)
    out = np.zeros((fmap.codomain_dim, n, n))

    def at(di, dj):
        e = np.zeros(n)
        e[di[0]] += di[1]
        e[dj[0]] += dj[1]
        return fmap(x + e)

    for i in range(n):
        out[:, i, i] = (at((i, h[i]), (i, 0.0)) - 2.0 * f0 + at((i, -h[i]), (i, 0.0))) / h[i] ** 2
        for j in range(i + 1, n):
            val = (
                at((i, h[i]), (j, h[j]))
                - at((i, h[i]), (j, -h[j]))
                - at((i, -h[i]), (j, h[j]))
                + at((i, -h[i]), (j, -h[j]))
            ) / (4.0 * h[i] * h[j])
            out[:, i, j] = out[:, j, i] = val
    return out


def relative_error(a, b) -> float:
    """Frobenius error of ``a`` against reference ``b``, relative to ``max(1, |b|)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b)))


@dataclass(frozen=True)
class JetPoint:
    """Local 1-jet of a map at a chart point: ``(t, g(t), Jg(t))``."""

    chart_id: str
    t: np.ndarray
    value: np.ndarray
    jac: np.ndarray

    def __post_init__(self):
        if self.jac.shape != (self.value.shape[0], self.t.shape[0]):
            raise ShapeError(f"jet Jacobian has shape {self.jac.shape}, expected {(self.value.shape[0], self.t.shape[0])}")
        if not (np.all(np.isfinite(self.value)) and np.all(np.isfinite(self.jac))):
            raise DomainError("jet has non-finite entries")


def one_jet(fmap: SmoothMap, chart_id: str, t) -> JetPoint:
    value, jac = fmap.eval(t, 1)
    return JetPoint(chart_id, np.asarray(t, dtype=float).copy(), value, jac)


@dataclass(frozen=True)
class RankReport:
    singular_values: tuple
    rank: int
    corank: int
    tol_used: float


def numerical_rank(M, tol_scale: float = DEFAULT_RANK_TOL_SCALE, atol: float = 0.0) -> RankReport:
    """Rank of ``M`` counting singular values above a scaled threshold.

    The threshold is ``tol_scale * max(rows, cols) * sigma_max * eps``, or
    ``tol_scale * eps`` for the zero matrix. ``atol`` raises it to an
    absolute floor, which Jacobian rank decisions need (a lone nonzero
    singular value is never small relative to itself).
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    if M.size == 0:
        return RankReport((), 0, 0, max(tol_scale * EPS, atol))
    sv = np.linalg.svd(M, compute_uv=False)
    smax = float(sv[0]) if sv.size else 0.0
    if smax == 0.0:
        tol = tol_scale * EPS
    else:
        tol = tol_scale * max(rows, cols) * smax * EPS
    tol = max(tol, atol)
    rank = int(np.count_nonzero(sv > tol))
    return RankReport(tuple(float(s) for s in sv), rank, min(rows, cols) - rank, float(tol))
