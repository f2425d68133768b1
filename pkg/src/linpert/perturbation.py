"""Linear perturbations ``F_pi = F + pi`` and their chart-local composites."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ._rng import rng_for
from .calculus import SmoothMap, compose
from .errors import ArgumentError, ShapeError
from .geometry import Chart


@dataclass(frozen=True, eq=False)
class LinearPerturbation:
    """Coefficient array ``alpha`` of shape ``(l, m)``; row ``i`` perturbs ``F_i``."""

    alpha: np.ndarray
    seed_provenance: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        a = np.array(self.alpha, dtype=float, ndmin=2)
        if a.ndim != 2:
            raise ShapeError("alpha must be a matrix")
        if not np.all(np.isfinite(a)):
            raise ArgumentError("alpha has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def shape(self):
        return self.alpha.shape

    def digest(self) -> str:
        """8-byte BLAKE2 digest of the little-endian matrix bytes, hex encoded."""
        data = np.ascontiguousarray(self.alpha, dtype="<f8").tobytes()
        return hashlib.blake2b(data, digest_size=8).hexdigest()

    @classmethod
    def zero(cls, m: int, l: int) -> "LinearPerturbation":
        return cls(np.zeros((l, m)))


def sample_perturbation(m: int, l: int, scale: float, seed: int, index: int) -> LinearPerturbation:
    """I.i.d. ``N(0, scale^2)`` entries from the stream keyed on ``(seed, index)``."""
    if not scale > 0:
        raise ArgumentError("perturbation scale must be positive")
    if m < 1 or l < 1:
        raise ShapeError("m and l must be positive")
    alpha = scale * rng_for(seed, "alpha", index).standard_normal((l, m))
    return LinearPerturbation(alpha, (int(seed), int(index)))


def perturb(F: SmoothMap, p: LinearPerturbation) -> SmoothMap:
    """``x -> F(x) + alpha x``.

    The added term is linear, so Hessians of the result are those of ``F``
    and the Jacobian is ``JF + alpha``.
    """
    l, m = p.shape
    if (F.domain_dim, F.codomain_dim) != (m, l):
        raise ShapeError(f"alpha of shape {(l, m)} does not perturb a map R^{F.domain_dim} -> R^{F.codomain_dim}")
    rows = p.alpha.tolist()
    base = F.func

    def func(x):
        y = base(x)
        out = []
        for i in range(l):
            acc = y[i]
            for a, xj in zip(rows[i], x):
                if a != 0.0:
                    acc = acc + a * xj
            out.append(acc)
        return out

    return SmoothMap(func, m, l, F.order_r, F.domain, name=f"{F.name}+pi")


def compose_chartwise(F_pi: SmoothMap, f: SmoothMap, chart: Chart) -> SmoothMap:
    """Chart-local ``t -> F_pi(f(param(t)))`` on ``chart``."""
    inner = compose(f, chart.param, name=f"{f.name}@{chart.chart_id}")
    return compose(F_pi, inner, name=f"{F_pi.name}∘{f.name}@{chart.chart_id}")
