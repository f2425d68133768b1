"""Integer stratum arithmetic and the two rank certificates.

All dimension counts here are exact integers. The rank certificates build
the block matrices whose full rank makes the evaluation maps submersions
(``assemble_M1`` for the corank strata, ``assemble_M2`` for the diagonals),
so they can be checked numerically at sampled points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from ._rng import rng_for
from .calculus import DEFAULT_RANK_TOL_SCALE, SmoothMap, numerical_rank
from .errors import ArgumentError, ShapeError
from .geometry import ChartedManifold, chart_local


def _nu(n: int, l: int) -> int:
    return min(n, l)


def codim_sigma_k(n: int, l: int, k: int) -> int:
    """Codimension ``(n - nu + k)(l - nu + k)`` of the corank-``k`` stratum."""
    nu = _nu(n, l)
    if not 1 <= k <= nu:
        raise ArgumentError(f"corank k={k} outside 1..{nu}")
    return (n - nu + k) * (l - nu + k)


def codim_delta_s(l: int, s: int) -> int:
    """Codimension ``l(s - 1)`` of the diagonal in ``(R^l)^s``."""
    if s < 2:
        raise ArgumentError(f"diagonal needs s >= 2, got {s}")
    return l * (s - 1)


def k0_max_corank(n: int, l: int) -> int:
    """Largest corank whose stratum a generic composite can meet: ``codim <= n``."""
    if n < 1 or l < 1:
        raise ArgumentError("n and l must be positive")
    if l == 1:
        return 1
    best = 1
    for k in range(1, _nu(n, l) + 1):
        if codim_sigma_k(n, l, k) <= n:
            best = k
    return best


def s0_threshold(n: int, l: int, s_f: int) -> int:
    if s_f < 2:
        raise ArgumentError(f"s_f must be >= 2, got {s_f}")
    return max(s * (n - l) + l for s in range(2, s_f + 1))


def r_threshold_thm1(n: int, l: int, k: int) -> int:
    return max(n - codim_sigma_k(n, l, k), 0) + 1


def r_threshold_thm2(n: int, l: int, s_f: int) -> int:
    return max(s0_threshold(n, l, s_f), 0)


def nc_regime(n: int, l: int, s_f: int) -> bool:
    """``(s_f - 1) l > n s_f``: generic composites miss the ``s_f``-fold diagonal."""
    return (s_f - 1) * l > n * s_f


@dataclass(frozen=True)
class StrataProfile:
    n: int
    m: int
    l: int
    nu: int
    codim_sigma: List[int]
    k0: int
    predicates: dict
    r_threshold_thm1: List[int]
    s_f: Optional[int] = None
    s0: Optional[int] = None
    r_threshold_thm2: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "l": self.l,
            "nu": self.nu,
            "codim_sigma": list(self.codim_sigma),
            "k0": self.k0,
            "s0": self.s0,
            "s_f": self.s_f,
            "predicates": dict(self.predicates),
            "r_thresholds": {"thm1": list(self.r_threshold_thm1), "thm2": self.r_threshold_thm2},
        }


def strata_profile(n: int, m: int, l: int, s_f: Optional[int] = None) -> StrataProfile:
    if min(n, m, l) < 1:
        raise ArgumentError("n, m, l must be positive")
    if s_f is not None and not 2 <= s_f <= m + 1:
        raise ArgumentError(f"s_f must satisfy 2 <= s_f <= m + 1 = {m + 1}")
    nu = _nu(n, l)
    ks = range(1, nu + 1)
    predicates = {
        "morse_applicable": l == 1,
        "immersion_regime": l >= 2 * n,
        "injection_regime": l > 2 * n,
        "nc_regime": None if s_f is None else nc_regime(n, l, s_f),
    }
    return StrataProfile(
        n=n,
        m=m,
        l=l,
        nu=nu,
        codim_sigma=[codim_sigma_k(n, l, k) for k in ks],
        k0=k0_max_corank(n, l),
        predicates=predicates,
        r_threshold_thm1=[r_threshold_thm1(n, l, k) for k in ks],
        s_f=s_f,
        s0=None if s_f is None else s0_threshold(n, l, s_f),
        r_threshold_thm2=None if s_f is None else r_threshold_thm2(n, l, s_f),
    )


def regularity_ok(profile: StrataProfile, r: int, theorem: str, k: Optional[int] = None, s_f: Optional[int] = None) -> bool:
    """Strict regularity inequality for the corank (``thm1``) or multiple-point (``thm2``) bound.

    ``theorem="thm1"`` checks ``r > max(n - codim Sigma^k, 0) + 1``;
    ``theorem="thm2"`` checks ``r > max(s0, 0)`` for ``s_f`` (defaulting to
    the profile's).
    """
    if theorem == "thm1":
        if k is None:
            raise ArgumentError("thm1 needs a corank k")
        return r > r_threshold_thm1(profile.n, profile.l, k)
    if theorem == "thm2":
        s_f = profile.s_f if s_f is None else s_f
        if s_f is None:
            raise ArgumentError("thm2 needs s_f")
        return r > r_threshold_thm2(profile.n, profile.l, s_f)
    raise ArgumentError(f"unknown theorem {theorem!r}; use 'thm1' or 'thm2'")


# -- rank certificates ---------------------------------------------------------


def assemble_M1(Jf, n: int, l: int) -> np.ndarray:
    """``[[E_{n+l}, *], [0, diag_l(Jf^T)]]`` with the ``*`` block zero-filled.

    ``Jf`` is the ``m x n`` chart Jacobian of ``f``. The result has shape
    ``(n + l + n l) x (n + l + m l)``; the unspecified block does not affect
    the rank, which is ``n + l + n l`` exactly when ``rank Jf = n``.
    """
    Jf = np.atleast_2d(np.asarray(Jf, dtype=float))
    if Jf.shape[1] != n:
        raise ShapeError(f"Jf must have n = {n} columns, got shape {Jf.shape}")
    if l < 1:
        raise ShapeError("l must be positive")
    m = Jf.shape[0]
    M = np.zeros((n + l + n * l, n + l + m * l))
    M[: n + l, : n + l] = np.eye(n + l)
    M[n + l :, n + l :] = np.kron(np.eye(l), Jf.T)
    return M


def difference_matrix(fvals: Sequence) -> np.ndarray:
    """Rows ``f(t_i) - f(t_1)`` for ``i = 2..s``."""
    F = np.atleast_2d(np.asarray(fvals, dtype=float))
    return F[1:] - F[0]


def assemble_M2(fvals: Sequence, l: int) -> np.ndarray:
    """Block rows ``[E_l | B(t_i)]``, ``B(t_i) = diag_l(f(t_i))``; shape ``(l s) x (l + m l)``."""
    try:
        F = np.array([np.asarray(v, dtype=float).reshape(-1) for v in fvals])
    except ValueError as exc:
        raise ShapeError("point values have inconsistent lengths") from exc
    if F.ndim != 2:
        raise ShapeError("point values have inconsistent lengths")
    s, m = F.shape
    if s < 2:
        raise ArgumentError("M2 needs s >= 2 points")
    if l < 1:
        raise ShapeError("l must be positive")
    eye = np.eye(l)
    blocks = [np.hstack([eye, np.kron(eye, F[i][None, :])]) for i in range(s)]
    return np.vstack(blocks)


# -- s_f estimation ------------------------------------------------------------


@dataclass(frozen=True)
class SfEstimate:
    """Sampled surrogate for ``s_f``.

    ``estimate`` is the largest level at which every sampled tuple had
    difference vectors in general position. It is not a proof: a witness
    certifies ``s_f < witness level``, passing levels are only sampled.
    """

    estimate: int
    witness: Optional[dict]
    samples_per_level: int
    levels: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "s_f": self.estimate,
            "witness": self.witness,
            "samples_per_level": self.samples_per_level,
            "levels": self.levels,
        }


def estimate_sf(
    f: SmoothMap,
    man: ChartedManifold,
    samples: int,
    seed: int,
    tol_scale: float = DEFAULT_RANK_TOL_SCALE,
) -> SfEstimate:
    """Estimate ``s_f`` for an injection ``f`` by sampling ``s``-tuples.

    Levels ``s = 2, ..., m + 2`` are tried in order; the first tuple whose
    difference matrix has rank below ``s - 1`` ends the search.
    """
    m = f.codomain_dim
    if samples < 10 * (m + 1):
        raise ArgumentError(f"need at least {10 * (m + 1)} samples per level, got {samples}")
    locals_ = {c.chart_id: chart_local(f, c) for c in man.charts}
    n = man.dim_n
    levels = []
    for s in range(2, m + 3):
        rng = rng_for(seed, "estimate_sf", s)
        drawn = 0
        min_ratio = np.inf
        while drawn < samples:
            cids = rng.integers(len(man.charts), size=s)
            u = rng.random((s, n))
            pts, model, vals = [], [], []
            for ci, ui in zip(cids, u):
                chart = man.charts[ci]
                inner = chart.interior
                t = np.asarray(inner.lower) + ui * (np.asarray(inner.upper) - np.asarray(inner.lower))
                pts.append((chart.chart_id, t))
                model.append(chart.point(t))
                vals.append(locals_[chart.chart_id](t))
            if _has_repeat(model):
                continue
            drawn += 1
            rep = numerical_rank(difference_matrix(vals), tol_scale)
            sv = rep.singular_values
            if sv[0] > 0:
                min_ratio = min(min_ratio, sv[-1] / sv[0])
            if rep.rank < s - 1:
                witness = {
                    "level": s,
                    "points": [{"chart": c, "t": t.tolist()} for c, t in pts],
                    "rank": rep.rank,
                    "required": s - 1,
                    "singular_values": list(rep.singular_values),
                }
                levels.append({"s": s, "tuples": drawn, "passed": False})
                return SfEstimate(s - 1, witness, samples, levels)
        levels.append({"s": s, "tuples": drawn, "passed": True, "min_sv_ratio": float(min_ratio)})
    # m + 2 points in R^m always give a witness
    raise AssertionError("no witness at level m + 2")


def _has_repeat(points, radius: float = 1e-12) -> bool:
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if np.linalg.norm(points[i] - points[j]) <= radius:
                return True
    return False
