"""Property checkers for generic composites ``F_pi o f``.

Each verifier returns a :class:`VerifierVerdict`. ``pass`` means that no
counterexample was found under the recorded budgets and tolerances; it is
never a proof. Properties that fail only on measure-zero sets (a rank drop at
an isolated point, a collision of two curves) are hunted by multistart
optimisation in addition to random sampling.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.optimize import least_squares, minimize

from ._rng import derive_seed, rng_for
from .calculus import SmoothMap, numerical_rank, sqrt
from .errors import ArgumentError, ConditioningError, PredicateError
from .geometry import Chart, ChartedManifold, chart_local, sample_points
from .perturbation import compose_chartwise
from .strata import assemble_M2, k0_max_corank, nc_regime

log = logging.getLogger(__name__)

SEPARATION_WEIGHT = 1.0
_POLISH_BELOW = 1e-6
_SEP_FLOOR = 1e-24
_MAX_EVIDENCE = 8


@dataclass(frozen=True)
class Tolerances:
    """Thresholds that turn open conditions into decidable checks.

    ``hess_tol`` is relative: a Hessian ``H`` counts as degenerate when a
    quantity falls below ``hess_tol * (1 + |H|_2)``. ``crossing_floor`` is
    the singular-value floor for transversality at multiple points; it is
    ``sqrt(collision_tol)`` because a tangency is only located to within the
    square root of the residual.
    """

    newton_tol: float = 1e-10
    hess_tol: float = 1e-8
    dedup_radius: float = 1e-6
    sigma_floor: float = 1e-8
    collision_tol: float = 1e-8
    pair_floor: float = 1e-4
    crossing_floor: float = 1e-4
    rank_tol_scale: float = 1e3
    cond_limit: float = 1e12
    max_newton_iter: int = 50

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Budget:
    """Sample counts; ``starts_per_chart=None`` means ``8 n``."""

    samples: int = 256
    starts_per_chart: Optional[int] = None
    grid_density: int = 12

    def starts(self, n: int) -> int:
        return 8 * n if self.starts_per_chart is None else self.starts_per_chart

    def to_dict(self, n: int) -> dict:
        return {"samples": self.samples, "starts_per_chart": self.starts(n), "grid_density": self.grid_density}


@dataclass(frozen=True)
class CriticalPoint:
    chart_id: str
    t: np.ndarray
    grad_norm: float
    hessian_det: float
    nondegenerate: bool
    index: int
    eigenvalues: tuple = ()

    def to_dict(self) -> dict:
        return {
            "chart": self.chart_id,
            "t": self.t.tolist(),
            "grad_norm": self.grad_norm,
            "hessian_det": self.hessian_det,
            "eigenvalues": list(self.eigenvalues),
            "nondegenerate": self.nondegenerate,
            "index": self.index,
        }


@dataclass
class VerifierVerdict:
    property: str
    passed: bool
    evidence: List[dict]
    tolerances: dict
    sample_budget: dict
    seed: int
    key_metric: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "pass": self.passed,
            "key_metric": self.key_metric,
            "evidence": self.evidence,
            "tolerances": self.tolerances,
            "sample_budget": self.sample_budget,
            "seed": self.seed,
            "notes": list(self.notes),
        }


def _local_maps(F: SmoothMap, f: SmoothMap, man: ChartedManifold) -> Dict[str, SmoothMap]:
    return {c.chart_id: compose_chartwise(F, f, c) for c in man.charts}


def _regime_note(ok: bool, text: str, notes: List[str]):
    if not ok:
        msg = f"outside the generic regime ({text}); failures are expected"
        log.warning(msg)
        notes.append(msg)


def _box_arrays(chart: Chart):
    inner = chart.interior
    return np.asarray(inner.lower), np.asarray(inner.upper)


def _uniform_in(chart: Chart, rng, count: int) -> np.ndarray:
    lo, hi = _box_arrays(chart)
    return lo + rng.random((count, lo.shape[0])) * (hi - lo)


# -- critical points -----------------------------------------------------------


def _classify(H: np.ndarray, tol: Tolerances):
    eig = np.linalg.eigvalsh(H)
    thr = tol.hess_tol * (1.0 + float(np.max(np.abs(eig))))
    det = float(np.prod(eig))
    # same threshold as the Sigma^1 rank test, so the two always agree
    nondeg = float(np.min(np.abs(eig))) > thr
    return det, nondeg, int(np.count_nonzero(eig < 0)), tuple(float(e) for e in eig)


def refine_critical_point(g: SmoothMap, chart: Chart, t0, tol: Tolerances = Tolerances()) -> Optional[CriticalPoint]:
    """Newton's method on the gradient of a scalar chart-local map.

    Iteration stops once the gradient is below ``newton_tol`` and the Newton
    step has stalled at rounding level, or after ``max_newton_iter`` steps.
    Returns ``None`` when the iterate leaves the chart or never converges.
    """
    lo, hi = _box_arrays(chart)
    t = np.asarray(t0, dtype=float).copy()
    for _ in range(tol.max_newton_iter):
        _, J, H = g.eval(t, 2)
        grad = J[0]
        Hs = 0.5 * (H[0] + H[0].T)
        step = np.linalg.lstsq(Hs, -grad, rcond=None)[0]
        if np.linalg.norm(grad) <= tol.newton_tol and np.linalg.norm(step) <= 1e-13 * (1.0 + np.linalg.norm(t)):
            break
        t_new = t + step
        if np.any(t_new <= lo) or np.any(t_new >= hi) or not np.all(np.isfinite(t_new)):
            return None
        t = t_new
    _, J, H = g.eval(t, 2)
    gn = float(np.linalg.norm(J[0]))
    if gn > tol.newton_tol:
        return None
    Hs = 0.5 * (H[0] + H[0].T)
    det, nondeg, index, eig = _classify(Hs, tol)
    return CriticalPoint(chart.chart_id, t, gn, det, nondeg, index, eig)


def find_critical_points(
    g: SmoothMap,
    chart: Chart,
    grid_density: int,
    seed: int,
    tol: Tolerances = Tolerances(),
) -> List[CriticalPoint]:
    """Critical points of a scalar chart-local map, deduplicated in ``t``.

    Newton is seeded from a ``grid_density^n`` grid plus ``grid_density``
    uniform points of the chart interior. Seeds that diverge or leave the
    chart are dropped.
    """
    if g.codomain_dim != 1:
        raise ArgumentError("critical points need a scalar map")
    n = g.domain_dim
    lo, hi = _box_arrays(chart)
    axes = [lo[i] + (np.arange(grid_density) + 0.5) / grid_density * (hi[i] - lo[i]) for i in range(n)]
    grid = np.array(list(itertools.product(*axes)))
    extra = _uniform_in(chart, rng_for(seed, "critical_seeds", chart.chart_id), grid_density)
    found: List[CriticalPoint] = []
    for t0 in np.vstack([grid, extra]):
        cp = refine_critical_point(g, chart, t0, tol)
        if cp is None:
            continue
        for i, other in enumerate(found):
            if np.linalg.norm(other.t - cp.t) < tol.dedup_radius:
                if cp.grad_norm < other.grad_norm:
                    found[i] = cp
                break
        else:
            found.append(cp)
    return found


def verify_morse(
    F: SmoothMap,
    f: SmoothMap,
    man: ChartedManifold,
    budget: Budget = Budget(),
    seed: int = 0,
    tol: Tolerances = Tolerances(),
) -> VerifierVerdict:
    """Every critical point of ``F o f`` is nondegenerate."""
    if F.codomain_dim != 1:
        raise PredicateError(f"Morse check needs l = 1, got l = {F.codomain_dim}")
    local = _local_maps(F, f, man)
    points: List[tuple] = []
    for chart in man.charts:
        for cp in find_critical_points(local[chart.chart_id], chart, budget.grid_density, seed, tol):
            q = chart.point(cp.t)
            for i, (other, oq) in enumerate(points):
                if np.linalg.norm(oq - q) < tol.dedup_radius:
                    if cp.grad_norm < other.grad_norm:
                        points[i] = (cp, q)
                    break
            else:
                points.append((cp, q))
    evidence = []
    for cp, q in points:
        item = cp.to_dict()
        item["point"] = q.tolist()
        item["counterexample"] = not cp.nondegenerate
        evidence.append(item)
    passed = all(cp.nondegenerate for cp, _ in points)
    metric = min((min(abs(e) for e in cp.eigenvalues) for cp, _ in points), default=None)
    return VerifierVerdict(
        "morse",
        passed,
        evidence,
        tol.to_dict(),
        budget.to_dict(man.dim_n),
        seed,
        metric,
    )


# -- rank-drop hunting ---------------------------------------------------------


def _gram_objective(g: SmoothMap, k: int, transpose: bool):
    """Sum of the ``k`` smallest eigenvalues of ``K^T K``, ``K = J`` or ``J^T``."""

    def fun(t):
        _, J, H = g.eval(t, 2)
        K = J.T if transpose else J
        w, V = np.linalg.eigh(K.T @ K)
        val = float(np.sum(w[:k]))
        grad = np.zeros(t.shape[0])
        for p in range(t.shape[0]):
            dJ = H[:, :, p]
            dK = dJ.T if transpose else dJ
            for i in range(k):
                v = V[:, i]
                grad[p] += 2.0 * float((K @ v) @ (dK @ v))
        return val, grad

    return fun


def _minimize_in_chart(fun, chart: Chart, starts: np.ndarray):
    lo, hi = _box_arrays(chart)
    bounds = list(zip(lo, hi))
    for t0 in starts:
        res = minimize(fun, t0, jac=True, method="L-BFGS-B", bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-14, "maxiter": 200})
        yield np.clip(res.x, lo, hi)


def _singular_values(J: np.ndarray, count: int) -> np.ndarray:
    sv = np.linalg.svd(J, compute_uv=False)
    return np.concatenate([sv, np.zeros(max(0, count - sv.shape[0]))])


def verify_immersion(
    F: SmoothMap,
    f: SmoothMap,
    man: ChartedManifold,
    budget: Budget = Budget(),
    seed: int = 0,
    tol: Tolerances = Tolerances(),
) -> VerifierVerdict:
    """``J(F o f)`` has rank ``n`` at every sampled point and at every rank-drop minimiser."""
    n, l = man.dim_n, F.codomain_dim
    notes: List[str] = []
    _regime_note(l >= 2 * n, f"l = {l} < 2n = {2 * n}", notes)
    local = _local_maps(F, f, man)
    evidence: List[dict] = []
    sigma_min = np.inf
    best = None

    def consider(cid, t, origin):
        nonlocal sigma_min, best
        J = local[cid].eval(t, 1)[1]
        sv = _singular_values(J, n)
        rep = numerical_rank(J, tol.rank_tol_scale, atol=tol.sigma_floor)
        if sv[n - 1] < sigma_min:
            sigma_min, best = float(sv[n - 1]), (cid, t, origin)
        if rep.rank < n and len(evidence) < _MAX_EVIDENCE:
            evidence.append({
                "kind": "rank_drop",
                "origin": origin,
                "chart": cid,
                "t": np.asarray(t).tolist(),
                "rank": rep.rank,
                "required": n,
                "singular_values": sv.tolist(),
                "counterexample": True,
            })

    for cid, t in sample_points(man, budget.samples, derive_seed(seed, "immersion", "samples")):
        consider(cid, t, "sample")
    for chart in man.charts:
        fun = _gram_objective(local[chart.chart_id], 1, transpose=False)
        starts = _uniform_in(chart, rng_for(seed, "immersion_starts", chart.chart_id), budget.starts(n))
        for t in _minimize_in_chart(fun, chart, starts):
            consider(chart.chart_id, t, "minimizer")
    counter = any(e.get("counterexample") for e in evidence)
    passed = not counter and sigma_min > tol.sigma_floor
    if not passed and not counter and best is not None:
        cid, t, origin = best
        evidence.append({"kind": "rank_drop", "origin": origin, "chart": cid, "t": np.asarray(t).tolist(),
                         "sigma_min": sigma_min, "counterexample": True})
    if best is not None:
        cid, t, origin = best
        evidence.append({"kind": "min_sigma", "origin": origin, "chart": cid, "t": np.asarray(t).tolist(), "sigma_min": sigma_min})
    return VerifierVerdict("immersion", passed, evidence, tol.to_dict(), budget.to_dict(n), seed, sigma_min, notes)


def verify_corank_bound(
    F: SmoothMap,
    f: SmoothMap,
    man: ChartedManifold,
    budget: Budget = Budget(),
    seed: int = 0,
    tol: Tolerances = Tolerances(),
) -> VerifierVerdict:
    """No point of ``F o f`` has corank above ``k0``."""
    n, l = man.dim_n, F.codomain_dim
    nu = min(n, l)
    k0 = k0_max_corank(n, l)
    notes = [f"k0 = {k0}, nu = {nu}"]
    if k0 >= nu:
        notes.append("corank never exceeds nu; bound holds for every map")
        return VerifierVerdict("corank_bound", True, [{"kind": "trivial", "k0": k0, "nu": nu}],
                               tol.to_dict(), budget.to_dict(n), seed, None, notes)
    local = _local_maps(F, f, man)
    transpose = n > l
    evidence: List[dict] = []
    # corank > k0 iff the (k0 + 1)-th smallest singular value vanishes
    metric = np.inf
    best = None

    def consider(cid, t, origin):
        nonlocal metric, best
        J = local[cid].eval(t, 1)[1]
        sv = _singular_values(J, nu)[:nu]
        rep = numerical_rank(J, tol.rank_tol_scale, atol=tol.sigma_floor)
        crit = float(sv[nu - k0 - 1])
        if crit < metric:
            metric, best = crit, (cid, np.asarray(t).tolist(), origin)
        if rep.corank > k0 and len(evidence) < _MAX_EVIDENCE:
            evidence.append({"kind": "high_corank", "origin": origin, "chart": cid, "t": np.asarray(t).tolist(),
                             "corank": rep.corank, "k0": k0, "singular_values": sv.tolist(), "counterexample": True})

    for cid, t in sample_points(man, budget.samples, derive_seed(seed, "corank", "samples")):
        consider(cid, t, "sample")
    for k in range(k0 + 1, nu + 1):
        for chart in man.charts:
            fun = _gram_objective(local[chart.chart_id], k, transpose)
            starts = _uniform_in(chart, rng_for(seed, "corank_starts", k, chart.chart_id), budget.starts(n))
            for t in _minimize_in_chart(fun, chart, starts):
                consider(chart.chart_id, t, f"minimizer_k{k}")
    counter = any(e.get("counterexample") for e in evidence)
    passed = not counter and metric > tol.sigma_floor
    if best is not None:
        evidence.append({"kind": "min_critical_sigma", "chart": best[0], "t": best[1], "origin": best[2],
                         "sigma": metric, "counterexample": not passed and not counter})
    return VerifierVerdict("corank_bound", passed, evidence, tol.to_dict(), budget.to_dict(n), seed, metric, notes)


# -- Sigma^k transversality ----------------------------------------------------


@dataclass(frozen=True)
class SigmaCheck:
    status: str  # "not_in_stratum" | "transverse" | "fail"
    corank: int
    rank: Optional[int] = None
    required: Optional[int] = None
    singular_values: tuple = ()
    pivot_condition: Optional[float] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _complete_pivots(J: np.ndarray, r: int):
    W = J.copy()
    rows, cols = [], []
    for _ in range(r):
        mask = np.abs(W)
        mask[rows, :] = -1.0
        mask[:, cols] = -1.0
        i, j = np.unravel_index(int(np.argmax(mask)), W.shape)
        rows.append(int(i))
        cols.append(int(j))
        if W[i, j] != 0.0:
            W = W - np.outer(W[:, j], W[i, :]) / W[i, j]
    rest_r = [i for i in range(J.shape[0]) if i not in rows]
    rest_c = [j for j in range(J.shape[1]) if j not in cols]
    return rows, cols, rest_r, rest_c


def transverse_to_sigma_k_at(composite: SmoothMap, t, k: int, tol: Tolerances = Tolerances()) -> SigmaCheck:
    """Decide whether the 1-jet of ``composite`` crosses ``Sigma^k`` transversally at ``t``.

    Near a corank-``k`` Jacobian with invertible pivot block ``A`` the stratum
    is cut out by the Schur complement ``D - C A^-1 B = 0``. The jet is
    transverse iff ``t -> vec(D - C A^-1 B)`` has full rank there.
    """
    _, J, H = composite.eval(t, 2)
    H = 0.5 * (H + np.swapaxes(H, 1, 2))
    l, n = J.shape
    nu = min(n, l)
    if not 1 <= k <= nu:
        raise ArgumentError(f"corank k={k} outside 1..{nu}")
    corank = numerical_rank(J, tol.rank_tol_scale, atol=tol.sigma_floor).corank
    if corank != k:
        return SigmaCheck("not_in_stratum", corank)
    r = nu - k
    rows, cols, rest_r, rest_c = _complete_pivots(J, r)
    A = J[np.ix_(rows, cols)]
    cond = float(np.linalg.cond(A)) if r else 1.0
    if cond > tol.cond_limit:
        raise ConditioningError(f"pivot block condition {cond:.3e} exceeds {tol.cond_limit:.1e}")
    B = J[np.ix_(rows, rest_c)]
    C = J[np.ix_(rest_r, cols)]
    if r:
        AinvB = np.linalg.solve(A, B)
        CAinv = np.linalg.solve(A.T, C.T).T
    else:
        AinvB = np.zeros((0, len(rest_c)))
        CAinv = np.zeros((len(rest_r), 0))
    codim = len(rest_r) * len(rest_c)
    T = np.zeros((codim, n))
    for p in range(n):
        dJ = H[:, :, p]
        dA = dJ[np.ix_(rows, cols)]
        dB = dJ[np.ix_(rows, rest_c)]
        dC = dJ[np.ix_(rest_r, cols)]
        dD = dJ[np.ix_(rest_r, rest_c)]
        dS = dD - dC @ AinvB - CAinv @ dB + CAinv @ dA @ AinvB
        T[:, p] = dS.reshape(-1)
    sv = np.linalg.svd(T, compute_uv=False) if T.size else np.zeros(0)
    thr = tol.hess_tol * (1.0 + (float(sv[0]) if sv.size else 0.0))
    rank = int(np.count_nonzero(sv > thr))
    status = "transverse" if codim <= n and rank == codim else "fail"
    return SigmaCheck(status, corank, rank, codim, tuple(float(s) for s in sv), cond)


# -- multiple points -----------------------------------------------------------


@dataclass
class _TupleProblem:
    charts: tuple
    weighted: SmoothMap
    plain: SmoothMap
    n: int

    def split(self, z):
        return [np.asarray(z[i * self.n:(i + 1) * self.n]) for i in range(len(self.charts))]


def _tuple_problem(local: Dict[str, SmoothMap], man: ChartedManifold, chart_ids: tuple) -> _TupleProblem:
    n = man.dim_n
    s = len(chart_ids)
    l = next(iter(local.values())).codomain_dim
    gfuncs = [local[c].func for c in chart_ids]
    pfuncs = [man.chart(c).param.func for c in chart_ids]
    rho2 = SEPARATION_WEIGHT**2

    def differences(z):
        ts = [list(z[i * n:(i + 1) * n]) for i in range(s)]
        gs = [gf(t) for gf, t in zip(gfuncs, ts)]
        out = []
        for i in range(1, s):
            out.extend(a - b for a, b in zip(gs[i], gs[0]))
        return ts, out

    def plain(z):
        return differences(z)[1]

    def weighted(z):
        ts, out = differences(z)
        ps = [pf(t) for pf, t in zip(pfuncs, ts)]
        acc = 1.0
        for i in range(s):
            for j in range(i + 1, s):
                # the floor keeps coincident iterates (e.g. clamped to a bound) finite
                d2 = _SEP_FLOOR
                for a, b in zip(ps[i], ps[j]):
                    d2 = d2 + (a - b) * (a - b)
                acc = acc + rho2 / d2
        w = sqrt(acc)
        return [w * o for o in out]

    order = min(g.order_r for g in local.values())
    return _TupleProblem(
        chart_ids,
        SmoothMap(weighted, n * s, l * (s - 1), order, name="weighted_multiple_point"),
        SmoothMap(plain, n * s, l * (s - 1), order, name="multiple_point"),
        n,
    )


def _gauss_newton(prob: _TupleProblem, z, lo, hi, iters: int = 100):
    for _ in range(iters):
        r, Jr = prob.plain.eval(z, 1)
        if not np.any(r):
            break
        step = np.linalg.lstsq(Jr, -r, rcond=None)[0]
        z_new = z + step
        if np.any(z_new <= lo) or np.any(z_new >= hi):
            break
        z = z_new
        if np.linalg.norm(step) <= 1e-15 * (1.0 + np.linalg.norm(z)):
            break
    return z


def _min_separation(man: ChartedManifold, charts, ts) -> float:
    pts = [man.point(c, t) for c, t in zip(charts, ts)]
    return min(
        float(np.linalg.norm(pts[i] - pts[j])) for i in range(len(pts)) for j in range(i + 1, len(pts))
    )


def _tuple_record(prob: _TupleProblem, man: ChartedManifold, z) -> dict:
    ts = prob.split(z)
    r = prob.plain(z)
    return {
        "charts": list(prob.charts),
        "t": [t.tolist() for t in ts],
        "energy": float(r @ r),
        "min_separation": _min_separation(man, prob.charts, ts),
    }


def search_multiple_points(
    F: SmoothMap,
    f: SmoothMap,
    man: ChartedManifold,
    s: int,
    starts_per_combo: int,
    seed: int,
    tol: Tolerances = Tolerances(),
) -> List[dict]:
    """Multistart search for ``s`` distinct points with a common image.

    Minimises ``sum_i |g(q_i) - g(q_1)|^2`` weighted by ``1 + sum_{i<j}
    rho^2 / |q_i - q_j|^2`` (model-space distances), which keeps the tuple off
    the diagonal, then polishes small residuals by Gauss-Newton. Returns one
    record per start, sorted by energy.
    """
    if s < 2:
        raise ArgumentError("multiple points need s >= 2")
    local = _local_maps(F, f, man)
    ids = [c.chart_id for c in man.charts]
    records = []
    for combo in itertools.combinations_with_replacement(ids, s):
        prob = _tuple_problem(local, man, combo)
        lo = np.concatenate([_box_arrays(man.chart(c))[0] for c in combo])
        hi = np.concatenate([_box_arrays(man.chart(c))[1] for c in combo])
        rng = rng_for(seed, "multiple_points", s, *combo)
        for _ in range(starts_per_combo):
            z0 = lo + rng.random(lo.shape[0]) * (hi - lo)
            res = least_squares(
                lambda z: prob.weighted(z),
                z0,
                jac=lambda z: prob.weighted.eval(z, 1)[1],
                bounds=(lo, hi),
                method="trf",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=200,
            )
            z = np.clip(res.x, lo, hi)
            r = prob.plain(z)
            if r @ r < _POLISH_BELOW:
                z = _gauss_newton(prob, z, lo, hi)
            records.append(_tuple_record(prob, man, z))
    records.sort(key=lambda rec: rec["energy"])
    return records


def _same_tuple(a: dict, b: dict, man: ChartedManifold, radius: float) -> bool:
    pa = [man.point(c, t) for c, t in zip(a["charts"], a["t"])]
    pb = [man.point(c, t) for c, t in zip(b["charts"], b["t"])]
    return all(any(np.linalg.norm(x - y) < radius for y in pb) for x in pa)


def _distinct_multiple_points(records, man, tol: Tolerances) -> List[dict]:
    out: List[dict] = []
    for rec in records:
        if rec["energy"] > tol.collision_tol**2 or rec["min_separation"] < tol.pair_floor:
            continue
        if not any(_same_tuple(rec, o, man, 1e3 * tol.dedup_radius) for o in out):
            out.append(rec)
    return out


def verify_injective(
    F: SmoothMap,
    f: SmoothMap,
    man: ChartedManifold,
    budget: Budget = Budget(),
    seed: int = 0,
    tol: Tolerances = Tolerances(),
) -> VerifierVerdict:
    """No two points at model distance ``>= pair_floor`` share an image."""
    n, l = man.dim_n, F.codomain_dim
    notes: List[str] = []
    _regime_note(l > 2 * n, f"l = {l} <= 2n = {2 * n}", notes)
    local = _local_maps(F, f, man)
    rng = rng_for(seed, "injective_pairs")
    evidence: List[dict] = []
    min_d = np.inf
    best = None
    skipped = 0
    for _ in range(budget.samples):
        c1, c2 = (man.charts[i] for i in rng.integers(len(man.charts), size=2))
        t1, t2 = _uniform_in(c1, rng, 1)[0], _uniform_in(c2, rng, 1)[0]
        sep = float(np.linalg.norm(c1.point(t1) - c2.point(t2)))
        if sep < tol.pair_floor:
            skipped += 1
            continue
        diff = local[c1.chart_id](t1) - local[c2.chart_id](t2)
        d = float(diff @ diff)
        rec = {"charts": [c1.chart_id, c2.chart_id], "t": [t1.tolist(), t2.tolist()], "energy": d, "min_separation": sep}
        if d < min_d:
            min_d, best = d, ("sample", rec)
        if d <= tol.collision_tol**2 and len(evidence) < _MAX_EVIDENCE:
            evidence.append({"kind": "collision", "origin": "sample", **rec, "counterexample": True})
    records = search_multiple_points(F, f, man, 2, budget.starts(n), derive_seed(seed, "injective", "search"), tol)
    for rec in records:
        if rec["min_separation"] < tol.pair_floor:
            continue
        if rec["energy"] < min_d:
            min_d, best = rec["energy"], ("minimizer", rec)
        if rec["energy"] <= tol.collision_tol**2 and len(evidence) < _MAX_EVIDENCE:
            evidence.append({"kind": "collision", "origin": "minimizer", **rec, "counterexample": True})
    passed = min_d > tol.collision_tol**2
    if best is not None:
        evidence.append({"kind": "closest_pair", "origin": best[0], **best[1]})
    sb = budget.to_dict(n)
    sb["pairs_skipped_near_diagonal"] = skipped
    metric = float(np.sqrt(min_d)) if np.isfinite(min_d) else None
    return VerifierVerdict("injective", passed, evidence, tol.to_dict(), sb, seed, metric, notes)


def delta_transversality(jacobians: List[np.ndarray], tol: Tolerances = Tolerances()) -> dict:
    """Rank of the stacked differential of ``g^(s)`` modulo the diagonal.

    Block row ``i`` (``i = 2..s``) holds ``-Jg(q_1)`` in slot 1 and
    ``Jg(q_i)`` in slot ``i``; transversality to ``Delta_s`` needs rank
    ``l (s - 1)``.
    """
    s = len(jacobians)
    l, n = jacobians[0].shape
    M = np.zeros((l * (s - 1), n * s))
    for i in range(1, s):
        M[(i - 1) * l:i * l, 0:n] = -jacobians[0]
        M[(i - 1) * l:i * l, i * n:(i + 1) * n] = jacobians[i]
    rep = numerical_rank(M, tol.rank_tol_scale, atol=tol.crossing_floor)
    return {
        "rank": rep.rank,
        "required": l * (s - 1),
        "transverse": rep.rank == l * (s - 1),
        "singular_values": list(rep.singular_values),
    }


def verify_normal_crossings(
    F: SmoothMap,
    f: SmoothMap,
    man: ChartedManifold,
    s_f: int,
    budget: Budget = Budget(),
    seed: int = 0,
    tol: Tolerances = Tolerances(),
) -> VerifierVerdict:
    """Multiple points of ``F o f`` of multiplicity ``2..s_f`` cross transversally.

    When ``(s_f - 1) l > n s_f`` no ``s_f``-fold point may exist at all. The
    fiber-cardinality hypothesis on ``F_pi`` is assumed, not checked.
    """
    if s_f < 2:
        raise ArgumentError(f"s_f must be >= 2, got {s_f}")
    n, l = man.dim_n, F.codomain_dim
    notes = ["fiber-cardinality hypothesis |F_pi^-1(y)| <= s_f is assumed, not verified"]
    empty_clause = nc_regime(n, l, s_f)
    local = _local_maps(F, f, man)
    f_local = {c.chart_id: chart_local(f, c) for c in man.charts}
    evidence: List[dict] = []
    passed = True
    metric = None
    for s in range(2, s_f + 1):
        records = search_multiple_points(F, f, man, s, budget.starts(n), derive_seed(seed, "nc", s), tol)
        found = _distinct_multiple_points(records, man, tol)
        valid = [r for r in records if r["min_separation"] >= tol.pair_floor]
        if valid:
            lowest = float(np.sqrt(valid[0]["energy"]))
            metric = lowest if metric is None else min(metric, lowest)
        evidence.append({"kind": "search", "s": s, "multiple_points": len(found),
                         "min_residual": float(np.sqrt(valid[0]["energy"])) if valid else None})
        for rec in found:
            ts = [np.asarray(t) for t in rec["t"]]
            jacs = [local[c].eval(t, 1)[1] for c, t in zip(rec["charts"], ts)]
            check = delta_transversality(jacs, tol)
            fvals = [f_local[c](t) for c, t in zip(rec["charts"], ts)]
            m2 = numerical_rank(assemble_M2(fvals, l), tol.rank_tol_scale).rank
            bad = not check["transverse"] or (s == s_f and empty_clause)
            item = {"kind": "multiple_point", "s": s, **rec, **check,
                    "m2_rank": m2, "m2_required": l * s, "counterexample": bad}
            if s == s_f and empty_clause:
                item["reason"] = "s_f-fold point exists although (s_f - 1) l > n s_f"
            evidence.append(item)
            passed = passed and not bad
    return VerifierVerdict("normal_crossings", passed, evidence, tol.to_dict(), budget.to_dict(n), seed, metric, notes)


def verify_embedding(
    F: SmoothMap,
    f: SmoothMap,
    man: ChartedManifold,
    budget: Budget = Budget(),
    seed: int = 0,
    tol: Tolerances = Tolerances(),
) -> VerifierVerdict:
    """Injective immersion of a compact manifold, hence an embedding."""
    if not man.compact:
        raise PredicateError(f"{man.name} is not compact; the embedding criterion needs a compact N")
    n, l = man.dim_n, F.codomain_dim
    notes: List[str] = []
    _regime_note(l > 2 * n, f"l = {l} <= 2n = {2 * n}", notes)
    imm = verify_immersion(F, f, man, budget, derive_seed(seed, "embedding", "immersion"), tol)
    inj = verify_injective(F, f, man, budget, derive_seed(seed, "embedding", "injective"), tol)
    evidence = [{"leg": "immersion", **e} for e in imm.evidence] + [{"leg": "injective", **e} for e in inj.evidence]
    metric = None
    if imm.key_metric is not None and inj.key_metric is not None:
        metric = min(imm.key_metric, inj.key_metric)
    return VerifierVerdict(
        "embedding",
        imm.passed and inj.passed,
        evidence,
        tol.to_dict(),
        budget.to_dict(n),
        seed,
        metric,
        notes + [f"immersion leg: {'pass' if imm.passed else 'fail'}", f"injective leg: {'pass' if inj.passed else 'fail'}"],
    )
