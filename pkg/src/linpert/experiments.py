"""Monte Carlo sweeps over random perturbations.

Each trial draws ``alpha`` from the stream keyed on ``(seed, trial)`` and runs
the requested verifiers on ``(F + alpha) o f`` with seeds keyed on
``(seed, trial, property)``. Trials are independent, so a report is the same
at any worker count and does not change when properties are added or
removed.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from ._rng import derive_seed
from .errors import ArgumentError, ConfigError, ToolkitError
from .geometry import builtin, target_map
from .perturbation import LinearPerturbation, perturb, sample_perturbation
from .strata import estimate_sf, strata_profile
from .verifiers import (
    Budget,
    Tolerances,
    verify_corank_bound,
    verify_embedding,
    verify_immersion,
    verify_injective,
    verify_morse,
    verify_normal_crossings,
)

log = logging.getLogger(__name__)

PROPERTIES = ("morse", "immersion", "corank", "injective", "nc", "embedding")
SF_SAMPLES = 1000


@dataclass(frozen=True)
class ExperimentConfig:
    catalog: str
    F: str
    properties: Tuple[str, ...]
    trials: int = 1
    l: Optional[int] = None
    perturb_scale: float = 1.0
    seed: int = 0
    budget: Budget = Budget()
    budgets: Dict[str, Budget] = field(default_factory=dict)
    tolerances: Tolerances = Tolerances()
    s_f: Optional[int] = None
    control_zero_alpha: bool = False
    workers: int = 1
    dump_alpha: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.properties:
            raise ConfigError("at least one property is required")
        for p in self.properties:
            if p not in PROPERTIES:
                raise ConfigError(f"unknown property {p!r}; valid: {', '.join(PROPERTIES)}")
        if not self.perturb_scale > 0:
            raise ConfigError("perturb_scale must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def budget_for(self, prop: str) -> Budget:
        return self.budgets.get(prop, self.budget)

    def to_dict(self) -> dict:
        return {
            "catalog": self.catalog,
            "F": self.F,
            "l": self.l,
            "properties": list(self.properties),
            "trials": self.trials,
            "perturb_scale": self.perturb_scale,
            "seed": self.seed,
            "budget": dataclasses.asdict(self.budget),
            "budgets": {k: dataclasses.asdict(v) for k, v in sorted(self.budgets.items())},
            "s_f": self.s_f,
            "control_zero_alpha": self.control_zero_alpha,
        }


# -- flat key = value config files -------------------------------------------

_SCALAR_KEYS = {
    "catalog": str,
    "F": str,
    "l": int,
    "trials": int,
    "perturb_scale": float,
    "seed": int,
    "sf": int,
    "control_zero_alpha": "bool",
    "workers": int,
    "dump_alpha": "bool",
    "rank_tol_scale": float,
}
_BUDGET_FIELDS = {f.name: int for f in dataclasses.fields(Budget)}
_TOL_FIELDS = {f.name: (int if f.type in ("int", int) else float) for f in dataclasses.fields(Tolerances)}


def _convert(key: str, kind, raw: str):
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(raw, 0)
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {key}") from exc


def parse_config_text(text: str) -> Dict[str, object]:
    """Parse ``key = value`` lines into typed values; ``#`` starts a comment.

    Besides the scalar keys, ``properties`` is a comma list, ``samples``,
    ``starts_per_chart`` and ``grid_density`` set the default budget,
    ``budget.<property>.<field>`` overrides it per property and
    ``tol.<name>`` overrides a tolerance.
    """
    out: Dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key == "properties":
            out[key] = tuple(p.strip() for p in raw.split(",") if p.strip())
        elif key in _SCALAR_KEYS:
            out[key] = _convert(key, _SCALAR_KEYS[key], raw)
        elif key in _BUDGET_FIELDS:
            out[key] = _convert(key, int, raw)
        elif key.startswith("budget."):
            parts = key.split(".")
            if len(parts) != 3 or parts[1] not in PROPERTIES or parts[2] not in _BUDGET_FIELDS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            out[key] = _convert(key, int, raw)
        elif key.startswith("tol."):
            name = key[4:]
            if name not in _TOL_FIELDS:
                raise ConfigError(f"line {lineno}: unknown tolerance {name!r}")
            out[key] = _convert(key, _TOL_FIELDS[name], raw)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return out


def config_from_mapping(values: Dict[str, object]) -> ExperimentConfig:
    values = dict(values)
    for required in ("catalog", "F", "properties"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}")
    base = {k: values.pop(k) for k in list(values) if k in _BUDGET_FIELDS}
    budget = Budget(**base)
    per: Dict[str, dict] = {}
    tol_over = {}
    for key in list(values):
        if key.startswith("budget."):
            _, prop, name = key.split(".")
            per.setdefault(prop, {})[name] = values.pop(key)
        elif key.startswith("tol."):
            tol_over[key[4:]] = values.pop(key)
    if "rank_tol_scale" in values:
        tol_over.setdefault("rank_tol_scale", values.pop("rank_tol_scale"))
    budgets = {p: dataclasses.replace(budget, **fields) for p, fields in per.items()}
    return ExperimentConfig(
        catalog=values.pop("catalog"),
        F=values.pop("F"),
        properties=tuple(values.pop("properties")),
        trials=values.pop("trials", 1),
        l=values.pop("l", None),
        perturb_scale=values.pop("perturb_scale", 1.0),
        seed=values.pop("seed", 0),
        budget=budget,
        budgets=budgets,
        tolerances=Tolerances().replace(**tol_over),
        s_f=values.pop("sf", None),
        control_zero_alpha=values.pop("control_zero_alpha", False),
        workers=values.pop("workers", 1),
        dump_alpha=values.pop("dump_alpha", False),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_mapping(parse_config_text(fh.read()))


# -- trials --------------------------------------------------------------------


def run_property(prop, F_pi, f, man, budget, seed, tol, s_f=None):
    """Dispatch one property name to its verifier."""
    if prop == "morse":
        return verify_morse(F_pi, f, man, budget, seed, tol)
    if prop == "immersion":
        return verify_immersion(F_pi, f, man, budget, seed, tol)
    if prop == "corank":
        return verify_corank_bound(F_pi, f, man, budget, seed, tol)
    if prop == "injective":
        return verify_injective(F_pi, f, man, budget, seed, tol)
    if prop == "nc":
        if s_f is None:
            raise ArgumentError("normal-crossings check needs s_f")
        return verify_normal_crossings(F_pi, f, man, s_f, budget, seed, tol)
    if prop == "embedding":
        return verify_embedding(F_pi, f, man, budget, seed, tol)
    raise ArgumentError(f"unknown property {prop!r}")


def _problem(cfg: ExperimentConfig):
    man, f = builtin(cfg.catalog)
    F = target_map(cfg.F, f.codomain_dim, cfg.l)
    return man, f, F


def _resolve_sf(cfg: ExperimentConfig, man, f) -> Optional[int]:
    if cfg.s_f is not None or "nc" not in cfg.properties:
        return cfg.s_f
    return estimate_sf(f, man, max(SF_SAMPLES, 10 * (f.codomain_dim + 1)), cfg.seed, cfg.tolerances.rank_tol_scale).estimate


def _metric(x):
    if x is None or not math.isfinite(x):
        return None
    return x


def _run_trial(cfg: ExperimentConfig, index: int, s_f: Optional[int], control: bool = False) -> dict:
    man, f, F = _problem(cfg)
    m, l = F.domain_dim, F.codomain_dim
    alpha = LinearPerturbation.zero(m, l) if control else sample_perturbation(m, l, cfg.perturb_scale, cfg.seed, index)
    F_pi = perturb(F, alpha)
    record = {"trial": "control" if control else index, "alpha_digest": alpha.digest()}
    if cfg.dump_alpha:
        record["alpha"] = alpha.alpha.tolist()
    verdicts = {}
    for prop in cfg.properties:
        seed = derive_seed(cfg.seed, "trial", -1 if control else index, prop)
        try:
            v = run_property(prop, F_pi, f, man, cfg.budget_for(prop), seed, cfg.tolerances, s_f)
        except ToolkitError as exc:
            verdicts[prop] = {"outcome": "error", "error": f"{type(exc).__name__}: {exc}", "key_metric": None}
            continue
        d = v.to_dict()
        del d["tolerances"]
        d["key_metric"] = _metric(d["key_metric"])
        d["outcome"] = "pass" if v.passed else "fail"
        verdicts[prop] = d
    record["verdicts"] = verdicts
    return record


def _trial_job(args):
    cfg, index, s_f, control = args
    return _run_trial(cfg, index, s_f, control)


@dataclass
class ExperimentReport:
    config: dict
    trials: List[dict]
    aggregate: Dict[str, dict]
    environment: dict
    control: Optional[dict] = None
    regimes: Dict[str, bool] = field(default_factory=dict)
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        # wall time is deliberately excluded: reports must be byte-identical
        return {
            "config": self.config,
            "environment": self.environment,
            "regimes": self.regimes,
            "aggregate": self.aggregate,
            "control": self.control,
            "trials": self.trials,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trial", "property", "pass", "key_metric", "alpha_digest"])
        rows = list(self.trials) + ([self.control] if self.control else [])
        for rec in rows:
            for prop, v in rec["verdicts"].items():
                outcome = {"pass": "true", "fail": "false"}.get(v["outcome"], "error")
                metric = "" if v.get("key_metric") is None else repr(v["key_metric"])
                writer.writerow([rec["trial"], prop, outcome, metric, rec["alpha_digest"]])
        return buf.getvalue()


def _regimes(cfg, man, F, s_f) -> Dict[str, bool]:
    n, m, l = man.dim_n, F.domain_dim, F.codomain_dim
    pred = strata_profile(n, m, l, s_f if s_f is not None and 2 <= s_f <= m + 1 else None).predicates
    table = {
        "morse": pred["morse_applicable"],
        "immersion": pred["immersion_regime"],
        "corank": True,
        "injective": pred["injection_regime"],
        "nc": bool(pred["nc_regime"]) if s_f is not None else False,
        "embedding": pred["injection_regime"] and man.compact,
    }
    out = {}
    for prop in cfg.properties:
        out[prop] = table[prop]
        if not table[prop]:
            log.warning("property %s is outside its generic regime for (n, m, l) = (%d, %d, %d)", prop, n, m, l)
    return out


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    start = time.perf_counter()
    man, f, F = _problem(cfg)
    s_f = _resolve_sf(cfg, man, f)
    jobs = [(cfg, i, s_f, False) for i in range(cfg.trials)]
    if cfg.control_zero_alpha:
        jobs.append((cfg, -1, s_f, True))
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        results = [_trial_job(job) for job in jobs]
    control = results.pop() if cfg.control_zero_alpha else None
    aggregate = {}
    for prop in cfg.properties:
        outcomes = [rec["verdicts"][prop]["outcome"] for rec in results]
        counts = {k: outcomes.count(k) for k in ("pass", "fail", "error")}
        aggregate[prop] = {
            "pass_count": counts["pass"],
            "fail_count": counts["fail"],
            "error_count": counts["error"],
            "failure_frequency": counts["fail"] / cfg.trials,
        }
    env = {"version": f"linpert {__version__}", "tolerances": cfg.tolerances.to_dict(), "s_f": s_f}
    report = ExperimentReport(cfg.to_dict(), results, aggregate, env, control, _regimes(cfg, man, F, s_f))
    report.wall_time = time.perf_counter() - start
    log.info("experiment finished: %d trials in %.2fs", cfg.trials, report.wall_time)
    return report


def tolerance_sweep(cfg: ExperimentConfig, floors: Sequence[float]) -> dict:
    """Re-run ``cfg`` with ``sigma_floor = collision_tol = floor`` for each floor.

    ``crossing_floor`` follows as ``sqrt(floor)``. Monotonicity of the
    failure frequencies is reported per property, not enforced.
    """
    floors = [float(x) for x in floors]
    if not floors or any(x <= 0 for x in floors):
        raise ArgumentError("floors must be positive")
    if any(b >= a for a, b in zip(floors, floors[1:])):
        raise ArgumentError("floors must be strictly decreasing")
    rows = []
    for floor in floors:
        tol = cfg.tolerances.replace(sigma_floor=floor, collision_tol=floor, crossing_floor=math.sqrt(floor))
        rep = run_experiment(dataclasses.replace(cfg, tolerances=tol))
        row = {
            "floor": floor,
            "failure_frequency": {p: a["failure_frequency"] for p, a in rep.aggregate.items()},
            "aggregate": rep.aggregate,
        }
        if rep.control is not None:
            row["control"] = {p: v["outcome"] for p, v in rep.control["verdicts"].items()}
        rows.append(row)
    monotone = {
        p: all(b["failure_frequency"][p] <= a["failure_frequency"][p] for a, b in zip(rows, rows[1:]))
        for p in cfg.properties
    }
    return {"config": cfg.to_dict(), "rows": rows, "non_increasing": monotone}
