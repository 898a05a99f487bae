"""Benchmark harness: RMSE versus metered cost for the standard and modified estimators.

Output files (all deterministic for a fixed config except ``timings.csv``):

* ``rows.csv``      one row per (eps, mode, replication)
* ``summary.csv``   RMSE, mean cost and the standard/modified cost ratio per eps
* ``metadata.json`` resolved config, constants and planning notes
* ``timings.csv``   wall-clock seconds per row, informational only
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .mlmc import (ConstantSet, DegenerateVarianceError, default_workers, mlmc_estimate,
                   pilot_estimate_constants)
from .noise import RngStreamSpec
from .schemes import PathDivergenceError
from .sde import DEFAULT_FUNCTIONAL, MODEL_BUILDERS, get_model
from .theory import classify, ratio_beta_eq_gamma

log = logging.getLogger(__name__)

MODES = ("standard", "modified")
CONSTANT_KEYS = tuple(f.name for f in dataclasses.fields(ConstantSet)
                      if f.name not in ("poly_cost", "source"))
ROW_COLUMNS = ("model_id", "functional_id", "mode", "eps", "replication", "estimate", "exact",
               "abs_error", "total_cost", "L", "N_l", "seed", "error")
SUMMARY_COLUMNS = ("model_id", "functional_id", "eps", "rmse_standard", "cost_standard",
                   "reps_standard", "rmse_modified", "cost_modified", "reps_modified",
                   "ratio", "theory_bound", "baseline")


class ConfigError(ValueError):
    pass


def default_eps_list(j_max: int = 4) -> tuple:
    return tuple(4.0**-j for j in range(j_max + 1))


@dataclass
class ExperimentConfig:
    model_id: str = "gbm"
    functional_id: Optional[str] = None
    eps_list: tuple = field(default_factory=default_eps_list)
    replications: int = 20
    mode_list: tuple = MODES
    master_seed: int = 0
    M: int = 2
    q_policy: str = "default"
    constants_source: str = "pilot"
    pilot_N: int = 20_000
    pilot_levels: int = 6
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.functional_id is None:
            self.functional_id = DEFAULT_FUNCTIONAL.get(self.model_id)
        self.eps_list = tuple(float(e) for e in self.eps_list)
        self.mode_list = tuple(self.mode_list)

    def validate(self) -> "ExperimentConfig":
        if self.model_id not in MODEL_BUILDERS:
            raise ConfigError(f"unknown model_id {self.model_id!r}")
        model = get_model(self.model_id)
        if self.functional_id not in model.references:
            raise ConfigError(f"model {self.model_id} has no functional {self.functional_id!r}")
        eps = self.eps_list
        if not eps or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ConfigError("eps_list must be positive and strictly decreasing")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not self.mode_list or any(m not in MODES for m in self.mode_list):
            raise ConfigError(f"mode_list must be a subset of {MODES}")
        if self.M < 2:
            raise ConfigError("M must be >= 2")
        if self.q_policy not in ("default", "optimal"):
            try:
                q = float(self.q_policy)
            except ValueError:
                raise ConfigError(f"bad q_policy {self.q_policy!r}") from None
            if not 0 < q < 1:
                raise ConfigError("fixed q must lie in (0, 1)")
        if self.constants_source not in ("pilot", "explicit"):
            raise ConfigError("constants_source must be pilot or explicit")
        if self.constants_source == "explicit":
            missing = [k for k in CONSTANT_KEYS if k != "c1_p" and k not in self.constants]
            if missing:
                raise ConfigError(f"explicit constants missing: {', '.join(missing)}")
        return self


_INT_KEYS = {"replications", "master_seed", "M", "pilot_N", "pilot_levels", "eps_min"}


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; lists are comma separated."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        raw[key] = value
    return raw


def build_config(raw: dict) -> ExperimentConfig:
    """Turn string key/values (file merged with CLI overrides) into a validated config."""
    raw = dict(raw)
    kwargs, consts = {}, {}
    try:
        eps_min = raw.pop("eps_min", None)
        for key, value in raw.items():
            if key in CONSTANT_KEYS:
                consts[key] = float(value)
            elif key == "eps_list":
                kwargs[key] = tuple(float(v) for v in value.split(",") if v.strip())
            elif key == "mode_list":
                modes = [v.strip() for v in value.split(",") if v.strip()]
                kwargs[key] = MODES if modes == ["both"] else tuple(modes)
            elif key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in ("model_id", "functional_id", "q_policy", "constants_source"):
                kwargs[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if eps_min is not None:
            kwargs["eps_list"] = default_eps_list(int(eps_min))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(constants=consts, **kwargs).validate()


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    raw = parse_config_text(text)
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    return build_config(raw)


@dataclass
class ResultRow:
    model_id: str
    functional_id: str
    mode: str
    eps: float
    replication: int
    estimate: Optional[float]
    exact: Optional[float]
    abs_error: Optional[float]
    total_cost: Optional[int]
    L: Optional[int]
    N_l: tuple
    seed: str
    error: str = ""
    wall_seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.error


def resolve_constants(config: ExperimentConfig, workers=None) -> ConstantSet:
    if config.constants_source == "explicit":
        return ConstantSet(**config.constants, source="explicit")
    model = get_model(config.model_id)
    functional, _ = model.reference(config.functional_id)
    try:
        return pilot_estimate_constants(model, functional, pilot_levels=config.pilot_levels,
                                        pilot_N=config.pilot_N, M=config.M,
                                        spec=RngStreamSpec(config.master_seed, (1_000_003,)),
                                        workers=workers)
    except DegenerateVarianceError as exc:
        log.warning("%s; planning with the fallback constants", exc)
        return exc.fallback


def _stream(config, eps_index, mode_index, rep):
    return RngStreamSpec(config.master_seed, (eps_index, mode_index, rep))


def run_experiment(config: ExperimentConfig, constants: Optional[ConstantSet] = None,
                   workers: Optional[int] = None) -> list:
    """Rows for every (eps, mode, replication), in that nesting order.

    Replication ``r`` of mode ``k`` at ``eps_list[j]`` uses stream path
    ``(j, k, r)`` under ``master_seed``.  Failed rows carry an error message.
    """
    config.validate()
    workers = default_workers() if workers is None else workers
    constants = resolve_constants(config, workers) if constants is None else constants
    model = get_model(config.model_id)
    functional, _ = model.reference(config.functional_id)
    exact = model.exact(config.functional_id)
    tasks = [(j, eps, k, mode, r)
             for j, eps in enumerate(config.eps_list)
             for k, mode in enumerate(MODES) if mode in config.mode_list
             for r in range(config.replications)]
    inner = 1 if workers > 1 and len(tasks) > 1 else workers

    def work(task):
        j, eps, k, mode, r = task
        spec = _stream(config, j, k, r)
        seed = f"{config.master_seed}/{j}.{k}.{r}"
        t0 = time.perf_counter()
        try:
            rep = mlmc_estimate(model, functional, eps, constants, mode, spec, M=config.M,
                                q=config.q_policy, workers=inner)
        except (PathDivergenceError, ValueError, FloatingPointError) as exc:
            return ResultRow(config.model_id, config.functional_id, mode, eps, r, None, exact,
                             None, None, None, (), seed, f"{type(exc).__name__}: {exc}",
                             time.perf_counter() - t0)
        return ResultRow(config.model_id, config.functional_id, mode, eps, r, rep.estimate,
                         exact, abs(rep.estimate - exact), rep.total_cost, rep.plan.L,
                         tuple(rep.plan.N), seed, "", time.perf_counter() - t0)

    if workers > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, tasks))
    return [work(t) for t in tasks]


@dataclass
class SummaryRow:
    model_id: str
    functional_id: str
    eps: float
    rmse_standard: Optional[float]
    cost_standard: Optional[float]
    reps_standard: int
    rmse_modified: Optional[float]
    cost_modified: Optional[float]
    reps_modified: int
    ratio: Optional[float]
    theory_bound: float
    baseline: str = "all-alpha"


def rmse(errors) -> float:
    errors = list(errors)
    return math.sqrt(math.fsum(e * e for e in errors) / len(errors))


def summarize(rows, alpha: float = 1.0, p: float = 2.0) -> list:
    """Per (model, functional, eps) RMSE and mean metered cost of each mode.

    ``ratio`` is cost_standard / cost_modified; ``theory_bound`` is the
    asymptotic ``(p/alpha)^2``.  Cells without successful rows stay empty.
    """
    bound = ratio_beta_eq_gamma(alpha, p)
    keys = []
    for row in rows:
        key = (row.model_id, row.functional_id, row.eps)
        if key not in keys:
            keys.append(key)
    out = []
    for key in keys:
        cell = {}
        for mode in MODES:
            ok = [r for r in rows if (r.model_id, r.functional_id, r.eps) == key
                  and r.mode == mode and r.ok]
            if ok:
                cell[mode] = (rmse(r.estimate - r.exact for r in ok),
                              math.fsum(r.total_cost for r in ok) / len(ok), len(ok))
            else:
                cell[mode] = (None, None, 0)
        cs, cm = cell["standard"][1], cell["modified"][1]
        ratio = cs / cm if cs is not None and cm else None
        out.append(SummaryRow(*key, *cell["standard"], *cell["modified"], ratio, bound))
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        return ";".join(_fmt(v) for v in value)
    return str(value)


def _csv_text(columns, records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_fmt(getattr(rec, c)) for c in columns])
    return buf.getvalue()


def rows_csv(rows) -> str:
    return _csv_text(ROW_COLUMNS, rows)


def summary_csv(summary) -> str:
    return _csv_text(SUMMARY_COLUMNS, summary)


def metadata(config: ExperimentConfig, constants: ConstantSet) -> dict:
    regime = classify(constants)
    return {
        "package_version": __version__,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in dataclasses.asdict(config).items()},
        "constants": {k: getattr(constants, k) for k in CONSTANT_KEYS + ("source",)},
        "regime": {"name": regime.regime, "cost_exponent": regime.cost_exponent,
                   "log_squared": regime.log_squared,
                   "conditions": [[text, ok] for text, ok in regime.conditions_met]},
        "planning": "closed-form L and N_l from the rate/constant bundle; no adaptive updates",
        "cost_metric": "metered drift/diffusion evaluations, d units each",
        "ratio_baseline": "standard estimator (order-alpha scheme on every level)",
        "stream_layout": "master_seed / (eps_index, mode_index, replication) / level / chunk",
    }


def write_outputs(out_dir, config, constants, rows) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(rows, constants.alpha, constants.p)
    files = {
        "rows.csv": rows_csv(rows),
        "summary.csv": summary_csv(summary),
        "metadata.json": json.dumps(metadata(config, constants), indent=2, sort_keys=True) + "\n",
    }
    for name, text in files.items():
        (out / name).write_text(text)
    timing = io.StringIO()
    w = csv.writer(timing, lineterminator="\n")
    w.writerow(("mode", "eps", "replication", "wall_seconds"))
    for r in rows:
        w.writerow((r.mode, _fmt(r.eps), r.replication, f"{r.wall_seconds:.6f}"))
    (out / "timings.csv").write_text(timing.getvalue())
    return files
