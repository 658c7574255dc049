"""Experiment configs (INI) and result files (CSV rows, JSON summaries, traces).

Config grammar: ``key = value`` lines grouped in sections.

    [scenario]   K, M, N, Q, size_profile, rho_db, scheduler, seed, fallback,
                 proxy_oour, clustering_slot, sinr_mode, bcc_r_min, delta, eps,
                 max_sca_iter, r_min_per_user
    [qos]        r_min, d_max, packet_bits, bandwidth_hz, blocklength, epsilon
    [arrivals]   schedule (e.g. ``1:1, 2:3``), prob, max_per_slot
    [sweep]      <field> = v1, v2, ...      (any scenario or qos field)
    [experiment] replications, seed0

Lists are comma separated; ``none`` clears an optional field.  d_max is in
seconds and rho_db in dB.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .config import ConfigError, QosSpec, ScenarioConfig

SCENARIO_KEYS = {f.name for f in dataclasses.fields(ScenarioConfig)} - {"qos", "arrival_schedule",
                                                                       "arrival_prob",
                                                                       "max_arrivals_per_slot"}
QOS_KEYS = {f.name for f in dataclasses.fields(QosSpec)}
ARRIVAL_KEYS = {"schedule": "arrival_schedule", "prob": "arrival_prob",
                "max_per_slot": "max_arrivals_per_slot"}
EXPERIMENT_KEYS = {"replications", "seed0"}
CSV_FIELDS = ["point", "seed", "slot", "metric", "value"]


@dataclass
class ExperimentSpec:
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    axes: dict = field(default_factory=dict)      # field name -> list of values
    replications: int = 1
    seed0: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        for name in self.axes:
            if name not in SCENARIO_KEYS | QOS_KEYS | set(ARRIVAL_KEYS.values()):
                raise ConfigError(f"unknown sweep field: {name}")

    def seeds(self):
        return list(range(self.seed0, self.seed0 + self.replications))

    def points(self):
        """(name, overrides) for each point of the sweep grid."""
        if not self.axes:
            return [("base", {})]
        names = list(self.axes)
        out = []
        for combo in itertools.product(*(self.axes[n] for n in names)):
            over = dict(zip(names, combo))
            label = "_".join(f"{n}={_fmt(v)}" for n, v in over.items())
            out.append((label, over))
        return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dict):
        return "+".join(f"{k}x{c}" for k, c in sorted(v.items())) or "none"
    return str(v)


def _convert(name: str, raw: str):
    raw = raw.strip()
    types = {f.name: f.type for f in dataclasses.fields(ScenarioConfig)}
    types.update({f.name: f.type for f in dataclasses.fields(QosSpec)})
    if raw.lower() == "none":
        return None
    if name == "arrival_schedule":
        sched = {}
        for part in filter(None, (p.strip() for p in raw.split(","))):
            slot, count = part.split(":")
            sched[int(slot)] = int(count)
        return sched
    kind = str(types.get(name, "float"))
    try:
        if name in ("size_profile", "r_min_per_user"):
            conv = int if name == "size_profile" else float
            return tuple(conv(p) for p in raw.split(","))
        if kind.startswith("bool"):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("str"):
            return raw
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None


def _sweep_values(name: str, raw: str):
    if name == "arrival_schedule":
        # alternatives separated by ';'
        return [_convert(name, part) for part in raw.split(";")]
    return [_convert(name, part) for part in raw.split(",")]


def parse_config_text(text: str) -> ExperimentSpec:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    changes, axes, exp = {}, {}, {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            if section == "scenario":
                if key not in SCENARIO_KEYS:
                    raise ConfigError(f"unknown field in [scenario]: {key}")
                changes[key] = _convert(key, raw)
            elif section == "qos":
                if key not in QOS_KEYS:
                    raise ConfigError(f"unknown field in [qos]: {key}")
                changes[key] = _convert(key, raw)
            elif section == "arrivals":
                if key not in ARRIVAL_KEYS:
                    raise ConfigError(f"unknown field in [arrivals]: {key}")
                changes[ARRIVAL_KEYS[key]] = _convert(ARRIVAL_KEYS[key], raw)
            elif section == "sweep":
                name = ARRIVAL_KEYS.get(key, key)
                if name not in SCENARIO_KEYS | QOS_KEYS | set(ARRIVAL_KEYS.values()):
                    raise ConfigError(f"unknown sweep field: {key}")
                axes[name] = _sweep_values(name, raw)
            elif section == "experiment":
                if key not in EXPERIMENT_KEYS:
                    raise ConfigError(f"unknown field in [experiment]: {key}")
                exp[key] = int(raw)
            else:
                raise ConfigError(f"unknown section: [{section}]")
    try:
        base = ScenarioConfig().replace(**changes)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    # replications start from the scenario seed unless [experiment] says otherwise
    exp.setdefault("seed0", base.seed)
    return ExperimentSpec(base=base, axes=axes, **exp)


def parse_config(path) -> ExperimentSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def config_to_text(cfg: ScenarioConfig) -> str:
    """INI snapshot that parses back to ``cfg``."""
    def put(v):
        if v is None:
            return "none"
        if isinstance(v, tuple):
            return ", ".join(repr(x) for x in v)
        if isinstance(v, dict):
            return ", ".join(f"{k}:{c}" for k, c in sorted(v.items()))
        return repr(v) if isinstance(v, float) else str(v)

    lines = ["[scenario]"]
    for f in dataclasses.fields(ScenarioConfig):
        if f.name in SCENARIO_KEYS:
            lines.append(f"{f.name} = {put(getattr(cfg, f.name))}")
    lines.append("\n[qos]")
    for f in dataclasses.fields(QosSpec):
        lines.append(f"{f.name} = {put(getattr(cfg.qos, f.name))}")
    lines.append("\n[arrivals]")
    for key, name in ARRIVAL_KEYS.items():
        lines.append(f"{key} = {put(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: ScenarioConfig) -> dict:
    d = dataclasses.asdict(cfg)
    if cfg.arrival_schedule is not None:
        d["arrival_schedule"] = {str(k): v for k, v in cfg.arrival_schedule.items()}
    return d


# ---------------------------------------------------------------- rows

def write_rows(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in rows:
            v = r["value"]
            w.writerow([r["point"], r["seed"], r["slot"], r["metric"],
                        "NaN" if isinstance(v, float) and math.isnan(v) else repr(float(v))])


def read_rows(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != CSV_FIELDS:
            raise ConfigError(f"unexpected CSV header {rd.fieldnames}")
        return [{"point": r["point"], "seed": int(r["seed"]), "slot": int(r["slot"]),
                 "metric": r["metric"], "value": float(r["value"])} for r in rd]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n",
                          encoding="utf-8")
