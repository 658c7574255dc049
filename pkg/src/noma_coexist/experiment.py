"""Sweep orchestration, result persistence and replay audits."""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .clustering import ClusteringInfeasible
from .config import ConfigError
from .io import ExperimentSpec, config_to_dict, config_to_text, read_rows, write_json, write_rows
from .rates import latency_ok
from .sim import SlotInfeasible, audit_slot, run_period

log = logging.getLogger(__name__)


def _metric_rows(point, seed, metrics):
    rows = []
    for sm in metrics:
        def add(name, value):
            rows.append({"point": point, "seed": seed, "slot": sm.slot, "metric": name,
                         "value": float(value)})
        add("total_embb", sm.total)
        add("jain", sm.jain)
        add("arrivals", len(sm.arrivals))
        add("matched", len(sm.matching))
        add("dropped", len(sm.dropped))
        add("infeasible", float(sm.infeasible))
        for u, r in sorted(sm.embb_rates.items()):
            add(f"embb_rate[{u}]", r)
        for n, v in sorted(sm.urllc.items()):
            add(f"urllc_rate[{n}]", v["rate"])
        for rec in sm.clusters:
            add(f"power_sum[{rec['cluster']}]", float(np.sum(rec["gamma"])))
            add(f"budget[{rec['cluster']}]", rec["budget"])
    return rows


def run_one(cfg):
    """One replication; returns (seed, metrics, summary) or (seed, error string)."""
    try:
        metrics, summary = run_period(cfg)
        return cfg.seed, metrics, summary, None
    except (SlotInfeasible, ClusteringInfeasible, ConfigError) as exc:
        return cfg.seed, None, None, f"{type(exc).__name__}: {exc}"


def run_experiment(spec: ExperimentSpec, out, workers: int = 1, proxy_oour: bool | None = None) -> int:
    """Run every sweep point x seed; write rows.csv, summary.json and traces.

    Returns 0 when every run finished, 1 if any aborted (finished runs are kept).
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    points = spec.points()
    jobs = []
    for label, over in points:
        base = spec.base.replace(**over)
        if proxy_oour is not None:
            base = base.replace(proxy_oour=proxy_oour)
        for seed in spec.seeds():
            jobs.append((label, base.replace(seed=seed)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, [cfg for _, cfg in jobs]))
    else:
        results = [run_one(cfg) for _, cfg in jobs]

    failed = 0
    by_point = {}
    for (label, cfg), res in zip(jobs, results):
        by_point.setdefault(label, []).append((cfg, res))
    for label, runs in by_point.items():
        pdir = out if len(points) == 1 else out / label
        (pdir / "trace").mkdir(parents=True, exist_ok=True)
        rows, per_seed, errors = [], [], {}
        for cfg, (seed, metrics, summary, err) in runs:
            if err is not None:
                failed += 1
                errors[str(seed)] = err
                log.error("point %s seed %d aborted: %s", label, seed, err)
                continue
            rows.extend(_metric_rows(label, seed, metrics))
            per_seed.append(dict(summary.as_dict(), seed=seed))
            for sm in metrics:
                write_json(pdir / "trace" / f"{seed}-{sm.slot}.json", sm.as_record())
        cfg0 = runs[0][0].replace(seed=spec.seed0)
        (pdir / "config.ini").write_text(config_to_text(cfg0), encoding="utf-8")
        write_rows(pdir / "rows.csv", rows)
        agg = {}
        for key in ("total", "mean_total", "jain", "urllc_served", "urllc_dropped",
                    "latency_violations", "infeasible_slots"):
            vals = [s[key] for s in per_seed if not _isnan(s[key])]
            agg[key] = float(np.mean(vals)) if vals else float("nan")
        write_json(pdir / "summary.json", {
            "point": label, "config": config_to_dict(cfg0), "seeds": [c.seed for c, _ in runs],
            "mean": agg, "runs": per_seed, "errors": errors})
    return 1 if failed else 0


def _isnan(v):
    return isinstance(v, float) and math.isnan(v)


class VerifyError(RuntimeError):
    pass


def _point_dirs(results_dir: Path):
    if (results_dir / "summary.json").exists():
        return [results_dir]
    dirs = sorted(p for p in results_dir.iterdir() if (p / "summary.json").exists())
    if not dirs:
        raise VerifyError(f"no summary.json under {results_dir}")
    return dirs


def verify_run(results_dir, tol: float = 1e-6) -> dict:
    """Replay constraint audits against stored rows and traces."""
    from .io import parse_config
    results_dir = Path(results_dir)
    if not results_dir.exists():
        raise VerifyError(f"results directory not found: {results_dir}")
    violations, checked = [], 0
    for pdir in _point_dirs(results_dir):
        cfg = parse_config(pdir / "config.ini").base
        summary = json.loads((pdir / "summary.json").read_text())
        rows = read_rows(pdir / "rows.csv")
        table = {}
        for r in rows:
            table[(r["seed"], r["slot"], r["metric"])] = r["value"]
        for seed in summary["seeds"]:
            if str(seed) in summary["errors"]:
                continue
            for slot in range(1, cfg.Q + 1):
                path = pdir / "trace" / f"{seed}-{slot}.json"
                if not path.exists():
                    raise VerifyError(f"missing trace file {path}")
                rec = json.loads(path.read_text())
                checked += 1
                where = f"{pdir.name} seed {seed} slot {slot}"
                for c in rec["clusters"]:
                    m = c["cluster"]
                    ps = table.get((seed, slot, f"power_sum[{m}]"))
                    if ps is None:
                        violations.append(f"{where}: power column for cluster {m} missing")
                        continue
                    if ps > c["budget"] + 1e-9:
                        violations.append(f"{where}: cluster {m} power {ps:.6g} exceeds budget")
                    if abs(ps - sum(c["gamma"])) > 1e-9:
                        violations.append(f"{where}: cluster {m} power column disagrees with trace")
                    if any(g <= 0 for g in c["gamma"]):
                        violations.append(f"{where}: cluster {m} nonpositive power")
                    W = c.get("W")
                    if W and any(b > a + 1e-9 for a, b in zip(W, W[1:])):
                        violations.append(f"{where}: cluster {m} W sequence increases")
                    if cfg.scheduler == "adaptive" and not c["relaxed"]:
                        for uid, kind, rate, tgt in zip(c["user_ids"], c["kinds"], c["rates"],
                                                        c["targets"]):
                            if kind == "embb" and rate < tgt - tol:
                                violations.append(f"{where}: eMBB {uid} below R_min")
                            if kind == "urllc" and not latency_ok(cfg.qos, rate * (1 + tol)):
                                violations.append(f"{where}: URLLC {uid} misses delay bound")
                matched = rec["matching"]
                if len(set(matched.values())) != len(matched):
                    violations.append(f"{where}: eMBB slot punctured twice")
                if len(matched) + len(rec["dropped"]) != len(rec["arrivals"]):
                    violations.append(f"{where}: arrivals not all matched or dropped")
    return {"checked_slots": checked, "violations": violations}


__all__ = ["run_experiment", "verify_run", "VerifyError", "audit_slot"]
