import argparse
import json
import sys
from pathlib import Path


def parser(doc, seeds=50):
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--seeds", type=int, default=seeds, help="number of seeds (0..n-1)")
    p.add_argument("--out", default=None, help="optional JSON file for the trend table")
    return p


def progress(name, done, total):
    print(f"  {name}: {done}/{total} seeds", file=sys.stderr, flush=True)


def dump(trend, path):
    if path:
        Path(path).write_text(json.dumps({
            "name": trend.name, "metric": trend.metric, "points": [str(p) for p in trend.points],
            "means": trend.means.tolist(), "values": trend.values.tolist(),
            "dropped": trend.extra["dropped"].tolist()}, indent=1))
