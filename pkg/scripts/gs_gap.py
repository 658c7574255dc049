"""Gap between deferred-acceptance matching and exhaustive assignment."""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from test_acceptance import criterion_5  # noqa: E402

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--instances", type=int, default=200)
    ok, detail = criterion_5(p.parse_args().instances)
    print(detail)
