"""Iteration counts and decrement ratios of the SCA loop on random instances."""
import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from test_acceptance import QOS, random_sca_instance  # noqa: E402

from noma_coexist.power import sca_dc_allocate  # noqa: E402

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    iters, conv, ratios, rises = [], 0, [], []
    for _ in range(args.instances):
        state, gp = random_sca_instance(rng)
        _, tr = sca_dc_allocate(state, gp, QOS, max_iter=args.max_iter)
        d = -np.diff(tr.values)
        rises.append(float(np.max(-d)))
        iters.append(tr.iterations)
        conv += tr.converged
        tail = d[-10:]
        if tail.size > 1 and np.all(tail[:-1] > 0):
            ratios.append(float(np.median(tail[1:] / tail[:-1])))
    print(f"converged {conv}/{args.instances} within {args.max_iter} iterations")
    print(f"iterations: median {int(np.median(iters))}, max {max(iters)}")
    print(f"largest W increase: {max(rises):.2e}")
    if ratios:
        print(f"late decrement ratio: median {np.median(ratios):.4f} (near 1 means sublinear)")
