"""Fast built-in invariant checks (a subset of the test suite, no pytest needed)."""
from __future__ import annotations

import math

import numpy as np

from .channel import detection_vector, draw_matrix
from .config import QosSpec
from .matching import build_preferences, gale_shapley, is_stable
from .power import allocate, grad_g2, grad_h2, g2, h2, PowerInfeasible
from .rates import EMBB, URLLC, OrderedClusterState, fbl_rate, q_func, q_inv
from .solver import LinearProgram, LogAffineProgram, convex_solve, lp_solve


def _fd(f, x, h=1e-7):
    return np.array([(f(x + e) - f(x - e)) / (2 * h) for e in np.eye(x.size) * h])


def _checks(rng):
    yield "q_inv inverts Q", abs(q_func(q_inv(1e-5)) - 1e-5) < 1e-15
    yield "FBL rate at SINR 3", abs(fbl_rate(3.0, 168, 1e-5) - 1.5404) < 1e-3
    lp = lp_solve(LinearProgram(c=[-1.0], A_ub=[[1.0]], b_ub=[1.0]))
    yield "LP max x s.t. x <= 1", lp.feasible and abs(lp.x[0] - 1) < 1e-12
    prog = LogAffineProgram(1, obj_terms=([-1.0], [[1.0]], [0.0]), c=[1.0], lower=[0.0])
    yield "barrier -log x + x", abs(convex_solve(prog, [3.0]).x[0] - 1) < 1e-6

    worst = 0.0
    for _ in range(200):
        H = draw_matrix(rng, 3, 3)
        for m in range(3):
            v = detection_vector(H, m)
            worst = max(worst, max(abs(np.vdot(v, H[:, j])) for j in range(3) if j != m))
    yield "zero-forcing residual", worst < 1e-9

    ok = True
    for _ in range(200):
        nu, ne = rng.integers(1, 4), rng.integers(3, 7)
        table = {(n, e): float(rng.normal()) for n in range(nu) for e in range(ne)
                 if rng.random() > 0.2}
        counts = {e: int(rng.integers(0, 3)) for e in range(ne)}
        prefs = build_preferences(range(nu), range(ne), table, counts)
        ok &= is_stable(gale_shapley(prefs), prefs)
    yield "Gale-Shapley stability", ok

    qos = QosSpec()
    g = np.sort(rng.exponential(size=3) * 3)[::-1]
    st = OrderedClusterState(0, (0, 1, 2), (EMBB, URLLC, EMBB), g, np.full(3, 1e-3), 0.5)
    x = rng.uniform(0.05, 0.15, 3)
    err = np.max(np.abs(_fd(lambda y: g2(st, y), x) - grad_g2(st, x)))
    err = max(err, np.max(np.abs(_fd(lambda y: h2(st, y, 1), x) - grad_h2(st, x, 1))))
    yield "analytic gradients", err < 1e-5

    mono = True
    for _ in range(5):
        g = np.sort(rng.exponential(size=3) * 3)[::-1]
        st = OrderedClusterState.build(0, [(0, EMBB, g[0], 1.0), (1, URLLC, g[1], qos.urllc_rate),
                                           (2, EMBB, g[2], 1.0)], 1000.0, 1 / 3)
        try:
            _, tr = allocate(st, qos)
        except PowerInfeasible:
            continue
        mono &= bool(np.all(np.diff(tr.values) <= 1e-9))
    yield "SCA values non-increasing", mono


def run_selftest(verbose: bool = True, seed: int = 12345) -> int:
    rng = np.random.default_rng(seed)
    failures = 0
    for name, ok in _checks(rng):
        failures += not ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
    if verbose:
        print(f"{failures} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(run_selftest())
