"""Compiled barrier path-following loop.

Same arithmetic as the numpy methods on LogAffineProgram, written as plain
loops so numba can compile it; the SCA inner solves are tiny and dominated
by interpreter overhead otherwise.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def objective(x, a, Ao, bo, c, d):
    val = d
    for i in range(x.size):
        val += c[i] * x[i]
    for t in range(a.size):
        arg = bo[t]
        for i in range(x.size):
            arg += Ao[t, i] * x[i]
        val += a[t] * math.log(arg)
    return val


@njit(cache=True)
def barrier_value(x, mu, a, Ao, bo, c, d, b, Ac, bc, owner, E, f, G, h, lower, bounded):
    n = x.size
    val = d
    for i in range(n):
        val += c[i] * x[i]
    for t in range(a.size):
        arg = bo[t]
        for i in range(n):
            arg += Ao[t, i] * x[i]
        if arg <= 0.0:
            return np.inf
        val += a[t] * math.log(arg)
    J = f.size
    if J:
        cval = f.copy()
        for j in range(J):
            for i in range(n):
                cval[j] += E[j, i] * x[i]
        for t in range(b.size):
            arg = bc[t]
            for i in range(n):
                arg += Ac[t, i] * x[i]
            if arg <= 0.0:
                return np.inf
            cval[owner[t]] += b[t] * math.log(arg)
        for j in range(J):
            if not cval[j] > 0.0:
                return np.inf
            val -= mu * math.log(cval[j])
    for r in range(h.size):
        s = h[r]
        for i in range(n):
            s -= G[r, i] * x[i]
        if not s > 0.0:
            return np.inf
        val -= mu * math.log(s)
    for i in range(n):
        if bounded[i]:
            s = x[i] - lower[i]
            if not s > 0.0:
                return np.inf
            val -= mu * math.log(s)
    return val


@njit(cache=True)
def barrier_parts(x, mu, a, Ao, bo, c, d, b, Ac, bc, owner, E, f, G, h, lower, bounded):
    n = x.size
    grad = c.copy()
    hess = np.zeros((n, n))
    val = d
    for i in range(n):
        val += c[i] * x[i]
    for t in range(a.size):
        arg = bo[t]
        for i in range(n):
            arg += Ao[t, i] * x[i]
        val += a[t] * math.log(arg)
        w1 = a[t] / arg
        w2 = -a[t] / (arg * arg)
        for i in range(n):
            grad[i] += w1 * Ao[t, i]
            for k in range(n):
                hess[i, k] += w2 * Ao[t, i] * Ao[t, k]
    J = f.size
    if J:
        cval = f.copy()
        jac = E.copy()
        args = np.empty(b.size)
        for j in range(J):
            for i in range(n):
                cval[j] += E[j, i] * x[i]
        for t in range(b.size):
            arg = bc[t]
            for i in range(n):
                arg += Ac[t, i] * x[i]
            args[t] = arg
            j = owner[t]
            cval[j] += b[t] * math.log(arg)
            for i in range(n):
                jac[j, i] += b[t] / arg * Ac[t, i]
        for j in range(J):
            val -= mu * math.log(cval[j])
            inv = 1.0 / cval[j]
            for i in range(n):
                grad[i] -= mu * jac[j, i] * inv
                for k in range(n):
                    hess[i, k] += mu * jac[j, i] * jac[j, k] * inv * inv
        for t in range(b.size):
            w = mu * b[t] / (args[t] * args[t] * cval[owner[t]])
            for i in range(n):
                for k in range(n):
                    hess[i, k] += w * Ac[t, i] * Ac[t, k]
    for r in range(h.size):
        s = h[r]
        for i in range(n):
            s -= G[r, i] * x[i]
        val -= mu * math.log(s)
        inv = 1.0 / s
        for i in range(n):
            grad[i] += mu * G[r, i] * inv
            for k in range(n):
                hess[i, k] += mu * G[r, i] * G[r, k] * inv * inv
    for i in range(n):
        if bounded[i]:
            s = x[i] - lower[i]
            val -= mu * math.log(s)
            grad[i] -= mu / s
            hess[i, i] += mu / (s * s)
    return val, grad, hess


@njit(cache=True)
def _cholesky_solve(A, rhs):
    """Solve A y = rhs for symmetric A; returns (y, ok)."""
    n = rhs.size
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return rhs, False
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    y = rhs.copy()
    for i in range(n):
        for k in range(i):
            y[i] -= L[i, k] * y[k]
        y[i] /= L[i, i]
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, n):
            y[i] -= L[k, i] * y[k]
        y[i] /= L[i, i]
    return y, True


@njit(cache=True)
def newton_direction(hess, grad):
    """Jacobi-scaled Cholesky solve of hess dx = -grad, ridged if needed."""
    n = grad.size
    d = np.empty(n)
    for i in range(n):
        d[i] = 1.0 / math.sqrt(hess[i, i]) if hess[i, i] > 0.0 else 1.0
    A = np.empty((n, n))
    for i in range(n):
        for k in range(n):
            A[i, k] = d[i] * hess[i, k] * d[k]
    rhs = -grad * d
    ridge = 0.0
    for _ in range(12):
        y, ok = _cholesky_solve(A, rhs)
        if ok:
            return y * d
        ridge = 1e-12 if ridge == 0.0 else ridge * 100.0
        for i in range(n):
            A[i, i] += ridge
    return -grad


@njit(cache=True)
def _max_step(x, dx, G, h, lower, bounded, frac):
    n = x.size
    t = 1.0
    for r in range(h.size):
        s = h[r]
        ds = 0.0
        for i in range(n):
            s -= G[r, i] * x[i]
            ds -= G[r, i] * dx[i]
        if ds < 0.0:
            t = min(t, frac * (-s / ds))
    for i in range(n):
        if bounded[i] and dx[i] < 0.0:
            t = min(t, frac * (-(x[i] - lower[i]) / dx[i]))
    return t


@njit(cache=True)
def path_follow(x0, m, mu0, mu_factor, stop_gap, armijo, shrink, max_backtracks, newton_tol,
                inner_tol, max_newton, frac, a, Ao, bo, c, d, b, Ac, bc, owner, E, f, G, h,
                lower, bounded):
    """Returns (x, final mu, newton steps, status, outer objectives); status 1 = line search failed."""
    x = x0.copy()
    mu = mu0
    steps = 0
    outer = []
    while True:
        last = mu * m <= stop_gap
        tol = newton_tol if last else inner_tol
        for _ in range(max_newton):
            val, grad, hess = barrier_parts(x, mu, a, Ao, bo, c, d, b, Ac, bc, owner, E, f, G, h,
                                            lower, bounded)
            dx = newton_direction(hess, grad)
            slope = 0.0
            for i in range(x.size):
                slope += grad[i] * dx[i]
            if -slope / 2.0 <= tol:
                break
            if slope >= 0.0:
                dx = -grad
                slope = 0.0
                for i in range(x.size):
                    slope -= grad[i] * grad[i]
            t = _max_step(x, dx, G, h, lower, bounded, frac)
            ok = False
            for _ in range(max_backtracks):
                x_new = x + t * dx
                if barrier_value(x_new, mu, a, Ao, bo, c, d, b, Ac, bc, owner, E, f, G, h,
                                 lower, bounded) <= val + armijo * t * slope:
                    ok = True
                    break
                t *= shrink
            if not ok:
                if -slope <= 1e-9 * max(1.0, abs(val)):
                    break
                return x, mu, steps, 1, outer
            steps += 1
            x = x_new
        outer.append(objective(x, a, Ao, bo, c, d))
        if last:
            break
        mu /= mu_factor
    return x, mu, steps, 0, outer
