"""Compiled inner loops for long simplex-map trajectories."""

import numpy as np
from numba import njit


@njit(cache=True)
def simplex_step(M, u, out):
    n = u.size
    total = 0.0
    for k in range(n):
        acc = 0.0
        for i in range(n):
            ui = u[i]
            if ui == 0.0:
                continue
            base = i * n
            for p in range(n):
                acc += M[base + p, k] * ui * u[p]
        out[k] = acc
        total += acc
    for k in range(n):
        out[k] /= total


@njit(cache=True)
def run_chunk(M, u, nsteps, tol, btol, still, near_boundary, confirm, out):
    """Advance ``nsteps`` steps from ``u`` writing rows into ``out``.

    Stops early once ``confirm`` consecutive steps are shorter than ``tol``.
    Returns ``(steps_done, still, near_boundary, last_gap)``.
    """
    n = u.size
    prev = u.copy()
    gap = np.inf
    for t in range(nsteps):
        simplex_step(M, prev, out[t])
        gap = 0.0
        lo = np.inf
        for k in range(n):
            d = abs(out[t, k] - prev[k])
            if d > gap:
                gap = d
            if out[t, k] < lo:
                lo = out[t, k]
        still = still + 1 if gap < tol else 0
        near_boundary = near_boundary + 1 if lo < btol else 0
        prev[:] = out[t]
        if still >= confirm:
            return t + 1, still, near_boundary, gap
    return nsteps, still, near_boundary, gap


@njit(cache=True)
def run_orbit(M, u, nsteps, out):
    out[0] = u
    for t in range(nsteps):
        simplex_step(M, out[t], out[t + 1])
