"""Exhaustive grid oracle for the four-slot miniature scenario."""
import itertools
import math

import numpy as np
from scipy.optimize import linprog

from relayplan.channel import link_models
from relayplan.queue import greedy_arrays
from relayplan.scenario import load_preset


def toy_params(**kw):
    base = load_preset("calibrated")
    return base.with_updates(dst_pos=(200.0, 0.0, 0.0), num_slots=4, **kw)


def feasible_tuples(p, grid):
    """Along-axis position tuples (slots 1..N) reachable under the speed and acceleration limits.

    On a line every velocity is affine in v1 with slope +-1, so each limit
    cuts v1 to an interval; a tuple is reachable when the intersection is non-empty.
    """
    N, dt, V, A = p.num_slots, p.slot_s, p.v_max, p.a_max
    pos = np.array(list(itertools.product(grid, repeat=N)))
    steps = np.diff(pos, axis=1) / dt
    # v_n = sign_n * v1 + off_n
    sign = np.ones(N)
    off = np.zeros((pos.shape[0], N))
    for n in range(1, N):
        sign[n] = -sign[n - 1]
        off[:, n] = 2 * steps[:, n - 1] - off[:, n - 1]
    lo = np.full(pos.shape[0], -V)
    hi = np.full(pos.shape[0], V)
    for n in range(N):
        # |sign*v1 + off| <= V
        a, b = (-V - off[:, n]) * sign[n], (V - off[:, n]) * sign[n]
        lo, hi = np.maximum(lo, np.minimum(a, b)), np.minimum(hi, np.maximum(a, b))
    for n in range(N - 1):
        # a_n = (v_{n+1} - v_n)/dt = ((sign_{n+1}-sign_n) v1 + off_{n+1} - off_n)/dt
        s = (sign[n + 1] - sign[n]) / dt
        o = (off[:, n + 1] - off[:, n]) / dt
        a, b = (-A - o) / s, (A - o) / s
        lo, hi = np.maximum(lo, np.minimum(a, b)), np.minimum(hi, np.maximum(a, b))
    return pos[lo <= hi + 1e-9]


def lp_throughput(r_fso, r_rf, p, delay_limited):
    """Best rate plan for fixed capacities, by linear programming."""
    N, dt = r_fso.size, p.slot_s
    nv = 2 * N - 1  # c_sr[0..N-1], c_rd[1..N-1]
    c = np.zeros(nv)
    c[N:] = -1.0
    rows, rhs = [], []
    # cumulative queue Q_n >= 0 and <= L_Q
    for n in range(N):
        row = np.zeros(nv)
        row[: n + 1] = dt
        row[N: N + n] = -dt
        rows.append(-row)
        rhs.append(0.0)
        if math.isfinite(p.buffer_bits):
            rows.append(row)
            rhs.append(p.buffer_bits)
    if delay_limited:
        row = np.zeros(nv)
        for n in range(N):
            row[: n + 1] += dt
            row[N: N + n] -= dt
        row[:N] -= p.delay_req_slots * dt
        rows.append(row)
        rhs.append(0.0)
    bounds = [(0, r) for r in r_fso] + [(0, r) for r in r_rf[1:]]
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
    assert res.status == 0
    return -res.fun / (N - 1)


def grid_optimum(p, points=21, delay_limited=True):
    fso, rf = link_models(p)
    length = p.dst_pos[0] - p.src_pos[0]
    grid = np.linspace(0.0, length, points)
    tuples = feasible_tuples(p, grid)
    pts = np.stack([tuples, np.zeros_like(tuples), np.full(tuples.shape, p.altitude)], axis=-1)
    from relayplan.channel import fso_rate, rf_rate
    R_f, R_r = fso_rate(fso, pts), rf_rate(rf, pts)
    # greedy is optimal without the delay cap, so it bounds the delay-limited value from above
    upper = np.array([np.sum(greedy_arrays(a, b, p.buffer_bits, p.slot_s)[1]) / (p.num_slots - 1)
                      for a, b in zip(R_f, R_r)])
    if not delay_limited:
        k = int(np.argmax(upper))
        return float(upper[k]), tuples[k]
    best, arg = -np.inf, None
    for k in np.argsort(-upper):
        if upper[k] <= best:
            break
        val = lp_throughput(R_f[k], R_r[k], p, True)
        if val > best:
            best, arg = val, tuples[k]
    return float(best), arg
