"""Independent feasibility checks.

Nothing here touches solver internals: cone programs are re-evaluated from
their stored data, and plans are checked against the original (non-convexified)
flight, rate and queue constraints with the true channel models.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def constraint_violations(prog, x) -> dict:
    """Largest violation per constraint family, in program units (0 when met)."""
    x = np.asarray(x, dtype=float)
    out = {}
    if prog.eq_A.shape[0]:
        out["eq"] = float(np.max(np.abs(prog.eq_A @ x - prog.eq_b)))
    if prog.ineq_G.shape[0]:
        out["ineq"] = float(max(0.0, np.max(prog.ineq_G @ x - prog.ineq_h)))
    worst = 0.0
    for con in prog.socs:
        lhs = np.sqrt(np.sum((con.A @ x + con.b) ** 2))
        worst = max(worst, lhs - (con.c @ x + con.d))
    if prog.socs:
        out["soc"] = float(max(worst, 0.0))
    worst = 0.0
    for con in prog.quads:
        worst = max(worst, x @ (con.Q @ x) + con.q @ x - con.r)
    if prog.quads:
        out["quad"] = float(max(worst, 0.0))
    return out


@dataclass
class PlanReport:
    ok: bool
    violations: dict = field(default_factory=dict)

    def __str__(self):
        if self.ok:
            return "plan verified"
        return "; ".join(f"{k}: {v:.3e}" for k, v in self.violations.items())


def verify_plan(traj, plan, fso, rf, buffer_bits, slot_s, v_max, a_max,
                delay_req_slots=None, rel_tol=1e-6, kin_tol=1e-6):
    """Check a trajectory/rate pair against the original problem.

    Rates are compared with the exact FSO/RF models at the trajectory's
    positions; the queue is rebuilt here by its own loop.
    """
    v = {}
    pos = np.asarray(traj.pos, dtype=float)
    vel = np.asarray(traj.vel, dtype=float)
    acc = np.asarray(traj.acc, dtype=float)
    dt = slot_s

    # kinematics
    kin = 0.0
    for n in range(acc.shape[0]):
        q_next = pos[n] + vel[n] * dt + 0.5 * acc[n] * dt * dt
        v_next = vel[n] + acc[n] * dt
        kin = max(kin, float(np.max(np.abs(q_next - pos[n + 1]))), float(np.max(np.abs(v_next - vel[n + 1]))))
    if kin > kin_tol * max(1.0, float(np.max(np.abs(pos)))):
        v["kinematics"] = kin
    speed = max(float(np.hypot(*vel[n])) for n in range(vel.shape[0]))
    if speed > v_max * (1 + rel_tol) + kin_tol:
        v["speed"] = speed - v_max
    accel = max((float(np.hypot(*acc[n])) for n in range(acc.shape[0])), default=0.0)
    if accel > a_max * (1 + rel_tol) + kin_tol:
        v["acceleration"] = accel - a_max

    # rates with the exact channel models, evaluated point by point
    c_sr = np.asarray(plan.c_sr, dtype=float)
    c_rd = np.asarray(plan.c_rd, dtype=float)
    N = c_sr.size
    h = traj.altitude
    src = np.asarray(fso.src_pos, dtype=float)
    dst = np.asarray(rf.dst_pos, dtype=float)
    worst_fso = worst_rf = 0.0
    for n in range(1, N + 1):
        p3 = np.array([pos[n, 0], pos[n, 1], h])
        d_s = float(np.sqrt(np.sum((p3 - src) ** 2)))
        r_fso = fso.bandwidth_hz / 2.0 * np.log1p(fso.k1 * np.exp(-fso.k2 * d_s)) / np.log(2.0)
        worst_fso = max(worst_fso, c_sr[n - 1] - r_fso * (1 + rel_tol))
        if n >= 2:
            z = float(np.sum((p3 - dst) ** 2))
            r_rf = rf.bandwidth_hz * np.log1p(rf.gamma0 / z**rf.alpha) / np.log(2.0)
            worst_rf = max(worst_rf, c_rd[n - 2] - r_rf * (1 + rel_tol))
    if worst_fso > 0:
        v["fso_rate"] = worst_fso
    if worst_rf > 0:
        v["rf_rate"] = worst_rf
    if np.any(c_sr < -1e-9) or np.any(c_rd < -1e-9):
        v["negative_rate"] = float(min(c_sr.min(initial=0.0), c_rd.min(initial=0.0)))

    # queue: causality, buffer, delay
    q = 0.0
    qs = []
    neg = over = 0.0
    scale = max(1.0, float(np.max(c_sr, initial=0.0)) * dt)
    for n in range(1, N + 1):
        out_bits = c_rd[n - 2] * dt if n >= 2 else 0.0
        q = q + c_sr[n - 1] * dt - out_bits
        qs.append(q)
        neg = min(neg, q)
        if np.isfinite(buffer_bits):
            over = max(over, q - buffer_bits)
    if neg < -rel_tol * scale:
        v["causality"] = neg
    if over > rel_tol * scale:
        v["buffer"] = over
    if delay_req_slots is not None and np.isfinite(delay_req_slots):
        excess = sum(qs) - delay_req_slots * dt * float(np.sum(c_sr))
        if excess > rel_tol * scale * N:
            v["delay"] = excess
    return PlanReport(not v, v)
