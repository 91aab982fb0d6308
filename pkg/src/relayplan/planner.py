"""Trajectory and rate planning by successive convex approximation.

Each round linearises both link rates around a reference trajectory, solves
the resulting cone program, and re-centres on its optimum. Inside the cone
programs distances are kilometres, rates Mbit/s and queue contents Mbit.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import socp
from .channel import (LN2, FsoLinkModel, RfLinkModel, fso_taylor_coefficients, link_models,
                      rf_taylor_coefficients)
from .queue import QueueTrace, RatePlan, evolve_queue, greedy_arrays, greedy_rates, link_rates
from .scenario import ScenarioParams, Trajectory
from .tables import write_keyvalue, write_table

log = logging.getLogger(__name__)

KM = 1e3
MBIT = 1e6

DELAY_LIMITED = "delay_limited"
DELAY_TOLERANT = "delay_tolerant"
MODES = (DELAY_LIMITED, DELAY_TOLERANT)

INIT_MODES = ("midpoint", "source", "destination", "sweep")
FSO_SURROGATES = ("tangent", "high_snr")

# constraint groups counted in the census of the subproblem
CENSUS_GROUPS = ("kinematics", "acc", "vel", "fso_rate", "rf_rate", "causal",
                 "queue_lo", "queue_hi", "delay")


class PlannerError(RuntimeError):
    pass


class InitializationError(PlannerError):
    """Endpoint constraints cannot be met within the horizon."""


class SolverFailure(PlannerError):
    def __init__(self, msg, partial=None, solution=None):
        super().__init__(msg)
        self.partial = partial
        self.solution = solution


def normalize_mode(mode: str) -> str:
    m = mode.replace("-", "_").lower()
    if m not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    return m


# ---------------------------------------------------------------------------
# initial trajectories


def initialize_trajectory(p: ScenarioParams, how: str = "midpoint") -> Trajectory:
    """Kinematically feasible starting path.

    With endpoint constraints enabled the ``how`` choice is ignored and the
    minimum-effort path meeting the endpoints is used.
    """
    if p.has_endpoint_constraints:
        return _endpoint_initializer(p)
    src = np.asarray(p.src_pos[:2])
    dst = np.asarray(p.dst_pos[:2])
    N, dt = p.num_slots, p.slot_s
    if how == "midpoint":
        return Trajectory.hover(0.5 * (src + dst), N, p.altitude, dt)
    if how == "source":
        return Trajectory.hover(src, N, p.altitude, dt)
    if how == "destination":
        return Trajectory.hover(dst, N, p.altitude, dt)
    if how == "sweep":
        length = float(np.linalg.norm(dst - src))
        unit = (dst - src) / length if length > 0 else np.zeros(2)
        speed = min(length / ((N + 1) * dt), p.v_max)
        steps = np.arange(N + 2)[:, None]
        pos = src + unit * speed * dt * steps
        vel = np.tile(unit * speed, (N + 2, 1))
        return Trajectory(pos, vel, np.zeros((N + 1, 2)), p.altitude, dt)
    raise ValueError(f"unknown initializer {how!r}; expected one of {', '.join(INIT_MODES)}")


@dataclass
class VarIndex:
    """Column indices of every variable block in a subproblem."""

    num_slots: int
    px: np.ndarray
    py: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    ts: np.ndarray = None
    td: np.ndarray = None
    ds: np.ndarray = None
    q: np.ndarray = None
    extra: dict = field(default_factory=dict)
    size: int = 0

    @classmethod
    def kinematic(cls, N):
        sizes = (N + 2, N + 2, N + 2, N + 2, N + 1, N + 1)
        starts = np.cumsum((0,) + sizes)
        blocks = [np.arange(a, a + k) for a, k in zip(starts, sizes)]
        return cls(N, *blocks, size=int(starts[-1]))

    def add(self, name, k):
        start = self.size
        arr = np.arange(start, start + k)
        self.size += k
        if name in ("ts", "td", "ds", "q"):
            setattr(self, name, arr)
        else:
            self.extra[name] = arr
        return arr


class _Builder:
    """Accumulates constraint rows as sparse triplets with tags."""

    def __init__(self, nvars):
        self.nvars = nvars
        self.eq = ([], [], [], [], [])  # rows, cols, vals, rhs, tags
        self.le = ([], [], [], [], [])
        self.socs = []
        self.quads = []

    def _add(self, store, terms, rhs, tag):
        r = len(store[3])
        for col, val in terms:
            store[0].append(r)
            store[1].append(int(col))
            store[2].append(float(val))
        store[3].append(float(rhs))
        store[4].append(tag)

    def eq_row(self, terms, rhs, tag):
        self._add(self.eq, terms, rhs, tag)

    def le_row(self, terms, rhs, tag):
        self._add(self.le, terms, rhs, tag)

    def soc(self, rows, consts, bound_terms, bound_const, tag):
        """||(rows . x + consts)|| <= bound_terms . x + bound_const."""
        k = len(rows)
        r, c, v = [], [], []
        for i, terms in enumerate(rows):
            for col, val in terms:
                r.append(i)
                c.append(int(col))
                v.append(float(val))
        A = sp.csr_matrix((v, (r, c)), shape=(k, self.nvars))
        cvec = np.zeros(self.nvars)
        for col, val in bound_terms:
            cvec[col] += val
        self.socs.append(socp.SocConstraint(A, np.asarray(consts, dtype=float), cvec, float(bound_const), tag))

    def quad(self, diag_terms, lin_terms, rhs, tag):
        cols = [c for c, _ in diag_terms]
        vals = [v for _, v in diag_terms]
        Q = sp.csr_matrix((vals, (cols, cols)), shape=(self.nvars, self.nvars))
        q = np.zeros(self.nvars)
        for col, val in lin_terms:
            q[col] += val
        self.quads.append(socp.QuadConstraint(Q, q, float(rhs), tag))

    def program(self, objective):
        def mat(store):
            return sp.csr_matrix((store[2], (store[0], store[1])), shape=(len(store[3]), self.nvars))

        return socp.ConeProgram(self.nvars, objective, mat(self.eq), np.array(self.eq[3]),
                                mat(self.le), np.array(self.le[3]), self.socs, self.quads,
                                list(self.eq[4]), list(self.le[4]))


def _kinematic_rows(b: _Builder, idx: VarIndex, p: ScenarioParams):
    N, dt = idx.num_slots, p.slot_s
    for n in range(N + 1):
        for comp, P, V, A in (("x", idx.px, idx.vx, idx.ax), ("y", idx.py, idx.vy, idx.ay)):
            b.eq_row([(V[n + 1], 1.0), (V[n], -1.0), (A[n], -dt)], 0.0, ("kinematics", n, "v" + comp))
            b.eq_row([(P[n + 1], 1.0), (P[n], -1.0), (V[n], -dt), (A[n], -0.5 * dt * dt)], 0.0,
                     ("kinematics", n, "q" + comp))
    for n in range(N + 1):
        b.soc([[(idx.ax[n], 1.0)], [(idx.ay[n], 1.0)]], [0.0, 0.0], [], p.a_max / KM, ("acc", n))
    for n in range(1, N + 1):
        b.soc([[(idx.vx[n], 1.0)], [(idx.vy[n], 1.0)]], [0.0, 0.0], [], p.v_max / KM, ("vel", n))
    ends = ((p.initial_pos, idx.px, idx.py, 0, "initial_pos"), (p.final_pos, idx.px, idx.py, N + 1, "final_pos"),
            (p.initial_vel, idx.vx, idx.vy, 0, "initial_vel"), (p.final_vel, idx.vx, idx.vy, N + 1, "final_vel"))
    for val, X, Y, slot, name in ends:
        if val is not None:
            b.eq_row([(X[slot], 1.0)], val[0] / KM, ("endpoint", name, "x"))
            b.eq_row([(Y[slot], 1.0)], val[1] / KM, ("endpoint", name, "y"))


def _endpoint_initializer(p: ScenarioParams) -> Trajectory:
    N = p.num_slots
    idx = VarIndex.kinematic(N)
    eps = idx.add("effort", N + 1)
    b = _Builder(idx.size)
    _kinematic_rows(b, idx, p)
    for n in range(N + 1):
        b.soc([[(idx.ax[n], 1.0)], [(idx.ay[n], 1.0)]], [0.0, 0.0], [(eps[n], 1.0)], 0.0, ("effort", n))
    obj = np.zeros(idx.size)
    obj[eps] = -1.0
    sol = socp.solve(b.program(obj), tol=1e-9, max_iters=200)
    if sol.status == socp.INFEASIBLE:
        raise InitializationError("endpoint constraints cannot be met within the horizon at "
                                  f"v_max={p.v_max}, a_max={p.a_max}")
    if not sol.ok:
        raise InitializationError(f"endpoint initializer failed: {sol.status}")
    x = sol.x
    acc = np.column_stack([x[idx.ax], x[idx.ay]]) * KM
    acc = _clip_norms(acc, p.a_max)
    pos0 = np.array([x[idx.px[0]], x[idx.py[0]]]) * KM
    vel0 = np.array([x[idx.vx[0]], x[idx.vy[0]]]) * KM
    if p.initial_pos is not None:
        pos0 = np.asarray(p.initial_pos[:2])
    if p.initial_vel is not None:
        vel0 = np.asarray(p.initial_vel[:2])
    traj = Trajectory.from_accelerations(pos0, vel0, acc, p.altitude, p.slot_s)
    bad = traj.violations(p.v_max, p.a_max, tol=1e-5)
    for val, got in ((p.final_pos, traj.pos[-1]), (p.final_vel, traj.vel[-1])):
        if val is not None and np.max(np.abs(np.asarray(val[:2]) - got)) > 1e-3:
            bad.append("endpoint mismatch")
    if bad:
        raise InitializationError("endpoint initializer is not feasible: " + "; ".join(bad))
    return traj


def _clip_norms(vec, limit):
    norms = np.linalg.norm(vec, axis=1)
    scale = np.where(norms > limit, limit / np.where(norms > 0, norms, 1.0), 1.0)
    return vec * scale[:, None]


# ---------------------------------------------------------------------------
# subproblem


@dataclass
class Subproblem:
    program: socp.ConeProgram
    index: VarIndex
    mode: str
    fso_surrogate: str

    def census(self) -> int:
        """Number of constraints, grouped by constraint family."""
        return len({t for t in self.program.tags() if t and t[0] in CENSUS_GROUPS})

    def trajectory(self, x, p: ScenarioParams) -> Trajectory:
        """Trajectory from a primal vector, re-integrated so kinematics hold exactly."""
        idx = self.index
        acc = _clip_norms(np.column_stack([x[idx.ax], x[idx.ay]]) * KM, p.a_max)
        pos0 = np.array([x[idx.px[0]], x[idx.py[0]]]) * KM
        vel0 = np.array([x[idx.vx[0]], x[idx.vy[0]]]) * KM
        if p.initial_pos is not None:
            pos0 = np.asarray(p.initial_pos[:2], dtype=float)
        if p.initial_vel is not None:
            vel0 = np.asarray(p.initial_vel[:2], dtype=float)
        return Trajectory.from_accelerations(pos0, vel0, acc, p.altitude, p.slot_s)

    def rates(self, x):
        return x[self.index.ts] * MBIT, x[self.index.td] * MBIT

    def point(self, traj: Trajectory, c_sr, c_rd, dist=None) -> np.ndarray:
        """Primal vector for a trajectory and rate plan (used for feasibility checks)."""
        idx = self.index
        x = np.zeros(self.program.num_vars)
        x[idx.px], x[idx.py] = traj.pos[:, 0] / KM, traj.pos[:, 1] / KM
        x[idx.vx], x[idx.vy] = traj.vel[:, 0] / KM, traj.vel[:, 1] / KM
        x[idx.ax], x[idx.ay] = traj.acc[:, 0] / KM, traj.acc[:, 1] / KM
        x[idx.ts] = np.asarray(c_sr) / MBIT
        x[idx.td] = np.asarray(c_rd) / MBIT
        if dist is None:
            dist = np.linalg.norm(traj.positions3d() - np.asarray(idx.extra["src"]), axis=1)
        x[idx.ds] = np.asarray(dist) / KM
        full_rd = np.concatenate([[0.0], c_rd])
        x[idx.q] = np.cumsum(np.asarray(c_sr) - full_rd) * idx.extra["dt"][0] / MBIT
        return x


def build_subproblem(p: ScenarioParams, fso: FsoLinkModel, rf: RfLinkModel, ref: Trajectory,
                     mode: str = DELAY_LIMITED, fso_surrogate: str = "tangent") -> Subproblem:
    mode = normalize_mode(mode)
    if fso_surrogate not in FSO_SURROGATES:
        raise ValueError(f"unknown FSO surrogate {fso_surrogate!r}")
    N, dt, H = p.num_slots, p.slot_s, p.altitude
    idx = VarIndex.kinematic(N)
    ts = idx.add("ts", N)
    td = idx.add("td", N - 1)
    ds = idx.add("ds", N)
    qv = idx.add("q", N)
    src = np.asarray(fso.src_pos, dtype=float)
    dst = np.asarray(rf.dst_pos, dtype=float)
    idx.extra["src"] = src
    idx.extra["dt"] = np.array([dt])
    b = _Builder(idx.size)
    _kinematic_rows(b, idx, p)

    # FSO hop: distance epigraph and a rate bound that is affine in it
    ref_pts = ref.positions3d()
    bm_fso = fso.bandwidth_hz / MBIT
    if fso_surrogate == "tangent":
        r0, slope, dk = fso_taylor_coefficients(fso, ref_pts)
        const = r0 / MBIT - slope * dk / MBIT
        per_km = slope * KM / MBIT
    else:
        const = np.full(N, bm_fso / (2 * LN2) * math.log(fso.k1))
        per_km = np.full(N, -bm_fso / (2 * LN2) * fso.k2 * KM)
    for n in range(N):
        slot = n + 1
        b.soc([[(idx.px[slot], 1.0)], [(idx.py[slot], 1.0)], []],
              [-src[0] / KM, -src[1] / KM, (H - src[2]) / KM], [(ds[n], 1.0)], 0.0, ("aux_dist", slot))
        b.le_row([(ts[n], 1.0), (ds[n], -per_km[n])], const[n], ("fso_rate", slot))
        b.le_row([(ts[n], -1.0)], 0.0, ("fso_rate", slot))

    # RF hop: concave quadratic lower bound around the reference
    a_k, b_k, z_k = rf_taylor_coefficients(rf, ref_pts)
    bm_rf = rf.bandwidth_hz / MBIT
    dz2 = ((H - dst[2]) / KM) ** 2
    for n in range(1, N):
        slot = n + 1
        coef = bm_rf * b_k[n] * KM * KM  # Mbit/s per km^2
        rhs = bm_rf * (a_k[n] + b_k[n] * z_k[n]) - coef * ((dst[0] / KM) ** 2 + (dst[1] / KM) ** 2 + dz2)
        b.quad([(idx.px[slot], coef), (idx.py[slot], coef)],
               [(idx.px[slot], -2 * coef * dst[0] / KM), (idx.py[slot], -2 * coef * dst[1] / KM),
                (td[n - 1], 1.0)], rhs, ("rf_rate", slot))
        b.le_row([(td[n - 1], -1.0)], 0.0, ("rf_rate", slot))

    # queue
    for n in range(N):
        slot = n + 1
        terms = [(qv[n], 1.0), (ts[n], -dt)]
        if n >= 1:
            terms += [(qv[n - 1], -1.0), (td[n - 1], dt)]
        b.eq_row(terms, 0.0, ("queue_def", slot))
    for n in range(1, N):
        b.le_row([(td[n - 1], 1.0), (qv[n - 1], -1.0 / dt), (ts[n], -1.0)], 0.0, ("causal", n + 1))
    for n in range(N):
        b.le_row([(qv[n], -1.0)], 0.0, ("queue_lo", n + 1))
    if math.isfinite(p.buffer_bits):
        for n in range(N):
            b.le_row([(qv[n], 1.0)], p.buffer_bits / MBIT, ("queue_hi", n + 1))
    if mode == DELAY_LIMITED and math.isfinite(p.delay_req_slots):
        terms = [(qv[n], 1.0) for n in range(N)] + [(ts[n], -p.delay_req_slots * dt) for n in range(N)]
        b.le_row(terms, 0.0, ("delay",))

    obj = np.zeros(idx.size)
    obj[td] = 1.0
    return Subproblem(b.program(obj), idx, mode, fso_surrogate)


def feasible_reference_point(p, fso, rf, ref: Trajectory, sub: Subproblem):
    """A feasible point of ``sub`` at the reference trajectory.

    Rates are the greedy schedule under the surrogate capacities. In
    delay-limited mode the buffer cap used by the greedy rule is lowered by
    bisection until the delay bound holds (a zero cap always satisfies it).
    """
    pts = ref.positions3d()
    x0 = sub.point(ref, np.zeros(p.num_slots), np.zeros(p.num_slots - 1))
    prog = sub.program
    # surrogate capacities: maximise each slot's rate variable alone at the reference point
    r_fso = np.empty(p.num_slots)
    for n in range(p.num_slots):
        rows = [i for i, t in enumerate(prog.ineq_tags) if t == ("fso_rate", n + 1)]
        r_fso[n] = min(_row_cap(prog, i, sub.index.ts[n], x0) for i in rows)
    r_rf = np.zeros(p.num_slots)
    for con in prog.quads:
        slot = con.tag[1]
        col = sub.index.td[slot - 2]
        xx = x0.copy()
        xx[col] = 0.0
        r_rf[slot - 1] = (con.r - xx @ (con.Q @ xx) - con.q @ xx) * MBIT
    r_fso = np.maximum(r_fso, 0.0)
    r_rf = np.maximum(r_rf, 0.0)
    # stay a hair inside so round-off cannot make the point infeasible
    r_fso *= 1 - 1e-12
    r_rf *= 1 - 1e-12

    def plan_for(cap):
        return greedy_arrays(r_fso, r_rf, cap, p.slot_s)

    def delay_ok(c_sr, c_rd):
        q = np.cumsum(c_sr - np.concatenate([[0.0], c_rd])) * p.slot_s
        return q.sum() <= p.delay_req_slots * p.slot_s * c_sr.sum() * (1 - 1e-12)

    cap = p.buffer_bits
    c_sr, c_rd = plan_for(cap)
    if sub.mode == DELAY_LIMITED and math.isfinite(p.delay_req_slots) and not delay_ok(c_sr, c_rd):
        lo, hi = 0.0, min(cap, float(np.sum(r_fso) * p.slot_s))
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if delay_ok(*plan_for(mid)):
                lo = mid
            else:
                hi = mid
        c_sr, c_rd = plan_for(lo)
    return sub.point(ref, c_sr, c_rd, dist=np.linalg.norm(pts - np.asarray(fso.src_pos), axis=1))


def _row_cap(prog, row, col, x):
    g = prog.ineq_G.getrow(row).toarray().ravel()
    if g[col] <= 0:
        return np.inf
    xx = x.copy()
    xx[col] = 0.0
    return (prog.ineq_h[row] - g @ xx) / g[col]


# ---------------------------------------------------------------------------
# results


@dataclass
class Evaluation:
    plan: RatePlan
    trace: QueueTrace

    @property
    def throughput_bps(self):
        return self.trace.throughput_bps


@dataclass
class PlanResult:
    trajectory: Trajectory
    plan: RatePlan
    trace: QueueTrace
    objective_bps: float
    iterations: int
    objective_log: list
    mode: str
    surrogate_gap: float
    evaluation: Evaluation
    status: str = socp.OPTIMAL
    solver_iterations: list = field(default_factory=list)
    runtime_s: float = 0.0
    params: Optional[ScenarioParams] = None

    @property
    def throughput_bps(self) -> float:
        """Achievable throughput of the trajectory under the exact link models."""
        return self.evaluation.throughput_bps


def evaluate_plan(p: ScenarioParams, fso: FsoLinkModel, rf: RfLinkModel, traj: Trajectory) -> Evaluation:
    """Greedy schedule and queue metrics for a trajectory under the exact rates."""
    plan = greedy_rates(traj, fso, rf, p.buffer_bits)
    return Evaluation(plan, evolve_queue(plan, p.slot_s))


def repair_plan(c_sr, c_rd, r_fso, r_rf, buffer_bits, slot_s) -> RatePlan:
    """Clamp solver rates onto the exact feasible set.

    Interior-point output satisfies the constraints only to solver tolerance;
    this trims each rate to the true capacity, the buffer content and the
    buffer size so queue bookkeeping is exact.
    """
    c_sr = np.clip(np.asarray(c_sr, dtype=float), 0.0, r_fso)
    c_rd = np.clip(np.asarray(c_rd, dtype=float), 0.0, r_rf[1:])
    # mirror the queue recursion operation by operation so the level stays >= 0 exactly
    level = 0.0
    for n in range(c_sr.size):
        inflow = level + c_sr[n] * slot_s
        if inflow > buffer_bits + (c_rd[n - 1] * slot_s if n else 0.0):
            c_sr[n] = max(0.0, (buffer_bits - level) / slot_s + (c_rd[n - 1] if n else 0.0))
            inflow = level + c_sr[n] * slot_s
        if n:
            c_rd[n - 1] = min(c_rd[n - 1], inflow / slot_s)
            level = inflow - c_rd[n - 1] * slot_s
        else:
            level = inflow
        if level < 0:
            c_rd[n - 1] = max(0.0, c_rd[n - 1] + level / slot_s)
            level = inflow - c_rd[n - 1] * slot_s
    return RatePlan(c_sr, c_rd)


def optimize(p: ScenarioParams, fso: Optional[FsoLinkModel] = None, rf: Optional[RfLinkModel] = None,
             mode: str = DELAY_LIMITED, init: "str | Trajectory" = "midpoint",
             tol: Optional[float] = None, max_iters: Optional[int] = None,
             fso_surrogate: str = "tangent", solver_tol: float = 1e-8,
             callback=None) -> PlanResult:
    """Run the SCA loop and return the best iterate.

    Stops when the relative objective increase drops below ``tol`` (absolute
    increase below 1 bit/s near zero) or after ``max_iters`` rounds.
    """
    mode = normalize_mode(mode)
    if fso is None or rf is None:
        f2, r2 = link_models(p)
        fso, rf = fso or f2, rf or r2
    tol = p.sca_tol if tol is None else tol
    max_iters = p.sca_max_iters if max_iters is None else max_iters
    ref = init if isinstance(init, Trajectory) else initialize_trajectory(p, init)
    t0 = time.perf_counter()
    history, solver_its = [], []
    best = None
    prev = 0.0
    for k in range(1, max_iters + 1):
        sub = build_subproblem(p, fso, rf, ref, mode, fso_surrogate)
        sol = socp.solve(sub.program, tol=solver_tol)
        solver_its.append(sol.iterations)
        if not sol.ok:
            partial = best[0] if best else None
            raise SolverFailure(f"subproblem {k} ended with status {sol.status}", partial, sol)
        obj_bps = float(np.sum(sol.x[sub.index.td])) * MBIT / (p.num_slots - 1)
        history.append(obj_bps)
        log.info("sca iteration %d: objective %.6e bps (%d solver iterations)", k, obj_bps, sol.iterations)
        if callback is not None:
            callback(k, obj_bps, sub, sol)
        traj = sub.trajectory(sol.x, p)
        if best is None or obj_bps > best[1]:
            best = ((traj, sub, sol), obj_bps)
        gain = obj_bps - prev
        if gain < tol * max(abs(prev), 1.0) or (abs(prev) < 1.0 and gain < 1.0 and k > 1):
            break
        prev = obj_bps
        ref = traj

    (traj, sub, sol), _ = best
    r_fso, r_rf = link_rates(traj, fso, rf)
    c_sr, c_rd = sub.rates(sol.x)
    plan = repair_plan(c_sr, c_rd, r_fso, r_rf, p.buffer_bits, p.slot_s)
    trace = evolve_queue(plan, p.slot_s)
    evaluation = evaluate_plan(p, fso, rf, traj)
    return PlanResult(traj, plan, trace, trace.throughput_bps, len(history), history, mode,
                      evaluation.throughput_bps - trace.throughput_bps, evaluation,
                      socp.OPTIMAL, solver_its, time.perf_counter() - t0, p)


# ---------------------------------------------------------------------------
# export


def export_trajectory(path, traj: Trajectory) -> None:
    rows = []
    for n in range(traj.pos.shape[0]):
        acc = traj.acc[n] if n < traj.acc.shape[0] else (math.nan, math.nan)
        rows.append((n, traj.pos[n, 0], traj.pos[n, 1], traj.vel[n, 0], traj.vel[n, 1], acc[0], acc[1]))
    write_table(path, ("slot", "x_m", "y_m", "vx", "vy", "ax", "ay"), rows)


def load_trajectory(path, altitude: float = 100.0, slot_s: float = 1.0) -> Trajectory:
    from .tables import read_table

    header, rows = read_table(path)
    want = ["slot", "x_m", "y_m", "vx", "vy", "ax", "ay"]
    if header != want:
        raise ValueError(f"{path}: expected header {','.join(want)}")
    if len(rows) < 4:
        raise ValueError(f"{path}: too few rows for a trajectory")
    arr = np.array(rows, dtype=float)
    return Trajectory(arr[:, 1:3], arr[:, 3:5], arr[:-1, 5:7], altitude, slot_s)


def export_iterations(path, history) -> None:
    write_table(path, ("iter", "objective_bps"), [(k + 1, v) for k, v in enumerate(history)])


def metrics_items(res: PlanResult, p: ScenarioParams):
    from .queue import packet_delay_replay

    stats = packet_delay_replay(res.plan, 1e6, p.slot_s)
    return [("objective_bps", res.objective_bps), ("throughput_bps", res.throughput_bps),
            ("iterations", res.iterations), ("mode", res.mode),
            ("surrogate_gap", res.surrogate_gap), ("buffer_bits", p.buffer_bits),
            ("delay_req_slots", p.delay_req_slots),
            ("mean_delay_slots", res.trace.avg_delay_slots),
            ("mean_packet_delay", stats.mean), ("undelivered_packets", stats.undelivered)]


def export_result(out_dir, res: PlanResult, p: ScenarioParams) -> None:
    from pathlib import Path

    from .queue import export_trace

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_trajectory(out / "trajectory.csv", res.trajectory)
    write_keyvalue(out / "metrics.csv", metrics_items(res, p))
    export_iterations(out / "iterations.csv", res.objective_log)
    export_trace(out / "queue_trace.csv", res.plan, res.trace)
