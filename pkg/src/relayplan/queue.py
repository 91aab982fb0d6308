"""Relay buffer dynamics, throughput/delay metrics and FIFO packet replay.

Bits are treated as a fluid. The destination hop is idle in slot 1 because a
decode-and-forward relay needs one slot before it can forward anything.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tables import write_table


class CausalityError(ValueError):
    """A plan drains more bits than the buffer holds."""


@dataclass(frozen=True)
class RatePlan:
    c_sr: np.ndarray  # slots 1..N
    c_rd: np.ndarray  # slots 2..N

    def __post_init__(self):
        c_sr = np.array(self.c_sr, dtype=float).ravel()
        c_rd = np.array(self.c_rd, dtype=float).ravel()
        if c_sr.size < 1 or c_rd.size != c_sr.size - 1:
            raise ValueError("c_rd must have exactly one entry fewer than c_sr")
        if np.any(~np.isfinite(c_sr)) or np.any(~np.isfinite(c_rd)):
            raise ValueError("rates must be finite")
        if np.any(c_sr < 0) or np.any(c_rd < 0):
            raise ValueError("rates must be nonnegative")
        c_sr.flags.writeable = False
        c_rd.flags.writeable = False
        object.__setattr__(self, "c_sr", c_sr)
        object.__setattr__(self, "c_rd", c_rd)

    @property
    def num_slots(self) -> int:
        return self.c_sr.size

    def c_rd_full(self) -> np.ndarray:
        """Destination-hop rates for slots 1..N with the idle first slot."""
        return np.concatenate([[0.0], self.c_rd])

    @classmethod
    def clipped(cls, c_sr, c_rd) -> "RatePlan":
        """Build from solver output, zeroing round-off negatives."""
        return cls(np.maximum(np.asarray(c_sr, dtype=float), 0.0),
                   np.maximum(np.asarray(c_rd, dtype=float), 0.0))


@dataclass(frozen=True)
class QueueTrace:
    q_bits: np.ndarray
    throughput_bps: float
    arrival_rate_bps: float
    avg_delay_slots: float
    avg_delay_adjusted: float
    slot_s: float = 1.0

    @property
    def delay_defined(self) -> bool:
        return not math.isnan(self.avg_delay_slots)


def evolve_queue(plan: RatePlan, slot_s: float = 1.0, tol_bits: float = 1e-6) -> QueueTrace:
    """Run the buffer recursion and summarise it.

    The average delay follows Little's law, mean queue over mean arrival rate,
    expressed in slots; it is NaN when nothing arrives.
    """
    c_rd = plan.c_rd_full()
    q = np.empty(plan.num_slots)
    level = 0.0
    scale = 0.0
    for n in range(plan.num_slots):
        level = level + plan.c_sr[n] * slot_s - c_rd[n] * slot_s
        scale = max(scale, plan.c_sr[n] * slot_s, c_rd[n] * slot_s)
        # the absolute floor is loosened only by floating-point resolution at large magnitudes
        if level < -max(tol_bits, 8 * np.finfo(float).eps * scale):
            raise CausalityError(f"queue goes negative at slot {n + 1}: {level:.6g} bits")
        q[n] = level
    q = np.maximum(q, 0.0)
    q.flags.writeable = False
    n_slots = plan.num_slots
    phi = float(np.sum(plan.c_rd)) / (n_slots - 1) if n_slots > 1 else 0.0
    lam = float(np.mean(plan.c_sr))
    if lam > 0:
        delay = float(np.mean(q)) / lam / slot_s
        adjusted = delay - 1.0
    else:
        delay = adjusted = math.nan
    return QueueTrace(q, phi, lam, delay, adjusted, slot_s)


def greedy_arrays(r_fso, r_rf, buffer_bits: float, slot_s: float = 1.0):
    """Greedy per-slot rates from per-slot link capacities (slots 1..N).

    Each slot forwards as much as the RF hop and the buffer content allow,
    and admits as much as the FSO hop allows without overflowing the buffer.
    """
    r_fso = np.asarray(r_fso, dtype=float)
    r_rf = np.asarray(r_rf, dtype=float)
    n_slots = r_fso.size
    c_sr = np.zeros(n_slots)
    c_rd = np.zeros(max(n_slots - 1, 0))
    # same operation order as evolve_queue, so both see bit-identical levels
    level = 0.0
    for n in range(n_slots):
        if n == 0:
            c_sr[0] = min(r_fso[0], buffer_bits / slot_s)
            level = level + c_sr[0] * slot_s - 0.0 * slot_s
            continue
        c_sr[n] = max(0.0, min(r_fso[n], (buffer_bits - level) / slot_s + r_rf[n]))
        inflow = level + c_sr[n] * slot_s
        c_rd[n - 1] = max(0.0, min(r_rf[n], inflow / slot_s))
        level = inflow - c_rd[n - 1] * slot_s
    return c_sr, c_rd


def link_rates(traj, fso, rf):
    """True FSO and RF capacities at slots 1..N of a trajectory."""
    from .channel import fso_rate, rf_rate

    pts = traj.positions3d()
    return fso_rate(fso, pts), rf_rate(rf, pts)


def greedy_rates(traj, fso, rf, buffer_bits: float) -> RatePlan:
    r_fso, r_rf = link_rates(traj, fso, rf)
    c_sr, c_rd = greedy_arrays(r_fso, r_rf, buffer_bits, traj.slot_s)
    return RatePlan(c_sr, c_rd)


@dataclass(frozen=True)
class DelayStats:
    delays: np.ndarray  # slots, one per delivered packet
    undelivered: int
    mean: float
    max: float
    histogram: dict = field(default_factory=dict)

    @property
    def delivered(self) -> int:
        return int(self.delays.size)


def packet_delay_replay(plan: RatePlan, packet_bits: float, slot_s: float = 1.0) -> DelayStats:
    """FIFO replay of whole packets through the fluid plan.

    Packet k arrives in the first slot where cumulative source bits reach
    k*packet_bits and leaves in the first slot where cumulative delivered bits
    do. Its delay is the slot difference, at least one slot for the relaying
    step. Packets whose bits never fully arrive are not counted; arrived
    packets still queued at the horizon are reported as undelivered.
    """
    if not packet_bits > 0:
        raise ValueError("packet_bits must be positive")
    cum_in = np.cumsum(plan.c_sr) * slot_s
    cum_out = np.cumsum(plan.c_rd_full()) * slot_s
    slack = 1e-9 * packet_bits
    n_arrived = int(np.floor((cum_in[-1] + slack) / packet_bits))
    marks = packet_bits * np.arange(1, n_arrived + 1)
    arr = np.searchsorted(cum_in, marks - slack, side="left")
    dep = np.searchsorted(cum_out, marks - slack, side="left")
    delivered = dep < plan.num_slots
    delays = np.maximum(dep[delivered] - arr[delivered], 1).astype(float)
    hist = {}
    for d in delays.astype(int):
        hist[int(d)] = hist.get(int(d), 0) + 1
    mean = float(delays.mean()) if delays.size else math.nan
    mx = float(delays.max()) if delays.size else math.nan
    return DelayStats(delays, int(np.sum(~delivered)), mean, mx, dict(sorted(hist.items())))


def export_trace(path, plan: RatePlan, trace: QueueTrace) -> None:
    rows = [(n + 1, plan.c_sr[n], plan.c_rd_full()[n], trace.q_bits[n]) for n in range(plan.num_slots)]
    write_table(path, ("slot", "c_sr_bps", "c_rd_bps", "q_bits"), rows)
