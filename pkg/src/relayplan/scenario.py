"""Scenario configuration, kinematic trajectories and derived link constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

INF = math.inf


class ConfigError(ValueError):
    """Raised for malformed or invalid scenario configuration."""


@dataclass(frozen=True)
class ScenarioParams:
    """All physical and system constants of one relaying scenario.

    Positions are metres, rates bits/s, the buffer is in bits and the delay
    requirement in slots. ``buffer_bits`` and ``delay_req_slots`` accept
    ``math.inf`` for the unbounded case.
    """

    src_pos: tuple = (0.0, 0.0, 0.0)
    dst_pos: tuple = (2000.0, 0.0, 0.0)
    altitude: float = 100.0
    num_slots: int = 200
    slot_s: float = 1.0
    v_max: float = 50.0
    a_max: float = 5.0
    visibility_km: float = 0.8
    wavelength_nm: float = 1550.0
    fso_bandwidth_hz: float = 1e8
    fso_asnr_db: float = 5.0
    fso_asnr_is_amplitude: bool = False
    apr: float = 0.1
    rf_bandwidth_hz: float = 1e8
    ref_snr_db: float = 6.0
    gamma0_override: Optional[float] = None
    pathloss_exp_half: float = 2.2
    los_c: float = 10.0
    los_d: float = 0.6
    nlos_atten: float = 0.2
    buffer_bits: float = 2.5e9
    delay_req_slots: float = 5.0
    initial_pos: Optional[tuple] = None
    final_pos: Optional[tuple] = None
    initial_vel: Optional[tuple] = None
    final_vel: Optional[tuple] = None
    sca_tol: float = 1e-3
    sca_max_iters: int = 30

    def __post_init__(self):
        for name in ("src_pos", "dst_pos", "initial_pos", "final_pos", "initial_vel", "final_vel"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, tuple(float(v) for v in val))
        self.validate()

    @property
    def horizon_s(self) -> float:
        return self.num_slots * self.slot_s

    @property
    def link_length(self) -> float:
        """Ground distance between source and destination."""
        return float(np.linalg.norm(np.subtract(self.dst_pos, self.src_pos)[:2]))

    @property
    def has_endpoint_constraints(self) -> bool:
        return any(v is not None for v in (self.initial_pos, self.final_pos,
                                            self.initial_vel, self.final_vel))

    def with_updates(self, **changes) -> "ScenarioParams":
        return replace(self, **changes)

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.num_slots, (int, np.integer)) and self.num_slots >= 2,
             f"num_slots must be an integer >= 2 (got {self.num_slots!r})")
        need(self.slot_s > 0, "slot_s must be > 0")
        for name in ("v_max", "a_max", "fso_bandwidth_hz", "rf_bandwidth_hz", "altitude",
                     "visibility_km", "wavelength_nm"):
            need(getattr(self, name) > 0, f"{name} must be > 0")
        need(0.0 < self.apr < 1.0 and self.apr != 0.5, "apr must lie in (0, 1) and differ from 0.5")
        need(0.0 < self.nlos_atten <= 1.0, "nlos_atten must lie in (0, 1]")
        need(self.pathloss_exp_half > 0, "pathloss_exp_half must be > 0")
        need(self.buffer_bits >= 0, "buffer_bits must be >= 0")
        need(self.delay_req_slots >= 0, "delay_req_slots must be >= 0")
        need(self.sca_tol > 0, "sca_tol must be > 0")
        need(self.sca_max_iters >= 1, "sca_max_iters must be >= 1")
        if self.gamma0_override is not None:
            need(self.gamma0_override > 0, "gamma0_override must be > 0")
        for name in ("src_pos", "dst_pos", "initial_pos", "final_pos", "initial_vel", "final_vel"):
            val = getattr(self, name)
            if val is not None:
                need(len(val) == 3, f"{name} must be a 3-vector")
        for name in ("initial_pos", "final_pos"):
            val = getattr(self, name)
            if val is not None:
                need(abs(val[2] - self.altitude) < 1e-9, f"{name} must lie at the flight altitude")


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioParams)}
_VECTOR_KEYS = {"src_pos", "dst_pos", "initial_pos", "final_pos", "initial_vel", "final_vel"}
_INT_KEYS = {"num_slots", "sca_max_iters"}
_BOOL_KEYS = {"fso_asnr_is_amplitude"}
_INF_WORDS = {"inf", "infinite", "infinity", "unbounded"}


def _parse_float(text: str) -> float:
    if text.strip().lower() in _INF_WORDS:
        return INF
    return float(text)


def _parse_value(key: str, text: str):
    text = text.strip()
    if key in _VECTOR_KEYS:
        if text.lower() in ("", "none"):
            return None
        parts = [p for p in text.replace(",", " ").split()]
        return tuple(float(p) for p in parts)
    if key in _INT_KEYS:
        val = float(text)
        if val != int(val):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(val)
    if key in _BOOL_KEYS:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if key == "gamma0_override" and text.lower() in ("", "none"):
        return None
    return _parse_float(text)


def parse_scenario(text: str, source: str = "<string>") -> ScenarioParams:
    """Parse ``key=value`` text into validated parameters.

    ``horizon_s`` may be given instead of one of ``num_slots``/``slot_s``.
    """
    values: dict = {}
    horizon = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        try:
            if key == "horizon_s":
                horizon = _parse_float(val)
                continue
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    if horizon is not None:
        if "num_slots" in values and "slot_s" in values:
            if abs(values["num_slots"] * values["slot_s"] - horizon) > 1e-9 * max(1.0, horizon):
                raise ConfigError("horizon_s must equal num_slots * slot_s")
        elif "num_slots" in values:
            values["slot_s"] = horizon / values["num_slots"]
        else:
            slot = values.get("slot_s", ScenarioParams.slot_s)
            n = horizon / slot
            if abs(n - round(n)) > 1e-9:
                raise ConfigError("horizon_s must be an integer multiple of slot_s")
            values["num_slots"] = int(round(n))
    return ScenarioParams(**values)


def load_scenario(path) -> ScenarioParams:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_scenario(text, source=str(path))


def format_scenario(p: ScenarioParams) -> str:
    """Serialise parameters back into the ``key=value`` format."""
    lines = []
    for f in fields(ScenarioParams):
        val = getattr(p, f.name)
        if val is None:
            continue
        if isinstance(val, tuple):
            text = ",".join(repr(float(v)) for v in val)
        elif isinstance(val, bool):
            text = "true" if val else "false"
        elif isinstance(val, float) and math.isinf(val):
            text = "inf"
        else:
            text = repr(val)
        lines.append(f"{f.name}={text}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Trajectory:
    """UAV path on the fixed-altitude plane.

    ``pos`` and ``vel`` hold slots 0..N+1, ``acc`` holds slots 0..N; all are
    (x, y) pairs.
    """

    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    altitude: float
    slot_s: float

    def __post_init__(self):
        for name in ("pos", "vel", "acc"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n2 = self.pos.shape[0]
        if self.pos.shape != (n2, 2) or self.vel.shape != (n2, 2) or self.acc.shape != (n2 - 1, 2):
            raise ValueError("trajectory arrays must be (N+2,2), (N+2,2), (N+1,2)")

    @property
    def num_slots(self) -> int:
        return self.pos.shape[0] - 2

    def positions3d(self, slots=None) -> np.ndarray:
        """3-D positions, for slots 1..N by default."""
        pos = self.pos[1:-1] if slots is None else self.pos[slots]
        z = np.full(pos.shape[:-1] + (1,), self.altitude)
        return np.concatenate([pos, z], axis=-1)

    def kinematic_residual(self) -> float:
        dt = self.slot_s
        rv = self.vel[1:] - self.vel[:-1] - self.acc * dt
        rq = self.pos[1:] - self.pos[:-1] - self.vel[:-1] * dt - 0.5 * self.acc * dt**2
        return float(max(np.abs(rv).max(initial=0.0), np.abs(rq).max(initial=0.0)))

    def violations(self, v_max: float, a_max: float, tol: float = 1e-6) -> list:
        out = []
        if self.kinematic_residual() > tol:
            out.append(f"kinematics residual {self.kinematic_residual():.3g}")
        amax = np.linalg.norm(self.acc, axis=1).max()
        if amax > a_max * (1 + tol) + tol:
            out.append(f"acceleration {amax:.6g} > {a_max}")
        vmax = np.linalg.norm(self.vel[1:-1], axis=1).max()
        if vmax > v_max * (1 + tol) + tol:
            out.append(f"speed {vmax:.6g} > {v_max}")
        return out

    @classmethod
    def from_accelerations(cls, pos0, vel0, acc, altitude, slot_s) -> "Trajectory":
        """Integrate the discrete double-integrator from an initial state."""
        acc = np.asarray(acc, dtype=float).reshape(-1, 2)
        n1 = acc.shape[0]
        pos = np.zeros((n1 + 1, 2))
        vel = np.zeros((n1 + 1, 2))
        pos[0] = pos0
        vel[0] = vel0
        for n in range(n1):
            vel[n + 1] = vel[n] + acc[n] * slot_s
            pos[n + 1] = pos[n] + vel[n] * slot_s + 0.5 * acc[n] * slot_s**2
        return cls(pos, vel, acc, altitude, slot_s)

    @classmethod
    def hover(cls, xy, num_slots, altitude, slot_s) -> "Trajectory":
        pos = np.tile(np.asarray(xy, dtype=float), (num_slots + 2, 1))
        return cls(pos, np.zeros_like(pos), np.zeros((num_slots + 1, 2)), altitude, slot_s)


@dataclass(frozen=True)
class DerivedConstants:
    beta_per_m: float
    k1: float
    k2: float
    mu_star: Optional[float]
    asnr_linear: float
    gamma0: float
    los_prob_bar: float
    los_prob_hat: float


def derived_constants(p: ScenarioParams) -> DerivedConstants:
    """Link constants shared by the FSO and RF models.

    ``gamma0`` folds the homogeneous LoS factor into the reference SNR: the
    received SNR with the UAV straight above the user equals ``ref_snr_db``.
    """
    from . import channel

    beta = channel.attenuation_per_m(p.visibility_km, p.wavelength_nm)
    asnr = channel.asnr_linear(p.fso_asnr_db, p.fso_asnr_is_amplitude)
    mu = channel.solve_mu_star(p.apr) if p.apr < 0.5 else None
    k1 = channel.fso_k1(asnr, p.apr)
    overhead = np.array(p.dst_pos, dtype=float) + np.array([0.0, 0.0, p.altitude])
    p_los = float(channel.los_probability(overhead, p.dst_pos, p.altitude, p.los_c, p.los_d))
    p_hat = p_los + (1.0 - p_los) * p.nlos_atten
    if p.gamma0_override is not None:
        gamma0 = float(p.gamma0_override)
    else:
        gamma0 = 10.0 ** (p.ref_snr_db / 10.0) * (p.altitude**2) ** p.pathloss_exp_half
    return DerivedConstants(beta, k1, 2.0 * beta, mu, asnr, gamma0, p_los, p_hat)


PRESETS = ("calibrated",)


def load_preset(name: str) -> ScenarioParams:
    """Parameters shipped with the package, by name."""
    from importlib.resources import files

    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    text = files("relayplan").joinpath("presets", f"{name}.cfg").read_text(encoding="utf-8")
    return parse_scenario(text, source=f"preset:{name}")
