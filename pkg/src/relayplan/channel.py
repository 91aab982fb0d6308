"""FSO and air-to-ground RF rate models with their concave surrogates.

All public rates are in bits/s. Positions are 3-vectors in metres and may be
stacked along leading axes; every function broadcasts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

LN2 = math.log(2.0)


class RootFindingError(RuntimeError):
    pass


def kim_coefficient(visibility_km: float) -> float:
    """Size-distribution exponent of the Kim visibility model.

    Boundaries belong to the lower piece.
    """
    v = float(visibility_km)
    if v > 50:
        return 1.6
    if v > 6:
        return 1.3
    if v > 1:
        return 0.16 * v + 0.34
    if v > 0.5:
        return v - 0.5
    return 0.0


def attenuation_per_m(visibility_km: float, wavelength_nm: float = 1550.0) -> float:
    """Beer-Lambert attenuation coefficient in 1/m."""
    p = kim_coefficient(visibility_km)
    beta_db_per_km = 3.91 / visibility_km * (wavelength_nm / 550.0) ** (-p)
    return beta_db_per_km * math.log(10.0) / 1e4


def fso_gain(dist_m, beta_per_m):
    return np.exp(-np.asarray(beta_per_m) * np.asarray(dist_m))


def asnr_linear(asnr_db: float, is_amplitude: bool = False) -> float:
    """Linear ASNR (gamma_FSO squared) from its dB figure.

    By default the figure is the ASNR in dB. With ``is_amplitude`` the figure
    is 10*log10(gamma_FSO), i.e. the dB value belongs to gamma_FSO before
    squaring.
    """
    if is_amplitude:
        return (10.0 ** (asnr_db / 10.0)) ** 2
    return 10.0 ** (asnr_db / 10.0)


def _apr_of_mu(mu: float) -> float:
    # 1/mu - e^-mu / (1 - e^-mu) = 1/mu - 1/expm1(mu); series near zero avoids cancellation
    if mu < 1e-3:
        return 0.5 - mu / 12.0 + mu**3 / 720.0
    if mu > 700.0:
        return 1.0 / mu
    return 1.0 / mu - 1.0 / math.expm1(mu)


def solve_mu_star(apr: float) -> float:
    """Root of the average-to-peak ratio equation for 0 < apr < 1/2."""
    if not 0.0 < apr < 0.5:
        raise ValueError("solve_mu_star needs 0 < apr < 0.5")
    f = lambda mu: _apr_of_mu(mu) - apr
    lo, hi = 1e-9, 1e4
    if f(lo) * f(hi) > 0:
        raise RootFindingError(f"no sign change for apr={apr}")
    mu = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(f(mu)) > 1e-12:
        raise RootFindingError(f"residual {f(mu):.3e} above tolerance for apr={apr}")
    return mu


def fso_k1(asnr_lin: float, apr: float) -> float:
    if apr == 0.5 or not 0.0 < apr < 1.0:
        raise ValueError("apr must lie in (0, 1) and differ from 0.5")
    if apr < 0.5:
        mu = solve_mu_star(apr)
        return (math.exp(2 * apr * mu) / (2 * math.pi * math.e)
                * ((1 - math.exp(-mu)) / mu) ** 2 * asnr_lin / apr**2)
    return asnr_lin / (2 * math.pi * math.e * apr**2)


@dataclass(frozen=True)
class FsoLinkModel:
    beta_per_m: float
    k1: float
    k2: float
    bandwidth_hz: float
    asnr_linear: float
    apr: float
    mu_star: float | None
    src_pos: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.k2 != 2.0 * self.beta_per_m:
            raise ValueError("k2 must equal 2*beta")
        if self.k1 <= 0:
            raise ValueError("k1 must be positive")

    @classmethod
    def from_params(cls, p, dc=None) -> "FsoLinkModel":
        from .scenario import derived_constants

        dc = dc or derived_constants(p)
        return cls(dc.beta_per_m, dc.k1, dc.k2, p.fso_bandwidth_hz, dc.asnr_linear, p.apr,
                   dc.mu_star, tuple(p.src_pos))

    def rate_at_distance(self, d):
        return self.bandwidth_hz / 2.0 * np.log1p(self.k1 * np.exp(-self.k2 * np.asarray(d))) / LN2

    def rate_slope_at_distance(self, d):
        """d(rate)/d(distance), in bits/s per metre (negative)."""
        x = self.k1 * np.exp(-self.k2 * np.asarray(d))
        return -self.bandwidth_hz / (2.0 * LN2) * self.k2 * x / (1.0 + x)


@dataclass(frozen=True)
class RfLinkModel:
    gamma0: float
    alpha: float
    bandwidth_hz: float
    los_c: float
    los_d: float
    nlos_atten: float
    los_prob_bar: float
    dst_pos: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.gamma0 <= 0:
            raise ValueError("gamma0 must be positive")
        if self.alpha < 1.0:
            raise ValueError("the path-loss exponent must be at least 1")
        if not 0.0 <= self.los_prob_bar <= 1.0:
            raise ValueError("los_prob_bar must be a probability")

    @classmethod
    def from_params(cls, p, dc=None) -> "RfLinkModel":
        from .scenario import derived_constants

        dc = dc or derived_constants(p)
        return cls(dc.gamma0, p.pathloss_exp_half, p.rf_bandwidth_hz, p.los_c, p.los_d,
                   p.nlos_atten, dc.los_prob_bar, tuple(p.dst_pos))

    def rate_at_sqdist(self, z):
        return self.bandwidth_hz * np.log1p(self.gamma0 / np.asarray(z, dtype=float) ** self.alpha) / LN2


def _dist(a, b):
    return np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), axis=-1)


def _sqdist(a, b):
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    return np.sum(diff * diff, axis=-1)


def fso_rate(model: FsoLinkModel, uav_pos, src_pos=None):
    src = model.src_pos if src_pos is None else src_pos
    return model.rate_at_distance(_dist(uav_pos, src))


def fso_rate_surrogate(model: FsoLinkModel, uav_pos, src_pos=None):
    """High-SNR concave lower bound; goes negative once k1*exp(-k2 d) < 1."""
    src = model.src_pos if src_pos is None else src_pos
    d = _dist(uav_pos, src)
    return model.bandwidth_hz / (2.0 * LN2) * (math.log(model.k1) - model.k2 * d)


def fso_taylor_coefficients(model: FsoLinkModel, expansion_pos, src_pos=None):
    """Value and distance-slope of the rate at the expansion point."""
    src = model.src_pos if src_pos is None else src_pos
    dk = _dist(expansion_pos, src)
    return model.rate_at_distance(dk), model.rate_slope_at_distance(dk), dk


def fso_rate_linearized(model: FsoLinkModel, uav_pos, expansion_pos, src_pos=None):
    """Tangent of the rate in link distance at the expansion point.

    The rate is convex and decreasing in distance, so the tangent is a global
    lower bound; composed with the (convex) distance it is concave in position.
    """
    src = model.src_pos if src_pos is None else src_pos
    r0, slope, dk = fso_taylor_coefficients(model, expansion_pos, src)
    return r0 + slope * (_dist(uav_pos, src) - dk)


def los_probability(uav_pos, dst_pos, altitude, c, d):
    ell = _dist(uav_pos, dst_pos)
    theta = np.degrees(np.arcsin(np.clip(altitude / ell, -1.0, 1.0)))
    return 1.0 / (1.0 + c * np.exp(-d * (theta - c)))


def rf_rate(model: RfLinkModel, uav_pos, dst_pos=None):
    dst = model.dst_pos if dst_pos is None else dst_pos
    return model.rate_at_sqdist(_sqdist(uav_pos, dst))


def rf_taylor_coefficients(model: RfLinkModel, expansion_pos, dst_pos=None):
    """Coefficients (A, B, z_k) of the RF lower bound around the expansion point.

    The spectral efficiency log2(1 + gamma0 / z**alpha) is convex in the squared
    distance z; ``A`` is its value and ``-B`` its derivative at ``z_k``.
    """
    dst = model.dst_pos if dst_pos is None else dst_pos
    zk = _sqdist(expansion_pos, dst)
    zpow = zk**model.alpha
    a = np.log1p(model.gamma0 / zpow) / LN2
    b = model.gamma0 * model.alpha / (LN2 * (model.gamma0 + zpow) * zk)
    return a, b, zk


def rf_rate_linearized(model: RfLinkModel, uav_pos, expansion_pos, dst_pos=None):
    dst = model.dst_pos if dst_pos is None else dst_pos
    a, b, zk = rf_taylor_coefficients(model, expansion_pos, dst)
    return model.bandwidth_hz * (a - b * (_sqdist(uav_pos, dst) - zk))


def link_models(p):
    """Both link models for a scenario."""
    from .scenario import derived_constants

    dc = derived_constants(p)
    return FsoLinkModel.from_params(p, dc), RfLinkModel.from_params(p, dc)
