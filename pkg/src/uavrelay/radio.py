"""Air-to-ground and air-to-air link budgets and their coverage radii.

All distances are meters, losses dB, powers dBm. The LoS probability takes the
elevation angle in degrees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 2.998e8

# bisection stops when the loss is this close to the budget
LOSS_TOL_DB = 1e-6


class CoverageInfeasibleError(ValueError):
    """The requested loss budget is below the smallest achievable loss."""


@dataclass(frozen=True)
class PropagationParams:
    """Environment and radio constants. Defaults are the urban setting."""

    a: float = 9.61
    b: float = 0.16
    eta_los: float = 1.0
    eta_nlos: float = 20.0
    fc: float = 2.0e9
    altitude_h: float = 2000.0
    noise_power: float = -90.0
    snr_min: float = -4.0
    p_ue: float = 20.0
    p_uav: float = 110.0
    light_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("a", "b", "fc", "altitude_h"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        for name in ("eta_los", "eta_nlos", "noise_power", "snr_min", "p_ue", "p_uav"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if abs(self.light_speed / SPEED_OF_LIGHT - 1.0) > 1e-3:
            raise ValueError("light_speed must be 2.998e8 m/s within 0.1%")
        if self.p_ue > self.p_uav:
            raise ValueError("p_ue must not exceed p_uav")


@dataclass(frozen=True)
class CoverageRadii:
    r1_a2g: float
    r2_a2a: float
    loss_budget_a2g: float
    loss_budget_a2a: float


def _check_distance(r, name="r"):
    r = float(r)
    if not math.isfinite(r):
        raise ValueError(f"{name} must be finite, got {r!r}")
    if r < 0:
        raise ValueError(f"{name} must be non-negative, got {r!r}")
    return r


def elevation_deg(params: PropagationParams, r: float) -> float:
    """Elevation angle of the UAV seen from horizontal offset ``r``."""
    r = _check_distance(r)
    if r == 0.0:
        return 90.0
    return math.degrees(math.atan(params.altitude_h / r))


def p_los(params: PropagationParams, r: float) -> float:
    """Probability of line of sight at horizontal distance ``r``."""
    theta = elevation_deg(params, r)
    return 1.0 / (1.0 + params.a * math.exp(-params.b * (theta - params.a)))


def free_space_loss(params: PropagationParams, dist: float) -> float:
    arg = 4.0 * math.pi * params.fc * dist / params.light_speed
    if not arg > 0:
        raise ValueError("free-space loss needs a positive distance")
    return 20.0 * math.log10(arg)


def a2g_path_loss(params: PropagationParams, r: float) -> float:
    """Mean A2G loss in dB, mixing LoS and NLoS by their probabilities.

    ``r`` is the horizontal UAV-to-ground distance; the slant range adds the
    UAV altitude.
    """
    r = _check_distance(r)
    d = math.hypot(params.altitude_h, r)
    fspl = free_space_loss(params, d)
    pl = p_los(params, r)
    return pl * (fspl + params.eta_los) + (1.0 - pl) * (fspl + params.eta_nlos)


def a2a_path_loss(params: PropagationParams, dist: float) -> float:
    dist = _check_distance(dist, "dist")
    if dist == 0.0:
        raise ValueError("dist must be positive")
    return free_space_loss(params, dist)


def link_budget(params: PropagationParams, p_tx: float) -> float:
    """Largest tolerable path loss for transmit power ``p_tx`` (dBm)."""
    return p_tx - params.snr_min - params.noise_power


def sensitivity_budgets(params: PropagationParams) -> tuple[float, float]:
    """Budgets implied literally by the transmit powers: (A2G from UE, A2A from UAV)."""
    return link_budget(params, params.p_ue), link_budget(params, params.p_uav)


def _invert_monotone(loss_fn, budget, lo):
    """Find r >= lo with loss_fn(r) == budget on an increasing curve."""
    hi = 1.0e7
    while loss_fn(hi) < budget:
        hi *= 2.0
        if hi > 1e300:
            raise CoverageInfeasibleError(f"budget {budget} dB is not reachable")
    # the loss is only resolved to ~1e-12 relative in r, so also stop on a
    # collapsed bracket
    for _ in range(4000):
        mid = 0.5 * (lo + hi)
        err = loss_fn(mid) - budget
        if abs(err) <= LOSS_TOL_DB or hi - lo <= 1e-12 * max(1.0, hi):
            return mid
        if err < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def coverage_radii(params: PropagationParams, budget_a2g: float = 110.0,
                   budget_a2a: float = 110.0) -> CoverageRadii:
    """Invert both loss curves at the given budgets.

    Raises :class:`CoverageInfeasibleError` when the A2G budget cannot cover
    even the point directly under the UAV.
    """
    if not (math.isfinite(budget_a2g) and math.isfinite(budget_a2a)):
        raise ValueError("budgets must be finite")
    overhead = a2g_path_loss(params, 0.0)
    if budget_a2g < overhead:
        raise CoverageInfeasibleError(
            f"A2G budget {budget_a2g:.3f} dB is below the overhead loss {overhead:.3f} dB")
    r1 = 0.0 if budget_a2g - overhead <= LOSS_TOL_DB else _invert_monotone(
        lambda r: a2g_path_loss(params, r), budget_a2g, 0.0)
    # free-space loss is unbounded below as dist -> 0, so any budget closes
    lo = params.light_speed / (4.0 * math.pi * params.fc) * 10.0 ** ((budget_a2a - 400.0) / 20.0)
    r2 = _invert_monotone(lambda d: a2a_path_loss(params, d), budget_a2a, lo)
    if r2 <= 0.0:
        raise CoverageInfeasibleError(f"A2A budget {budget_a2a} dB yields no range")
    return CoverageRadii(r1, r2, float(budget_a2g), float(budget_a2a))


def snr_db(params: PropagationParams, p_tx: float, loss_db: float) -> float:
    return p_tx - loss_db - params.noise_power


def a2g_path_loss_array(params: PropagationParams, r) -> np.ndarray:
    """Vectorized :func:`a2g_path_loss` for capacity maps."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("distances must be finite and non-negative")
    with np.errstate(divide="ignore"):
        theta = np.where(r == 0, 90.0, np.degrees(np.arctan(params.altitude_h / np.where(r == 0, 1.0, r))))
    pl = 1.0 / (1.0 + params.a * np.exp(-params.b * (theta - params.a)))
    d = np.hypot(params.altitude_h, r)
    fspl = 20.0 * np.log10(4.0 * np.pi * params.fc * d / params.light_speed)
    return pl * (fspl + params.eta_los) + (1.0 - pl) * (fspl + params.eta_nlos)
