"""Flow-chamber geometry, laminar flow profile and the reduced-model constants.

A rectangular chamber of height h, length l and width w carries a fully
developed laminar flow with parabolic profile v(z) = 4 vbar (z/h)(1 - z/h).
N identical sensor patches of length L, separated by gaps d, sit on the
floor along the flow direction.  All quantities SI.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, RegimeError

# Shallow-chamber aspect ratio above which side-wall effects matter and the
# 2-D (y, z) treatment loses accuracy.
MAX_ASPECT_RATIO = 1.0 / 20.0


@dataclass(frozen=True)
class ChamberConfig:
    """Chamber and sensor-array geometry plus flow conditions (SI units)."""

    height: float          # h, m
    length: float          # l, m
    width: float           # w, m
    sensor_length: float   # L, m
    sensor_spacing: float  # d, m (gap between consecutive sensors)
    sensor_lead: float     # y-coordinate of the first sensor's leading edge, m
    n_sensors: int
    gamma: float           # analyte diffusion constant, m^2/s
    v_bar: float           # peak flow velocity, m/s
    alpha_override: float | None = None  # pin the depletion factor if set

    def __post_init__(self):
        for name in ("height", "length", "width", "sensor_length", "gamma", "v_bar"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ConfigError(f"{name} must be finite and > 0, got {v!r}")
        if self.sensor_spacing < 0 or self.sensor_lead < 0:
            raise ConfigError("sensor_spacing and sensor_lead must be >= 0")
        if self.n_sensors < 0:
            raise ConfigError("n_sensors must be >= 0")
        if self.n_sensors > 0:
            span = (self.sensor_lead + self.n_sensors * self.sensor_length
                    + (self.n_sensors - 1) * self.sensor_spacing)
            if span > self.length * (1.0 + 1e-12):
                raise ConfigError(
                    f"sensor array spans {span:g} m but the chamber is only "
                    f"{self.length:g} m long"
                )
        if self.height / self.width > MAX_ASPECT_RATIO:
            warnings.warn(
                f"height/width = {self.height / self.width:.3g} exceeds "
                f"{MAX_ASPECT_RATIO:g}; the 2-D chamber model assumes a shallow "
                "cross-section",
                stacklevel=2,
            )
        if self.alpha_override is not None and not (0.0 < self.alpha_override < 1.0):
            raise ConfigError("alpha_override must lie in (0, 1)")


def sensor_bounds(cfg: ChamberConfig) -> np.ndarray:
    """Leading/trailing edges [y_i1, y_i2] of every sensor, shape (N, 2)."""
    pitch = cfg.sensor_length + cfg.sensor_spacing
    lead = cfg.sensor_lead + pitch * np.arange(cfg.n_sensors)
    return np.column_stack([lead, lead + cfg.sensor_length])


def velocity(cfg: ChamberConfig, z) -> np.ndarray:
    """Parabolic velocity profile v(z) = 4 vbar (z/h)(1 - z/h)."""
    zz = np.asarray(z, dtype=float) / cfg.height
    return 4.0 * cfg.v_bar * zz * (1.0 - zz)


def inner_height(cfg: ChamberConfig) -> float:
    """Depletion-layer thickness h0 = (1/1.464) (gamma h L / vbar)^(1/3)."""
    return (cfg.gamma * cfg.height * cfg.sensor_length / cfg.v_bar) ** (1.0 / 3.0) / 1.464


def depletion_factor(cfg: ChamberConfig) -> float:
    """Per-sensor bulk depletion factor alpha in (0, 1).

    alpha = 1 - 3 gamma L / (2 h0 vbar h); each sensor hands the next one
    an outer concentration reduced by this factor.  ``alpha_override`` on
    the config pins the value instead (for matching a measured setup).
    """
    if cfg.alpha_override is not None:
        return float(cfg.alpha_override)
    h0 = inner_height(cfg)
    alpha = 1.0 - 3.0 * cfg.gamma * cfg.sensor_length / (2.0 * h0 * cfg.v_bar * cfg.height)
    if not (0.0 < alpha < 1.0):
        raise RegimeError(
            f"depletion factor alpha = {alpha:.4g} outside (0, 1); the reduced "
            "model does not apply -- use a shorter sensor, faster flow or a "
            "taller chamber"
        )
    return alpha


def arrival_times(cfg: ChamberConfig) -> np.ndarray:
    """Response start times t_i = y_i2 / vbar (flow front reaching each
    sensor's far edge), strictly increasing, shape (N,)."""
    return sensor_bounds(cfg)[:, 1] / cfg.v_bar if cfg.n_sensors else np.empty(0)
