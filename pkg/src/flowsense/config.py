"""Experiment configuration: YAML schema, unit conversion, validation.

Configs use bench units (mm for lengths, uL/min for flow); everything is
converted to SI on load.  The flow rate maps to the peak velocity of the
parabolic profile via vbar = 3 Q / (2 w h), since the mean of the profile
is two thirds of its peak.  Exactly one of ``flow_ul_per_min`` /
``v_bar_m_per_s`` and exactly one of ``snr_db`` / ``sigma`` may be given.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .chamber import ChamberConfig
from .chemistry import (
    DEFAULT_RATES,
    DEFAULT_SURFACE_TOTALS,
    RateConstants,
    SurfaceChemistry,
    make_chemistry,
)
from .errors import ConfigError

SCHEMA_VERSION = 1

MM = 1e-3
UL_PER_MIN = 1e-9 / 60.0  # m^3/s

_RATE_NAMES = ("f1", "f2", "f3", "f4", "f5", "f6", "f7",
               "r1", "r2", "r3", "r4", "r5", "r6", "r7")


def vbar_from_flow(flow_ul_per_min: float, width: float, height: float) -> float:
    """Peak velocity from the volumetric flow rate (SI width/height)."""
    q = flow_ul_per_min * UL_PER_MIN
    return 3.0 * q / (2.0 * width * height)


def flow_from_vbar(v_bar: float, width: float, height: float) -> float:
    return (2.0 / 3.0) * v_bar * width * height / UL_PER_MIN


@dataclass(frozen=True)
class RunParams:
    a_star: float        # inlet concentration, mol/m^3
    horizon: float       # s
    sample_dt: float     # s
    grid_p: int
    grid_q: int
    mode: str            # strict | relaxed


@dataclass(frozen=True)
class EstimationParams:
    sigma: float | None        # mol/m^2; None means derive from snr_db
    snr_db: float | None
    samples: int
    trials: int
    master_seed: int
    bracket: tuple
    sample_dt: float = 1.0

    def resolve_sigma(self, chem: SurfaceChemistry) -> float:
        if self.sigma is not None:
            return self.sigma
        return chem.dimer0 * 10.0 ** (-self.snr_db / 20.0)


@dataclass(frozen=True)
class DesignParams:
    a_min: float
    a_max: float
    points: int

    def grid(self) -> np.ndarray:
        return np.geomspace(self.a_min, self.a_max, self.points)


@dataclass(frozen=True)
class ExperimentConfig:
    chamber: ChamberConfig
    chemistry: SurfaceChemistry
    run: RunParams
    estimation: EstimationParams
    design: DesignParams
    formats: tuple
    flow_ul_per_min: float | None = None

    def metadata(self) -> dict:
        """Resolved parameters for the run-metadata document (SI + bench)."""
        from . import chamber as ch

        cfg = self.chamber
        meta = {
            "schema_version": SCHEMA_VERSION,
            "chamber_si": {
                "height_m": cfg.height,
                "length_m": cfg.length,
                "width_m": cfg.width,
                "sensor_length_m": cfg.sensor_length,
                "sensor_spacing_m": cfg.sensor_spacing,
                "sensor_lead_m": cfg.sensor_lead,
                "sensor_count": cfg.n_sensors,
                "gamma_m2_per_s": cfg.gamma,
                "v_bar_m_per_s": cfg.v_bar,
            },
            "chamber_bench": {
                "height_mm": cfg.height / MM,
                "length_mm": cfg.length / MM,
                "width_mm": cfg.width / MM,
                "sensor_length_mm": cfg.sensor_length / MM,
                "sensor_spacing_mm": cfg.sensor_spacing / MM,
                "sensor_lead_mm": cfg.sensor_lead / MM,
                "flow_ul_per_min": (self.flow_ul_per_min
                                    if self.flow_ul_per_min is not None
                                    else flow_from_vbar(cfg.v_bar, cfg.width, cfg.height)),
            },
            "derived": {
                "inner_height_m": ch.inner_height(cfg),
                "depletion_factor": ch.depletion_factor(cfg),
                "arrival_times_s": list(ch.arrival_times(cfg)),
                "alpha_override": cfg.alpha_override,
            },
            "chemistry": {
                "rates": {n: getattr(self.chemistry.rates, n) for n in _RATE_NAMES},
                "u0": list(self.chemistry.u0),
                "dimer0": self.chemistry.dimer0,
                "matrix_variant": self.chemistry.stoich.variant,
            },
            "run": {
                "a_star": self.run.a_star,
                "horizon_s": self.run.horizon,
                "sample_dt_s": self.run.sample_dt,
                "grid_p": self.run.grid_p,
                "grid_q": self.run.grid_q,
                "mode": self.run.mode,
            },
            "estimation": {
                "sigma": self.estimation.resolve_sigma(self.chemistry),
                "snr_db": self.estimation.snr_db,
                "samples": self.estimation.samples,
                "sample_dt_s": self.estimation.sample_dt,
                "trials": self.estimation.trials,
                "master_seed": self.estimation.master_seed,
                "bracket": list(self.estimation.bracket),
            },
        }
        return meta


def _need(section: dict, key: str, path: str, types, allow_none=False):
    if key not in section:
        raise ConfigError(f"{path}.{key}: missing required field")
    val = section[key]
    if val is None and allow_none:
        return None
    if not isinstance(val, types) or isinstance(val, bool):
        raise ConfigError(f"{path}.{key}: expected {types}, got {type(val).__name__}")
    return val


def _number(section, key, path, default=None, positive=True):
    if key not in section or section[key] is None:
        if default is None:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    val = section[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {type(val).__name__}")
    if positive and val <= 0:
        raise ConfigError(f"{path}.{key}: must be > 0, got {val}")
    return float(val)


def from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )

    ch = doc.get("chamber")
    if not isinstance(ch, dict):
        raise ConfigError("chamber: missing or not a mapping")
    width = _number(ch, "width_mm", "chamber") * MM
    height = _number(ch, "height_mm", "chamber") * MM
    flow = ch.get("flow_ul_per_min")
    vbar = ch.get("v_bar_m_per_s")
    if (flow is None) == (vbar is None):
        raise ConfigError("chamber: give exactly one of flow_ul_per_min, v_bar_m_per_s")
    if flow is not None:
        flow = _number(ch, "flow_ul_per_min", "chamber")
        v_bar = vbar_from_flow(flow, width, height)
    else:
        v_bar = _number(ch, "v_bar_m_per_s", "chamber")
    count = _need(ch, "sensor_count", "chamber", int)
    alpha_override = ch.get("alpha_override")
    if alpha_override is not None:
        alpha_override = _number(ch, "alpha_override", "chamber")
    try:
        chamber_cfg = ChamberConfig(
            height=height,
            length=_number(ch, "length_mm", "chamber") * MM,
            width=width,
            sensor_length=_number(ch, "sensor_length_mm", "chamber") * MM,
            sensor_spacing=_number(ch, "sensor_spacing_mm", "chamber", positive=False) * MM,
            sensor_lead=_number(ch, "sensor_lead_mm", "chamber") * MM,
            n_sensors=count,
            gamma=_number(ch, "gamma_m2_per_s", "chamber"),
            v_bar=v_bar,
            alpha_override=alpha_override,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"chamber: {exc}") from None

    chem_doc = doc.get("chemistry") or {}
    if not isinstance(chem_doc, dict):
        raise ConfigError("chemistry: not a mapping")
    rate_kwargs = {n: getattr(DEFAULT_RATES, n) for n in _RATE_NAMES}
    for n in _RATE_NAMES:
        if n in chem_doc:
            rate_kwargs[n] = _number(chem_doc, n, "chemistry")
    try:
        rates = RateConstants(**rate_kwargs)
        chem = make_chemistry(
            rates,
            _number(chem_doc, "b_total", "chemistry", DEFAULT_SURFACE_TOTALS["b_total"]),
            _number(chem_doc, "c_total", "chemistry", DEFAULT_SURFACE_TOTALS["c_total"]),
            _number(chem_doc, "s_total", "chemistry", DEFAULT_SURFACE_TOTALS["s_total"]),
            variant=chem_doc.get("matrix_variant", "conserving"),
        )
    except ValueError as exc:
        raise ConfigError(f"chemistry: {exc}") from None

    run_doc = doc.get("run") or {}
    grid_doc = run_doc.get("grid") or {}
    mode = run_doc.get("mode", "relaxed")
    if mode not in ("strict", "relaxed"):
        raise ConfigError(f"run.mode: must be 'strict' or 'relaxed', got {mode!r}")
    run = RunParams(
        a_star=_number(run_doc, "a_star", "run", positive=False),
        horizon=_number(run_doc, "horizon_s", "run", 1000.0),
        sample_dt=_number(run_doc, "sample_dt_s", "run", 1.0),
        grid_p=int(_number(grid_doc, "p", "run.grid", 400)),
        grid_q=int(_number(grid_doc, "q", "run.grid", 40)),
        mode=mode,
    )
    if run.a_star < 0:
        raise ConfigError("run.a_star: must be >= 0")

    est_doc = doc.get("estimation") or {}
    sigma = est_doc.get("sigma")
    snr = est_doc.get("snr_db")
    if (sigma is None) == (snr is None):
        raise ConfigError("estimation: give exactly one of sigma, snr_db")
    bracket = est_doc.get("bracket", [1e-12, 1e-6])
    if (not isinstance(bracket, (list, tuple)) or len(bracket) != 2
            or not all(isinstance(b, (int, float)) for b in bracket)
            or not 0 < bracket[0] < bracket[1]):
        raise ConfigError("estimation.bracket: need [lo, hi] with 0 < lo < hi")
    estimation = EstimationParams(
        sigma=None if sigma is None else _number(est_doc, "sigma", "estimation", positive=False),
        snr_db=None if snr is None else float(snr),
        samples=int(_number(est_doc, "samples", "estimation", 300)),
        trials=int(_number(est_doc, "trials", "estimation", 500)),
        master_seed=int(_number(est_doc, "master_seed", "estimation", 20260810, positive=False)),
        bracket=(float(bracket[0]), float(bracket[1])),
        sample_dt=_number(est_doc, "sample_dt_s", "estimation", 1.0),
    )

    des_doc = doc.get("design") or {}
    design = DesignParams(
        a_min=_number(des_doc, "a_min", "design", 1e-9),
        a_max=_number(des_doc, "a_max", "design", 2.5e-7),
        points=int(_number(des_doc, "points", "design", 25)),
    )
    if design.a_min >= design.a_max or design.points < 2:
        raise ConfigError("design: need a_min < a_max and points >= 2")

    out_doc = doc.get("outputs") or {}
    formats = tuple(out_doc.get("formats", ["csv", "json"]))
    for f in formats:
        if f not in ("csv", "json"):
            raise ConfigError(f"outputs.formats: unknown format {f!r}")

    return ExperimentConfig(
        chamber=chamber_cfg,
        chemistry=chem,
        run=run,
        estimation=estimation,
        design=design,
        formats=formats,
        flow_ul_per_min=flow,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return from_dict(doc)


EXAMPLE_CONFIG = """\
# flowsense experiment configuration (bench units: mm, uL/min)
schema_version: 1

chamber:
  height_mm: 0.1
  length_mm: 20.0
  width_mm: 2.0
  sensor_length_mm: 2.0
  sensor_spacing_mm: 1.0
  sensor_lead_mm: 1.0
  sensor_count: 4
  gamma_m2_per_s: 1.0e-10
  flow_ul_per_min: 10.0        # alternatively: v_bar_m_per_s

run:
  a_star: 1.0e-8               # inlet concentration, mol/m^3
  horizon_s: 1000.0
  sample_dt_s: 1.0
  grid: {p: 400, q: 40}
  mode: relaxed                # strict enforces dy < gamma/vbar

estimation:
  snr_db: 10.0                 # alternatively: sigma (mol/m^2)
  samples: 300
  sample_dt_s: 1.0
  trials: 500
  master_seed: 20260810
  bracket: [1.0e-12, 1.0e-6]

design:
  a_min: 1.0e-9
  a_max: 2.5e-7
  points: 25

outputs:
  formats: [csv, json]
"""
