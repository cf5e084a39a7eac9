"""Reduced multi-compartment forward model of the sensor array.

Each sensor i gets a two-compartment block: a well-mixed outer bulk at the
fixed concentration A_i = alpha^(i-1) A_1 and a thin inner layer of height
h0 whose average concentration a_i(t) exchanges diffusively with the bulk
and feeds the surface reactions:

    h0 da_i/dt = (gamma/h0) (A_i - a_i) - R(a_i, u_i)      a_i(t_i) = 0
       du_i/dt = M f(u_i, a_i)                             u_i(t_i) = u0

The sensor response g_i(t) is the dimer component of u_i.  Because every
block sees only its own outer concentration, sensor i's trajectory is the
single-sensor trajectory at inlet alpha^(i-1) A_1 shifted by the arrival
time t_i; the integrator exploits exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chamber
from .chamber import ChamberConfig
from .chemistry import DIMER, SurfaceChemistry
from .errors import ConfigError, NumericError
from .kernels import ode as kode

RTOL = 1e-8          # relative tolerance of the kinetics integrator
ATOL_FACTOR = 1e-14  # absolute tolerance = this times the state scale
MAX_STEPS = 2_000_000

_STATUS_MSG = {
    1: "step size underflow",
    2: "non-finite state",
    3: "step budget exhausted",
}


@dataclass(frozen=True)
class CompartmentTrajectory:
    """Sampled reduced-model trajectories for every sensor.

    Per-sensor arrays are indexed by sensor (0-based); ``times[i]`` holds
    absolute times starting at the arrival time t_i, ``species[i]`` has
    shape (n_samples, 8) and ``response[i]`` is its dimer column.
    """

    arrivals: np.ndarray        # t_i, s, shape (N,)
    a_outer: np.ndarray         # A_i = alpha^(i-1) A1, mol/m^3, shape (N,)
    h0: float                   # inner-compartment height, m
    alpha: float                # depletion factor
    times: tuple                # tuple of (n_i,) absolute-time arrays
    a_bar: tuple                # inner concentration series, mol/m^3
    species: tuple              # (n_i, 8) surface states, mol/m^2
    response: tuple             # dimer series g_i(t), mol/m^2

    @property
    def n_sensors(self) -> int:
        return len(self.times)


def _scales(chem: SurfaceChemistry, a_ref: float):
    u0 = np.asarray(chem.u0)
    u_scale = max(
        float(u0[[0, 4, 6]].sum()),            # sites
        float(u0[[1, 2, 5, 6, 7]].sum()),      # channels
        float(u0[[2, 3, 7]].sum()),            # tethers
    )
    a_scale = a_ref if a_ref > 0.0 else 1.0
    return a_scale, u_scale


def _atol_state(chem: SurfaceChemistry, a_ref: float) -> np.ndarray:
    a_scale, u_scale = _scales(chem, a_ref)
    atol = np.empty(9)
    atol[0] = ATOL_FACTOR * a_scale
    atol[1:] = ATOL_FACTOR * u_scale
    return atol


def _atol_joint(chem: SurfaceChemistry, a_ref: float) -> np.ndarray:
    a_scale, u_scale = _scales(chem, a_ref)
    atol = np.empty(18)
    atol[0] = ATOL_FACTOR * a_scale
    atol[1:9] = ATOL_FACTOR * u_scale
    atol[9] = ATOL_FACTOR           # da/dA is dimensionless
    atol[10:] = ATOL_FACTOR * u_scale / a_scale
    return atol


def integrate_sensor(cfg, chem, a_outer, ts_local, with_sensitivity=False):
    """Integrate one sensor block in local time (t=0 is its arrival).

    Returns the sampled state matrix, shape (len(ts_local), 9) or
    (len(ts_local), 18) with forward sensitivities appended.
    """
    which = 1 if with_sensitivity else 0
    n = 18 if with_sensitivity else 9
    if a_outer < 0.0:
        raise ValueError(f"outer concentration must be >= 0, got {a_outer:g}")
    ts = np.ascontiguousarray(ts_local, dtype=float)
    if ts.ndim != 1 or ts.shape[0] == 0:
        raise ValueError("need at least one sample time")
    if ts[0] < 0.0 or np.any(np.diff(ts) <= 0.0):
        raise ValueError("sample times must be >= 0 and strictly increasing")

    y0 = np.zeros(n)
    y0[1:9] = chem.u0
    par = kode.pack_params(chamber.inner_height(cfg), cfg.gamma, float(a_outer), chem.rates)
    M = np.ascontiguousarray(chem.stoich.matrix, dtype=float)
    atol = _atol_joint(chem, a_outer) if with_sensitivity else _atol_state(chem, a_outer)
    out = np.empty((ts.shape[0], n))
    t_end = float(ts[-1])
    status, t_fail = kode.integrate_kinetics(
        which, y0, t_end, ts, par, M, RTOL, atol, 0.0, MAX_STEPS, out
    )
    if status != 0:
        raise NumericError(
            f"kinetics integration failed ({_STATUS_MSG.get(status, status)}) "
            f"at local t={t_fail:.6g} s, outer concentration {a_outer:g} mol/m^3"
        )
    return out


def outer_concentrations(cfg: ChamberConfig, a1: float) -> np.ndarray:
    """A_i = alpha^(i-1) A_1 for every sensor."""
    alpha = chamber.depletion_factor(cfg)
    out = np.empty(cfg.n_sensors)
    val = float(a1)
    for i in range(cfg.n_sensors):
        out[i] = val
        val *= alpha
    return out


def simulate_array(
    cfg: ChamberConfig,
    chem: SurfaceChemistry,
    a1: float,
    horizon: float,
    sample_dt: float,
) -> CompartmentTrajectory:
    """Run the reduced model for the whole array on a uniform sample grid.

    Sensor i is sampled at t_i + k*sample_dt up to ``horizon``.  ``horizon``
    must exceed the last arrival time.
    """
    if a1 < 0.0:
        raise ValueError(f"inlet concentration must be >= 0, got {a1:g}")
    if cfg.n_sensors < 1:
        raise ConfigError("simulate_array needs at least one sensor")
    if sample_dt <= 0.0:
        raise ConfigError("sample_dt must be > 0")
    arrivals = chamber.arrival_times(cfg)
    if horizon <= arrivals[-1]:
        raise ConfigError(
            f"horizon {horizon:g} s must exceed the last arrival time {arrivals[-1]:g} s"
        )
    alpha = chamber.depletion_factor(cfg)
    a_out = outer_concentrations(cfg, a1)
    h0 = chamber.inner_height(cfg)

    times, a_bar, species, response = [], [], [], []
    for i in range(cfg.n_sensors):
        n_samp = int(np.floor((horizon - arrivals[i]) / sample_dt)) + 1
        ts_local = sample_dt * np.arange(n_samp)
        try:
            samples = integrate_sensor(cfg, chem, a_out[i], ts_local)
        except NumericError as exc:
            raise NumericError(f"sensor {i + 1}: {exc}") from None
        times.append(arrivals[i] + ts_local)
        a_bar.append(samples[:, 0].copy())
        species.append(samples[:, 1:9].copy())
        response.append(samples[:, 1 + DIMER].copy())

    return CompartmentTrajectory(
        arrivals=arrivals,
        a_outer=a_out,
        h0=h0,
        alpha=alpha,
        times=tuple(times),
        a_bar=tuple(a_bar),
        species=tuple(species),
        response=tuple(response),
    )


def forward_responses(
    cfg: ChamberConfig, chem: SurfaceChemistry, a1: float, times_rel
) -> np.ndarray:
    """Dimer responses g_i at post-arrival times t^k, shape (N, len(times_rel)).

    times_rel are offsets from each sensor's own arrival time, shared by
    all sensors.
    """
    if a1 < 0.0:
        raise ValueError(f"inlet concentration must be >= 0, got {a1:g}")
    a_out = outer_concentrations(cfg, a1)
    ts = np.ascontiguousarray(times_rel, dtype=float)
    g = np.empty((cfg.n_sensors, ts.shape[0]))
    for i in range(cfg.n_sensors):
        samples = integrate_sensor(cfg, chem, a_out[i], ts)
        g[i] = samples[:, 1 + DIMER]
    return g


def response_sensitivity(
    cfg: ChamberConfig, chem: SurfaceChemistry, a_outer: float, times_rel
) -> np.ndarray:
    """dg/dA of a single sensor block at outer concentration ``a_outer``.

    Integrates the forward-sensitivity system jointly with the state and
    returns the dimer sensitivity on the grid, (mol/m^2)/(mol/m^3).
    """
    samples = integrate_sensor(cfg, chem, a_outer, times_rel, with_sensitivity=True)
    return samples[:, 10 + DIMER].copy()
