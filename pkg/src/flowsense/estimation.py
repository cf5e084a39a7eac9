"""Inlet-concentration estimation and array-design analysis.

The inlet concentration enters the measurements only through the reduced
forward model, so the fit is a one-dimensional nonlinear least squares
problem

    A1_hat = argmin (1/S) sum_i sum_k ( m_i^k - g_i(A1, t^{i,k}) )^2

solved by a coarse log-spaced multistart followed by golden-section
refinement (the response sigmoid has flat plateaus where derivative-based
steps stall).  The asymptotic machinery built on the response sensitivity
dg/dA:

    Gamma        (1/S) sum_k sum_i alpha^(2i-2) [dg(alpha^(i-1) A*, t^k)/dA]^2
    sigma^2_SN   sigma^2 / sum_i d_i,   d_i = alpha^(2i-2) sum_k [dg/dA]^2
    H(A)         sum_k [dg(A, t^k)/dA]^2
    N*           floor( log(A_m/A*) / log(alpha) ) + 2

quantifies how the estimate improves with the sensor count, and the
interval where alpha^2 H(alpha A) > H(A) marks inlet concentrations for
which an extra sensor is worth more than averaging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chamber, compartment
from .chamber import ChamberConfig
from .chemistry import SurfaceChemistry
from .chemistry import DIMER
from .errors import ConfigError, DegenerateDesignError, NumericError
from .kernels import ode as kode

DEFAULT_BRACKET = (1e-12, 1e-6)
MULTISTART_POINTS = 16
REL_TOL = 1e-6


@dataclass(frozen=True)
class MeasurementSet:
    """Noisy sensor readings on a shared post-arrival schedule.

    ``times`` holds the offsets t^k (s) common to all sensors, so sensor i
    is read at t_i + t^k; ``values`` is (N, S).  ``sigma`` is the noise
    standard deviation in response units (mol/m^2).
    """

    times: np.ndarray       # (S,) offsets from each sensor's arrival, s
    values: np.ndarray      # (N, S)
    sigma: float
    arrivals: np.ndarray    # (N,) t_i, s
    seed: int | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.ndim != 2 or v.shape[1] != t.shape[0]:
            raise ValueError("values must be (n_sensors, len(times))")
        if t.shape[0] == 0 or t[0] <= 0.0 or np.any(np.diff(t) <= 0.0):
            raise ValueError("sample offsets must be positive and strictly increasing")
        if self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")

    @property
    def n_sensors(self) -> int:
        return self.values.shape[0]

    @property
    def n_samples(self) -> int:
        return self.times.shape[0]


def uniform_schedule(S: int, sample_dt: float = 1.0) -> np.ndarray:
    """Default schedule: t^k = k * sample_dt for k = 1..S."""
    if S < 1 or sample_dt <= 0:
        raise ConfigError("need S >= 1 samples and sample_dt > 0")
    return sample_dt * np.arange(1, S + 1)


def snr_db_to_sigma(snr_db: float, dimer0: float) -> float:
    """Noise level from an SNR given as initial-dimer-squared over variance."""
    return dimer0 * 10.0 ** (-snr_db / 20.0)


def synthesize_measurements(
    responses,
    sigma: float,
    times,
    arrivals,
    seed=None,
    rng: np.random.Generator | None = None,
    noise=None,
) -> MeasurementSet:
    """m_i^k = g_i(t^k) + n_i^k with i.i.d. Gaussian noise by default.

    ``responses`` is the (N, S) noiseless series on ``times``; pass a
    ``noise`` callable (rng, shape) -> array to swap the generator for
    another i.i.d. source.
    """
    g = np.asarray(responses, dtype=float)
    if rng is None:
        rng = np.random.default_rng(seed)
    if sigma == 0.0:
        vals = g.copy()
    else:
        draw = noise(rng, g.shape) if noise is not None else rng.standard_normal(g.shape)
        vals = g + sigma * np.asarray(draw)
    seed_val = seed if isinstance(seed, (int, np.integer)) else None
    return MeasurementSet(times=np.asarray(times, dtype=float), values=vals,
                          sigma=float(sigma), arrivals=np.asarray(arrivals, dtype=float),
                          seed=seed_val)


def measurements_from_trajectory(
    traj: compartment.CompartmentTrajectory, sigma: float, times, seed=None, noise=None
) -> MeasurementSet:
    """Sample a stored trajectory at post-arrival offsets and add noise."""
    times = np.asarray(times, dtype=float)
    g = np.empty((traj.n_sensors, times.shape[0]))
    for i in range(traj.n_sensors):
        local = traj.times[i] - traj.arrivals[i]
        if times[-1] > local[-1] + 1e-9:
            raise ValueError(
                f"schedule extends to {times[-1]:g} s after arrival but the "
                f"trajectory only covers {local[-1]:g} s"
            )
        g[i] = np.interp(times, local, traj.response[i])
    return synthesize_measurements(g, sigma, times, traj.arrivals, seed=seed, noise=noise)


@dataclass(frozen=True)
class NlsResult:
    a1_hat: float
    objective: float
    trace: tuple            # ((A, objective) evaluations in order)
    boundary_hit: bool
    n_evals: int


def _objective_factory(meas: MeasurementSet, cfg: ChamberConfig, chem: SurfaceChemistry):
    alpha = chamber.depletion_factor(cfg)
    h0 = chamber.inner_height(cfg)
    M = np.ascontiguousarray(chem.stoich.matrix, dtype=float)
    ts = np.ascontiguousarray(meas.times)
    m = meas.values
    n_sens = meas.n_sensors
    atol_template = compartment._atol_state(chem, 1.0)
    out = np.empty((ts.shape[0], 9))
    y0 = np.zeros(9)
    y0[1:9] = chem.u0

    def objective(a1: float) -> float:
        total = 0.0
        a_i = a1
        for i in range(n_sens):
            par = kode.pack_params(h0, cfg.gamma, a_i, chem.rates)
            atol = atol_template.copy()
            atol[0] = compartment.ATOL_FACTOR * (a_i if a_i > 0 else 1.0)
            status, t_fail = kode.integrate_kinetics(
                0, y0, float(ts[-1]), ts, par, M, compartment.RTOL, atol,
                0.0, compartment.MAX_STEPS, out,
            )
            if status != 0:
                raise NumericError(
                    f"forward model failed at A1={a1:g}, sensor {i + 1}, t={t_fail:g}"
                )
            r = m[i] - out[:, 1 + DIMER]
            total += float(r @ r)
            a_i *= alpha
        return total / ts.shape[0]

    return objective


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def nls_estimate(
    meas: MeasurementSet,
    cfg: ChamberConfig,
    chem: SurfaceChemistry,
    bracket=DEFAULT_BRACKET,
    multistart: int = MULTISTART_POINTS,
    rel_tol: float = REL_TOL,
) -> NlsResult:
    """Fit the inlet concentration over a positive bracket.

    Evaluates the objective on a log-spaced grid of ``multistart`` points,
    then golden-section refines (in log concentration, so the tolerance is
    relative) inside the best grid cell.  A minimizer pinned at a bracket
    edge is flagged, not raised: it usually means the bracket is wrong or
    the response is saturated.
    """
    lo, hi = bracket
    if not (0.0 < lo < hi):
        raise ConfigError(f"bracket must satisfy 0 < lo < hi, got {bracket!r}")
    if multistart < 4:
        raise ConfigError("need at least 4 multistart points")
    obj = _objective_factory(meas, cfg, chem)
    trace = []

    def f(a):
        v = obj(a)
        trace.append((a, v))
        return v

    grid = np.geomspace(lo, hi, multistart)
    vals = np.array([f(a) for a in grid])
    j = int(np.argmin(vals))
    a_lo = grid[max(j - 1, 0)]
    a_hi = grid[min(j + 1, multistart - 1)]

    # golden section on log A
    xa, xb = math.log(a_lo), math.log(a_hi)
    xc = xb - _INVPHI * (xb - xa)
    xd = xa + _INVPHI * (xb - xa)
    fc = f(math.exp(xc))
    fd = f(math.exp(xd))
    while (xb - xa) > rel_tol:
        if fc < fd:
            xb, xd, fd = xd, xc, fc
            xc = xb - _INVPHI * (xb - xa)
            fc = f(math.exp(xc))
        else:
            xa, xc, fc = xc, xd, fd
            xd = xa + _INVPHI * (xb - xa)
            fd = f(math.exp(xd))
    x_best = 0.5 * (xa + xb)
    a_best = math.exp(x_best)
    v_best = f(a_best)
    boundary = (a_best <= lo * (1.0 + 10.0 * rel_tol)) or (a_best >= hi * (1.0 - 10.0 * rel_tol))
    return NlsResult(a1_hat=a_best, objective=v_best, trace=tuple(trace),
                     boundary_hit=bool(boundary), n_evals=len(trace))


def sensor_sensitivities(
    cfg: ChamberConfig, chem: SurfaceChemistry, a_star: float, times
) -> np.ndarray:
    """d_i = alpha^(2i-2) sum_k [dg(alpha^(i-1) A*, t^k)/dA]^2, shape (N,)."""
    alpha = chamber.depletion_factor(cfg)
    times = np.asarray(times, dtype=float)
    d = np.empty(cfg.n_sensors)
    a_i = float(a_star)
    w = 1.0
    for i in range(cfg.n_sensors):
        s = compartment.response_sensitivity(cfg, chem, a_i, times)
        d[i] = w * float(s @ s)
        a_i *= alpha
        w *= alpha * alpha
    return d


def asymptotic_gamma(
    cfg: ChamberConfig, chem: SurfaceChemistry, a_star: float, S: int,
    sample_dt: float = 1.0,
) -> float:
    """Finite-S average of the per-sample information (the S -> inf limit
    is approached from below as the response equilibrates)."""
    times = uniform_schedule(S, sample_dt)
    return float(np.sum(sensor_sensitivities(cfg, chem, a_star, times)) / S)


def variance_approx(
    cfg: ChamberConfig, chem: SurfaceChemistry, a_star: float, sigma: float,
    S: int, sample_dt: float = 1.0,
):
    """Finite-sample variance approximation sigma^2 / sum d_i.

    Returns (sigma2, d) with d the per-sensor sensitivities; raises when
    every d_i vanishes (fully saturated design, nothing to estimate).
    """
    times = uniform_schedule(S, sample_dt)
    d = sensor_sensitivities(cfg, chem, a_star, times)
    total = float(np.sum(d))
    if total <= 0.0:
        raise DegenerateDesignError(
            f"all sensor sensitivities are zero at A*={a_star:g}; the design "
            "cannot estimate the inlet concentration"
        )
    return sigma * sigma / total, d


@dataclass(frozen=True)
class HCurve:
    a_grid: np.ndarray      # evaluation concentrations, mol/m^3
    h: np.ndarray           # H(A)
    h_scaled: np.ndarray    # alpha^2 H(alpha A)
    interval: tuple | None  # (A_m, A_n) endpoints where scaled > plain, or None
    interval_idx: tuple | None


def h_curve(
    cfg: ChamberConfig, chem: SurfaceChemistry, a_grid, S: int, sample_dt: float = 1.0
) -> HCurve:
    """H(A) and alpha^2 H(alpha A) on a grid, plus the maximal contiguous
    run where the scaled curve strictly exceeds the plain one."""
    a_grid = np.asarray(a_grid, dtype=float)
    if a_grid.ndim != 1 or a_grid.shape[0] < 2:
        raise ConfigError("a_grid must hold at least two concentrations")
    if np.any(a_grid <= 0) or np.any(np.diff(a_grid) <= 0):
        raise ConfigError("a_grid must be positive and increasing")
    alpha = chamber.depletion_factor(cfg)
    times = uniform_schedule(S, sample_dt)

    def H(a):
        s = compartment.response_sensitivity(cfg, chem, a, times)
        return float(s @ s)

    h = np.array([H(a) for a in a_grid])
    hs = np.array([alpha * alpha * H(alpha * a) for a in a_grid])

    mask = hs > h
    best = None
    start = None
    for idx, flag in enumerate(mask):
        if flag and start is None:
            start = idx
        if (not flag or idx == len(mask) - 1) and start is not None:
            end = idx if flag else idx - 1
            if best is None or (end - start) > (best[1] - best[0]):
                best = (start, end)
            start = None
    if best is None:
        return HCurve(a_grid, h, hs, None, None)
    return HCurve(a_grid, h, hs,
                  (float(a_grid[best[0]]), float(a_grid[best[1]])), best)


def n_star(a_m: float, a_star: float, alpha: float) -> int:
    """Largest array size that still improves variance super-linearly."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha:g}")
    if not (0.0 < a_m <= a_star):
        raise ValueError(
            f"requires 0 < A_m <= A*, got A_m={a_m:g}, A*={a_star:g}"
        )
    return int(math.floor(math.log(a_m / a_star) / math.log(alpha))) + 2


@dataclass(frozen=True)
class MonteCarloResult:
    estimates: np.ndarray     # accepted per-trial estimates
    n_boundary: int           # trials discarded for hitting the bracket edge
    mean: float
    std: float
    std_over_a_star: float


def monte_carlo_variance(
    cfg: ChamberConfig,
    chem: SurfaceChemistry,
    a_star: float,
    sigma: float,
    S: int,
    n_sensors: int,
    trials: int,
    master_seed: int,
    sample_dt: float = 1.0,
    bracket=DEFAULT_BRACKET,
) -> MonteCarloResult:
    """Repeated synthesize-and-fit trials with per-trial derived RNG streams.

    Trial k draws its noise from a child of SeedSequence(master_seed), so
    the whole study is reproducible from (config, master_seed) alone.
    """
    if trials < 2:
        raise ConfigError("need at least 2 trials")
    run_cfg = cfg if cfg.n_sensors == n_sensors else ChamberConfig(
        height=cfg.height, length=cfg.length, width=cfg.width,
        sensor_length=cfg.sensor_length, sensor_spacing=cfg.sensor_spacing,
        sensor_lead=cfg.sensor_lead, n_sensors=n_sensors,
        gamma=cfg.gamma, v_bar=cfg.v_bar, alpha_override=cfg.alpha_override,
    )
    times = uniform_schedule(S, sample_dt)
    g_true = compartment.forward_responses(run_cfg, chem, a_star, times)
    arrivals = chamber.arrival_times(run_cfg)

    children = np.random.SeedSequence(master_seed).spawn(trials)
    estimates = []
    n_boundary = 0
    for k in range(trials):
        rng = np.random.default_rng(children[k])
        meas = synthesize_measurements(g_true, sigma, times, arrivals, rng=rng)
        res = nls_estimate(meas, run_cfg, chem, bracket=bracket)
        if res.boundary_hit:
            n_boundary += 1
        else:
            estimates.append(res.a1_hat)
    est = np.asarray(estimates)
    if est.size < 2:
        raise DegenerateDesignError(
            f"only {est.size} of {trials} trials stayed inside the bracket"
        )
    return MonteCarloResult(
        estimates=est,
        n_boundary=n_boundary,
        mean=float(est.mean()),
        std=float(est.std(ddof=1)),
        std_over_a_star=float(est.std(ddof=1) / a_star),
    )
