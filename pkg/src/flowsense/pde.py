"""Reference solver for the coupled chamber-transport / surface-kinetics system.

Discretizes the chamber on a (P+1) x (Q+1) node grid (i along the flow,
j along the height), eliminates all boundary nodes through the closures

    A[0,j] = A1 (inlet)          A[P,j] = A[P-1,j] (outlet, no flux)
    A[i,Q] = A[i,Q-1] (ceiling)  A[i,0] = A[i,1]   (floor, off sensor)
    A[i,0] = (A[i,1] + (dz/g) p.u) / (1 + (dz/g) q.u)   (on sensor)

and advances interior concentrations plus per-node surface species with an
adaptive explicit Runge-Kutta pair whose step is capped by the diffusion
CFL bound dt <= 0.4 min(dy,dz)^2 / (2 gamma).

Two advection stencils are available.  "strict" uses the one-sided
downstream difference whose quasi-positivity needs dy < gamma/vbar --
impractically fine for realistic chambers but exactly the scheme whose
positivity is provable, so it is kept for positivity testing on small
grids.  "relaxed" upwinds along the flow and is quasi-positive on any
grid; it is the workhorse for desk-scale runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import chamber
from .chamber import ChamberConfig
from .chemistry import DIMER, SurfaceChemistry
from .errors import ConfigError, NumericError
from .kernels import pde as kpde

CFL_SAFETY = 0.4
RTOL = 1e-6
ATOL_FACTOR = 1e-12
MAX_STEPS = 200_000_000

_STATUS_MSG = {1: "step size underflow", 3: "step budget exhausted"}


@dataclass(frozen=True)
class GridSpec:
    """Spatial discretization plus the sensor-node index sets."""

    P: int                 # steps along the flow; nodes i = 0..P
    Q: int                 # steps along the height; nodes j = 0..Q
    dy: float              # m
    dz: float              # m
    mode: str              # "strict" | "relaxed"
    sensor_nodes: tuple    # per sensor: ascending array of node indices i

    @property
    def n_interior(self) -> int:
        return (self.P - 1) * (self.Q - 1)

    @property
    def n_surface_nodes(self) -> int:
        return sum(len(v) for v in self.sensor_nodes)

    @property
    def n_state(self) -> int:
        return self.n_interior + 8 * self.n_surface_nodes

    def surf_index(self) -> np.ndarray:
        if not self.sensor_nodes:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([np.asarray(v, dtype=np.int64) for v in self.sensor_nodes])

    def surf_sensor(self) -> np.ndarray:
        if not self.sensor_nodes:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([
            np.full(len(v), k, dtype=np.int64) for k, v in enumerate(self.sensor_nodes)
        ])


def min_strict_p(cfg: ChamberConfig) -> int:
    """Smallest P with dy = l/P < gamma/vbar."""
    return int(np.floor(cfg.length * cfg.v_bar / cfg.gamma)) + 1


def build_grid(cfg: ChamberConfig, P: int, Q: int, mode: str = "strict") -> GridSpec:
    """Lay out the grid and locate sensor nodes.

    In strict mode the positivity condition dy < gamma/vbar is enforced;
    the error names the smallest admissible P.
    """
    if mode not in ("strict", "relaxed"):
        raise ConfigError(f"mode must be 'strict' or 'relaxed', got {mode!r}")
    if P < 4 or Q < 4:
        raise ConfigError("need at least 4 grid steps in each direction")
    dy = cfg.length / P
    dz = cfg.height / Q
    if mode == "strict" and dy >= cfg.gamma / cfg.v_bar:
        raise ConfigError(
            f"strict mode requires dy < gamma/vbar = {cfg.gamma / cfg.v_bar:.4g} m "
            f"(got dy = {dy:.4g} m); use P >= {min_strict_p(cfg)} or relaxed mode"
        )

    pad = 1e-9 * cfg.length
    nodes = []
    for y1, y2 in chamber.sensor_bounds(cfg):
        idx = np.arange(P + 1)
        on = (idx * dy >= y1 - pad) & (idx * dy <= y2 + pad)
        v = idx[on].astype(np.int64)
        if v.size == 0:
            raise ConfigError(
                f"sensor [{y1:g}, {y2:g}] m contains no grid node at dy = {dy:g} m; "
                "refine the grid"
            )
        if v[0] < 1 or v[-1] > P - 1:
            raise ConfigError(
                "sensor touches the inlet or outlet column; move the array "
                "inward or shorten it"
            )
        nodes.append(v)
    for a, b in zip(nodes, nodes[1:]):
        if a[-1] >= b[0]:
            raise ConfigError("sensor node sets overlap; the gap is below dy")
    return GridSpec(P=P, Q=Q, dy=dy, dz=dz, mode=mode, sensor_nodes=tuple(nodes))


@dataclass(frozen=True)
class PdeField:
    """Full grid snapshot with closures applied, plus per-sensor species."""

    A: np.ndarray          # (P+1, Q+1) bulk concentrations, closures applied
    U: tuple               # per sensor: (n_nodes, 8) species arrays
    t: float

    def state(self, grid: GridSpec) -> np.ndarray:
        y = np.empty(grid.n_state)
        y[: grid.n_interior] = self.A[1:grid.P, 1:grid.Q].reshape(-1)
        off = grid.n_interior
        for u in self.U:
            arr = np.asarray(u, dtype=float).reshape(-1)
            y[off: off + arr.size] = arr
            off += arr.size
        return y


def _chem_arrays(chem: SurfaceChemistry):
    fw = np.ascontiguousarray(chem.rates.forward())
    rv = np.ascontiguousarray(chem.rates.backward())
    q8 = np.ascontiguousarray(chem.stoich.q, dtype=float)
    p8 = np.ascontiguousarray(chem.stoich.p, dtype=float)
    M = np.ascontiguousarray(chem.stoich.matrix, dtype=float)
    return fw, rv, q8, p8, M


def field_from_state(
    y: np.ndarray, grid: GridSpec, cfg: ChamberConfig, chem: SurfaceChemistry,
    a_inlet: float, t: float,
) -> PdeField:
    """Reconstruct the displayable field (ghost values included) from a state."""
    P, Q = grid.P, grid.Q
    A = np.empty((P + 1, Q + 1))
    A[1:P, 1:Q] = y[: grid.n_interior].reshape(P - 1, Q - 1)
    A[0, :] = a_inlet
    # floor: insulating by default, reactive balance on sensor nodes
    A[1:P, 0] = A[1:P, 1]
    dzg = grid.dz / cfg.gamma
    off = grid.n_interior
    U = []
    for v in grid.sensor_nodes:
        u = y[off: off + 8 * len(v)].reshape(len(v), 8)
        U.append(u.copy())
        off += 8 * len(v)
        qu = u @ np.asarray(chem.stoich.q, dtype=float)
        pu = u @ np.asarray(chem.stoich.p, dtype=float)
        A[v, 0] = (A[v, 1] + dzg * pu) / (1.0 + dzg * qu)
    A[P, :] = A[P - 1, :]
    A[1:P + 1, Q] = A[1:P + 1, Q - 1]
    return PdeField(A=A, U=tuple(U), t=t)


def initial_field(grid: GridSpec, cfg: ChamberConfig, chem: SurfaceChemistry,
                  a_inlet: float) -> PdeField:
    """Empty chamber (A = 0 inside) with every sensor at the clean state u0."""
    y = np.zeros(grid.n_state)
    off = grid.n_interior
    for v in grid.sensor_nodes:
        y[off: off + 8 * len(v)] = np.tile(chem.u0, len(v))
        off += 8 * len(v)
    return field_from_state(y, grid, cfg, chem, a_inlet, 0.0)


def rhs(field: PdeField, grid: GridSpec, cfg: ChamberConfig, chem: SurfaceChemistry,
        a_inlet: float):
    """Time derivative of the semi-discrete system at ``field``.

    Returns (dA, dU): dA has shape (P-1, Q-1) covering interior nodes,
    dU is a tuple of per-sensor (n_nodes, 8) arrays.
    """
    y = field.state(grid)
    if not np.all(np.isfinite(y)):
        flat = int(np.argmin(np.isfinite(y)))
        if flat < grid.n_interior:
            i = flat // (grid.Q - 1) + 1
            j = flat % (grid.Q - 1) + 1
            raise NumericError(f"non-finite bulk concentration at node (i={i}, j={j})")
        s = (flat - grid.n_interior) // 8
        raise NumericError(f"non-finite surface state at node index {s}")
    fw, rv, q8, p8, M = _chem_arrays(chem)
    vj = chamber.velocity(cfg, grid.dz * np.arange(grid.Q + 1))
    out = np.empty(grid.n_state)
    a0buf = np.empty(grid.P)
    kpde.rhs_dispatch(
        y, out, a0buf, grid.P, grid.Q, grid.dy, grid.dz, cfg.gamma,
        float(a_inlet), vj, 1 if grid.mode == "relaxed" else 0,
        grid.surf_index(), q8, p8, fw, rv, M,
    )
    dA = out[: grid.n_interior].reshape(grid.P - 1, grid.Q - 1).copy()
    dU = []
    off = grid.n_interior
    for v in grid.sensor_nodes:
        dU.append(out[off: off + 8 * len(v)].reshape(len(v), 8).copy())
        off += 8 * len(v)
    return dA, tuple(dU)


@dataclass(frozen=True)
class PdeRun:
    """Result of a reference-solver integration."""

    times: np.ndarray            # sample times, s
    dimer_mean: np.ndarray       # (N, n_samples) per-sensor mean dimer density
    snapshots: tuple             # PdeField at sample times (empty unless kept)
    min_state: float             # most negative value seen in any accepted state
    positivity_violated: bool    # min_state below the reporting threshold
    n_steps: int
    mode: str


def cfl_step(grid: GridSpec, cfg: ChamberConfig) -> float:
    return CFL_SAFETY * min(grid.dy, grid.dz) ** 2 / (2.0 * cfg.gamma)


def integrate(
    field0: PdeField,
    grid: GridSpec,
    cfg: ChamberConfig,
    chem: SurfaceChemistry,
    a_inlet: float,
    horizon: float,
    sample_dt: float,
    keep_snapshots: bool = False,
) -> PdeRun:
    """Advance the semi-discrete system to ``horizon``.

    The per-sensor observable is the plain mean of the dimer density over
    each sensor's nodes.  Negative excursions beyond -1e-12 times the
    state scale (possible in relaxed mode) are flagged, not fatal.
    """
    if a_inlet < 0.0:
        raise ValueError("inlet concentration must be >= 0")
    if horizon <= 0.0 or sample_dt <= 0.0:
        raise ConfigError("horizon and sample_dt must be > 0")
    y0 = field0.state(grid)
    if np.any(y0 < 0.0):
        raise ValueError("initial state must be nonnegative")

    fw, rv, q8, p8, M = _chem_arrays(chem)
    vj = chamber.velocity(cfg, grid.dz * np.arange(grid.Q + 1))
    surf_i = grid.surf_index()
    n_samp = int(np.floor(horizon / sample_dt)) + 1
    ts = sample_dt * np.arange(n_samp)
    t_end = float(ts[-1])

    nint = grid.n_interior
    dimer_idx = nint + 8 * np.arange(grid.n_surface_nodes, dtype=np.int64) + DIMER
    dimer_samples = np.empty((n_samp, grid.n_surface_nodes))
    snaps = np.empty((n_samp, grid.n_state)) if keep_snapshots else np.empty((1, 1))

    u_scale = max(float(np.max(chem.u0)), 1e-300)
    a_scale = max(float(a_inlet), float(np.max(y0[:nint]) if nint else 0.0), 1e-300)
    atol = np.where(np.arange(grid.n_state) < nint,
                    ATOL_FACTOR * a_scale, ATOL_FACTOR * u_scale)
    status, t_reached, min_state, n_steps = kpde.integrate_dispatch(
        y0, grid.P, grid.Q, grid.dy, grid.dz, cfg.gamma, float(a_inlet), vj,
        1 if grid.mode == "relaxed" else 0,
        surf_i, q8, p8, fw, rv, M,
        t_end, ts, RTOL, atol,
        cfl_step(grid, cfg), MAX_STEPS,
        dimer_idx, dimer_samples, 1 if keep_snapshots else 0, snaps,
    )
    if status != 0:
        raise NumericError(
            f"reference solve failed ({_STATUS_MSG.get(status, status)}) "
            f"at t={t_reached:.6g} s on the {grid.P}x{grid.Q} grid"
        )

    surf_sensor = grid.surf_sensor()
    n_sens = len(grid.sensor_nodes)
    dbar = np.empty((n_sens, n_samp))
    for k in range(n_sens):
        dbar[k] = dimer_samples[:, surf_sensor == k].mean(axis=1)

    snapshots = ()
    if keep_snapshots:
        snapshots = tuple(
            field_from_state(snaps[m], grid, cfg, chem, a_inlet, float(ts[m]))
            for m in range(n_samp)
        )
    scale = max(a_scale, u_scale)
    violated = min_state < -1e-12 * scale
    return PdeRun(
        times=ts,
        dimer_mean=dbar,
        snapshots=snapshots,
        min_state=float(min_state),
        positivity_violated=bool(violated),
        n_steps=int(n_steps),
        mode=grid.mode,
    )


def peclet(cfg: ChamberConfig, z: float) -> float:
    """Transport ratio at height z: 4 L vbar (z/h)(1 - z/h) / gamma.

    Large values in the bulk mean advection dominates and the compartment
    reduction applies; values near 0 (walls) are diffusion-controlled.
    """
    if not (0.0 <= z <= cfg.height):
        raise ValueError(f"z must lie in [0, {cfg.height:g}], got {z:g}")
    zz = z / cfg.height
    eps = cfg.sensor_length / cfg.height
    p = cfg.gamma / (4.0 * cfg.height * cfg.v_bar)
    return eps * zz * (1.0 - zz) / p
