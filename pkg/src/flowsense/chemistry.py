"""Ion-channel-switch (ICS) surface reaction network.

Eight surface species live on each sensor patch (densities in mol/m^2):

    B  free binding site            W  target-bound site
    C  mobile ion channel           X  target-bound mobile channel
    S  tethered ion channel         Y  site/channel cross-link
    D  conducting channel dimer     Z  target-bound dimer

The bulk analyte A (mol/m^3) drives seven reversible reactions::

    A + B <-> W     A + C <-> X     W + C <-> Y     X + B <-> Y
    C + S <-> D     A + D <-> Z     X + S <-> Z

The observable is the dimer density D: analyte arrival pulls the channel
pool into bound complexes and the dimer count decays.  The module exposes
the mass-action rate vector, the species derivative G(u, A) = M f(u, A),
and the net adsorption rate R(A, u) = A q.u - p.u that couples the surface
to the bulk transport problem.  Everything is SI throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPECIES = ("B", "C", "D", "S", "W", "X", "Y", "Z")
N_SPECIES = 8
N_REACTIONS = 7

# species indices
IDX_B, IDX_C, IDX_D, IDX_S, IDX_W, IDX_X, IDX_Y, IDX_Z = range(8)
DIMER = IDX_D

# Species x reaction matrix.  Columns are the seven reactions above, in
# order; entries are -1 (consumed), +1 (produced), 0 (not involved).
_MATRIX_CONSERVING = np.array(
    [
        [-1, 0, 0, -1, 0, 0, 0],   # B
        [0, -1, -1, 0, -1, 0, 0],  # C
        [0, 0, 0, 0, 1, -1, 0],    # D
        [0, 0, 0, 0, -1, 0, -1],   # S
        [1, 0, -1, 0, 0, 0, 0],    # W
        [0, 1, 0, -1, 0, 0, -1],   # X
        [0, 0, 1, 1, 0, 0, 0],     # Y
        [0, 0, 0, 0, 0, 1, 1],     # Z
    ],
    dtype=np.int64,
)

# Legacy variant seen in older transcriptions of this network: the C row
# reads [0,-1,-1,-1,0,0,0], i.e. C consumed by reaction 4 instead of 5.
# That breaks the channel conservation law C+X+Y+D+Z = const (reaction 4 is
# X+B<->Y, which involves no C, while reaction 5 C+S<->D does).  Kept only
# for comparison; do not simulate with it.
_MATRIX_LEGACY = _MATRIX_CONSERVING.copy()
_MATRIX_LEGACY[IDX_C] = [0, -1, -1, -1, 0, 0, 0]

# Conserved moieties (selector vectors over SPECIES order):
#   binding sites   B + W + Y
#   channels        C + X + Y + D + Z
#   tethers         S + D + Z
MOIETY_SELECTORS = {
    "sites": np.array([1, 0, 0, 0, 1, 0, 1, 0], dtype=float),
    "channels": np.array([0, 1, 1, 0, 0, 1, 1, 1], dtype=float),
    "tethers": np.array([0, 0, 1, 1, 0, 0, 0, 1], dtype=float),
}

# Total adsorbed analyte is W + X + Y + Z.
ADSORBED_SELECTOR = np.array([0, 0, 0, 0, 1, 1, 1, 1], dtype=float)


@dataclass(frozen=True)
class RateConstants:
    """Forward/backward rate constants of the seven reactions.

    f1, f2, f6 are bulk-surface association rates in m^3/(mol s); f3, f4,
    f5, f7 are surface-surface rates in m^2/(mol s).  All r_j are first
    order, 1/s.
    """

    f1: float
    f2: float
    f3: float
    f4: float
    f5: float
    f6: float
    f7: float
    r1: float
    r2: float
    r3: float
    r4: float
    r5: float
    r6: float
    r7: float

    def __post_init__(self):
        for name in ("f1", "f2", "f3", "f4", "f5", "f6", "f7",
                     "r1", "r2", "r3", "r4", "r5", "r6", "r7"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"rate constant {name} must be finite and > 0, got {v!r}")

    def forward(self) -> np.ndarray:
        return np.array([self.f1, self.f2, self.f3, self.f4, self.f5, self.f6, self.f7])

    def backward(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3, self.r4, self.r5, self.r6, self.r7])


@dataclass(frozen=True)
class SpeciesVector:
    """Named view of one surface state (all densities mol/m^2, >= 0)."""

    b: float
    c: float
    d: float
    s: float
    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        arr = self.to_array()
        if arr.shape != (N_SPECIES,):
            raise ValueError("species vector must have exactly 8 components")
        if np.any(arr < 0.0):
            bad = SPECIES[int(np.argmin(arr))]
            raise ValueError(f"species {bad} is negative")

    @classmethod
    def from_array(cls, u) -> "SpeciesVector":
        u = np.asarray(u, dtype=float)
        if u.shape != (N_SPECIES,):
            raise ValueError("species vector must have exactly 8 components")
        return cls(*u)

    def to_array(self) -> np.ndarray:
        return np.array([self.b, self.c, self.d, self.s,
                         self.w, self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class Stoichiometry:
    """Stoichiometric matrix plus the adsorption form vectors.

    ``matrix`` is the 8x7 signed species/reaction matrix; ``q`` and ``p``
    encode the net adsorption rate R(A, u) = A q.u - p.u.  q is nonzero
    only at B, C, D (association with the bulk); p only at W, X, Z
    (dissociation back into the bulk).
    """

    matrix: np.ndarray
    q: np.ndarray
    p: np.ndarray
    variant: str = "conserving"

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (N_SPECIES, N_REACTIONS):
            raise ValueError("stoichiometric matrix must be 8x7")
        if not np.isin(m, (-1, 0, 1)).all():
            raise ValueError("stoichiometric entries must be in {-1, 0, +1}")
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if np.any(q[[IDX_S, IDX_W, IDX_X, IDX_Y, IDX_Z]] != 0.0):
            raise ValueError("q may be nonzero only at B, C, D")
        if np.any(p[[IDX_B, IDX_C, IDX_D, IDX_S, IDX_Y]] != 0.0):
            raise ValueError("p may be nonzero only at W, X, Z")
        for arr in (m, q, p):
            arr.setflags(write=False)


def build_stoichiometry(rates: RateConstants, variant: str = "conserving") -> Stoichiometry:
    """Assemble the stoichiometry for a rate set.

    ``variant="conserving"`` is the default matrix (all three moiety
    conservation laws hold); ``variant="legacy"`` loads the historical
    C-row variant for comparison.
    """
    if variant == "conserving":
        matrix = _MATRIX_CONSERVING.copy()
    elif variant == "legacy":
        matrix = _MATRIX_LEGACY.copy()
    else:
        raise ValueError(f"unknown stoichiometry variant {variant!r}")
    q = np.zeros(N_SPECIES)
    q[IDX_B], q[IDX_C], q[IDX_D] = rates.f1, rates.f2, rates.f6
    p = np.zeros(N_SPECIES)
    p[IDX_W], p[IDX_X], p[IDX_Z] = rates.r1, rates.r2, rates.r6
    return Stoichiometry(matrix=matrix.astype(float), q=q, p=p, variant=variant)


def _check_state(u, A: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (N_SPECIES,):
        raise ValueError("species vector must have exactly 8 components")
    if np.any(u < 0.0):
        bad = SPECIES[int(np.argmin(u))]
        raise ValueError(f"species {bad} is negative ({u[np.argmin(u)]:g})")
    if A < 0.0:
        raise ValueError(f"bulk concentration A is negative ({A:g})")
    return u


def rate_vector(u, A: float, rates: RateConstants) -> np.ndarray:
    """Mass-action rates of the seven reactions, mol/(m^2 s)."""
    u = _check_state(u, A)
    B, C, D, S, W, X, Y, Z = u
    k = rates
    return np.array(
        [
            k.f1 * A * B - k.r1 * W,
            k.f2 * A * C - k.r2 * X,
            k.f3 * W * C - k.r3 * Y,
            k.f4 * X * B - k.r4 * Y,
            k.f5 * C * S - k.r5 * D,
            k.f6 * A * D - k.r6 * Z,
            k.f7 * X * S - k.r7 * Z,
        ]
    )


def species_derivative(u, A: float, rates: RateConstants, stoich: Stoichiometry) -> np.ndarray:
    """du/dt = M f(u, A), mol/(m^2 s)."""
    return stoich.matrix @ rate_vector(u, A, rates)


def adsorption_rate(A: float, u, rates: RateConstants, stoich: Stoichiometry) -> float:
    """Net analyte uptake per unit sensor area, R(A, u) = A q.u - p.u.

    Negative values mean net desorption.
    """
    u = _check_state(u, A)
    return float(A * (stoich.q @ u) - stoich.p @ u)


def equilibrium_initial_state(
    B0: float, C_total: float, S_total: float, rates: RateConstants
) -> np.ndarray:
    """Clean-surface state: no bound complexes, dimer pool at equilibrium.

    Solves f5*C*S = r5*D with C + D = C_total and S + D = S_total and
    returns [B, C, D, S, 0, 0, 0, 0].  The quadratic is evaluated in the
    subtraction-free form so the small root is accurate for weak
    dimerisation.
    """
    if not (B0 > 0 and C_total > 0 and S_total > 0):
        raise ValueError("surface totals must be positive")
    f5, r5 = rates.f5, rates.r5
    # f5*D^2 - (f5*(Ct+St) + r5)*D + f5*Ct*St = 0, smaller root
    b = f5 * (C_total + S_total) + r5
    disc = b * b - 4.0 * f5 * f5 * C_total * S_total
    if disc < 0.0:
        raise ArithmeticError("no real dimer equilibrium (should be impossible)")
    D = 2.0 * f5 * C_total * S_total / (b + math.sqrt(disc))
    if not (0.0 <= D <= min(C_total, S_total)):
        raise ArithmeticError(f"dimer equilibrium out of range: D={D:g}")
    u0 = np.zeros(N_SPECIES)
    u0[IDX_B] = B0
    u0[IDX_C] = C_total - D
    u0[IDX_D] = D
    u0[IDX_S] = S_total - D
    return u0


@dataclass(frozen=True)
class SurfaceChemistry:
    """Bundle of rate constants, stoichiometry and the initial surface state."""

    rates: RateConstants
    stoich: Stoichiometry
    u0: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u0, dtype=float)
        if u.shape != (N_SPECIES,) or np.any(u < 0):
            raise ValueError("u0 must be a nonnegative 8-vector")
        u.setflags(write=False)

    @property
    def dimer0(self) -> float:
        """Initial dimer density D0, the reference response level."""
        return float(self.u0[DIMER])


# ---------------------------------------------------------------------------
# Default parameter set.
#
# These are NOT measured constants: they are order-of-magnitude choices that
# keep the array transport-influenced but unsaturated for inlet
# concentrations between 1e-11 and 1e-8 mol/m^3 over runs of ~1000 s, with
# the response developing on a scale of minutes.  The binding-site pool is
# large and slow (a persistent analyte sink, so downstream depletion holds
# up over long runs) while the channel pool that carries the observable is
# small and equilibrates quickly.  Detailed balance holds around the two
# reaction loops (K1*K3 = K2*K4 and K2*K7 = K5*K6 exactly), so the network
# has a true thermodynamic equilibrium.  Override any of them through the
# experiment configuration.
# ---------------------------------------------------------------------------

DEFAULT_RATES = RateConstants(
    f1=8.7e3,     # A+B association, m^3/(mol s)
    f2=2.0e5,     # A+C association
    f3=1.0e4,     # W+C cross-linking, m^2/(mol s)
    f4=1.0e4,     # X+B cross-linking
    f5=1.0e10,    # C+S dimerisation
    f6=2.0e5,     # A+D association
    f7=1.0e10,    # X+S dimerisation
    r1=1.0e-5,    # 1/s
    r2=5.0e-3,
    r3=2.175e-3,  # = f3*K1/(K2*K4), closes the W/C/X/B loop
    r4=1.0e-4,
    r5=1.0e-2,
    r6=5.0e-3,
    r7=1.0e-2,    # = f7*K2/(K5*K6), closes the X/S/D loop
)

DEFAULT_SURFACE_TOTALS = {
    "b_total": 5.0e-10,  # binding sites, mol/m^2
    "c_total": 2.0e-12,  # mobile channels
    "s_total": 2.0e-12,  # tethered channels
}


def default_chemistry(variant: str = "conserving") -> SurfaceChemistry:
    rates = DEFAULT_RATES
    u0 = equilibrium_initial_state(
        DEFAULT_SURFACE_TOTALS["b_total"],
        DEFAULT_SURFACE_TOTALS["c_total"],
        DEFAULT_SURFACE_TOTALS["s_total"],
        rates,
    )
    return SurfaceChemistry(rates=rates, stoich=build_stoichiometry(rates, variant), u0=u0)


def make_chemistry(
    rates: RateConstants,
    b_total: float,
    c_total: float,
    s_total: float,
    variant: str = "conserving",
) -> SurfaceChemistry:
    u0 = equilibrium_initial_state(b_total, c_total, s_total, rates)
    return SurfaceChemistry(rates=rates, stoich=build_stoichiometry(rates, variant), u0=u0)
