"""Biosensor-array flow simulation and inlet-concentration estimation."""

from .backend import NUMBA_ENABLED, backend_name
from .chamber import (
    ChamberConfig,
    arrival_times,
    depletion_factor,
    inner_height,
    sensor_bounds,
    velocity,
)
from .chemistry import (
    DIMER,
    SPECIES,
    RateConstants,
    SpeciesVector,
    Stoichiometry,
    SurfaceChemistry,
    adsorption_rate,
    build_stoichiometry,
    default_chemistry,
    equilibrium_initial_state,
    make_chemistry,
    rate_vector,
    species_derivative,
)
from .compartment import (
    CompartmentTrajectory,
    forward_responses,
    response_sensitivity,
    simulate_array,
)
from .errors import (
    ConfigError,
    DegenerateDesignError,
    FlowsenseError,
    NumericError,
    RegimeError,
)

__version__ = "0.1.0"
