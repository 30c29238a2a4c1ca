"""Processor-sharing queues with state-dependent throughput.

The state of the queue is a finite counting measure of remaining
processing times.  The package provides the arrival-to-arrival recursion
on that state, a catalog of service-rate functions, seeded shift-indexable
input sequences, backward (record / constant-drain) constructions of
stationary regimes, exact stationary sampling by regeneration-epoch
search, and the ``simctl`` command-line front end.
"""

from .measures import ATOM_TOL, ZERO, CountingMeasure
from .rates import (
    RateFunction,
    ValidationReport,
    classical_ps,
    dominates,
    formula_rate,
    half_interference,
    pure_delay,
    scaled_ps,
    table_rate,
    validate,
)
from .dynamics import (
    CycleSchedule,
    QueuePath,
    TrajectorySegment,
    departure_schedule,
    fluid_oracle_phi,
    gamma,
    gamma_i,
    gamma_values,
    last_departure_index,
    phi,
    simulate_queue_path,
    step,
    trajectory,
)
from .input_process import (
    Deterministic,
    DeterministicModel,
    Exponential,
    IIDModel,
    MarkedInputGenerator,
    MarkovModulatedModel,
    Pareto,
    Uniform,
    deterministic_input,
    generator_from_config,
    iid_input,
    replication_seed,
    scale_sigma,
)
from .stationary import (
    CouplingReport,
    LoynesResult,
    StabilityReport,
    StationaryProfileResult,
    backward_coupling_ps,
    backward_iterate,
    check_stability,
    estimate_prob_L_zero,
    forward_couple_two,
    lindley_W,
    loynes_L,
    stationary_profile_gginf,
)

__version__ = "0.1.0"

__all__ = [
    "ATOM_TOL",
    "ZERO",
    "CountingMeasure",
    "RateFunction",
    "ValidationReport",
    "classical_ps",
    "dominates",
    "formula_rate",
    "half_interference",
    "pure_delay",
    "scaled_ps",
    "table_rate",
    "validate",
    "CycleSchedule",
    "QueuePath",
    "TrajectorySegment",
    "departure_schedule",
    "fluid_oracle_phi",
    "gamma",
    "gamma_i",
    "gamma_values",
    "last_departure_index",
    "phi",
    "simulate_queue_path",
    "step",
    "trajectory",
    "Deterministic",
    "DeterministicModel",
    "Exponential",
    "IIDModel",
    "MarkedInputGenerator",
    "MarkovModulatedModel",
    "Pareto",
    "Uniform",
    "deterministic_input",
    "generator_from_config",
    "iid_input",
    "replication_seed",
    "scale_sigma",
    "CouplingReport",
    "LoynesResult",
    "StabilityReport",
    "StationaryProfileResult",
    "backward_coupling_ps",
    "backward_iterate",
    "check_stability",
    "estimate_prob_L_zero",
    "forward_couple_two",
    "lindley_W",
    "loynes_L",
    "stationary_profile_gginf",
    "__version__",
]
