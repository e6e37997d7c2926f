"""Online drone delivery service planning.

Simulates stochastic request arrival on a capacitated air network, solves
per-interval acceptance-and-routing programs under myopic and surrogate
policies, and learns data-driven link priorities from lookahead simulations.
"""

from .demand import DemandConfig, Instance, Request, generate_instance, load_instance, save_instance
from .feasibility import check_routes
from .harness import ExperimentConfig, PolicySpec, bundled_network, run_experiment
from .learning import KnnRegressor, TrainingDataset, knn_fit, knn_predict, synthesize_training_data
from .milp_core import IntervalContext, MilpModel, SurrogateParams, build_interval_model
from .network import Network, TimeExpandedGraph, build_network, expand_time, load_network
from .policy import AlphaProfile, PolicyRunReport, eval_alpha, named_profiles, run_myopic, run_surrogate
from .reservation import ReservationLedger, SpaceTimeRoute, empty_reservation, new_reservation, reserve
from .solver import SolveResult, SolverConfig, brute_force_oracle, solve

__all__ = [
    "AlphaProfile",
    "DemandConfig",
    "ExperimentConfig",
    "Instance",
    "IntervalContext",
    "KnnRegressor",
    "MilpModel",
    "Network",
    "PolicyRunReport",
    "PolicySpec",
    "Request",
    "ReservationLedger",
    "SolveResult",
    "SolverConfig",
    "SpaceTimeRoute",
    "SurrogateParams",
    "TimeExpandedGraph",
    "TrainingDataset",
    "brute_force_oracle",
    "build_interval_model",
    "build_network",
    "bundled_network",
    "check_routes",
    "empty_reservation",
    "eval_alpha",
    "expand_time",
    "generate_instance",
    "knn_fit",
    "knn_predict",
    "load_instance",
    "load_network",
    "named_profiles",
    "new_reservation",
    "reserve",
    "run_experiment",
    "run_myopic",
    "run_surrogate",
    "save_instance",
    "solve",
    "synthesize_training_data",
]

__version__ = "0.1.0"
