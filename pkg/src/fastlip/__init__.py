"""Toolkit for Fast-Lipschitz optimization problems.

Checks qualifying conditions on sampled grids, solves by fixed-point
iteration (synchronous or simulated asynchronous), certifies KKT
multipliers, and cross-checks results against brute-force oracles.
"""

from .core import (
    BoundingBox,
    ConditionSample,
    FastLipError,
    InvalidInputError,
    ProblemSpec,
    inf_norm,
    one_norm,
    spectral_radius,
    transpose_norm,
)
from .gallery import (
    OptimalControlSpec,
    epigraph_transform,
    make_optimal_control,
    make_power_control,
    make_toy,
    result1_check,
)
from .oracle import control_bruteforce, pareto_check, scalarized_grid_opt
from .problem_file import load_problem
from .qc import (
    OLD_I,
    OLD_II,
    OLD_III,
    Q1,
    Q2,
    Q2D,
    QINF,
    QINFD,
    QK,
    CertificateReport,
    Condition,
    check_condition,
    implication_audit,
    sample_grid,
)
from .relax import PartitionSpec, block_duals, check_fewer_constraints, check_missing_objective_vars
from .solver import AsyncSimConfig, SolveResult, kkt_certificate, solve_async, solve_fixed_point

__version__ = "0.1.0"
