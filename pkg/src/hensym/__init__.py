"""Minimum-matches heat exchanger network synthesis with symmetry analysis."""
from ._accel import NUMBA_ENABLED
from .core import (COLD, HOT, Cascade, HensError, HensInstance, IntervalProblem, IntervalTable,
                   InvalidIntervalError, MatchSolution, Stream, StructuralError, TemperatureInterval,
                   Utility, ValidationError, VerificationReport, build_intervals, heat_load,
                   residual_delta, residual_delta_from_capacities, verify_solution)
from .io import ParseError, emit_instance, load_instance, parse_instance
from .milp import (FIXED, FULL, PAIR, PER_INTERVAL, BnbResult, MilpModel, OptimaSet, ResourceLimit,
                   build_fixed_interval_model, build_full_model, count_configurations, enumerate_optima,
                   no_good_row, solve_bnb)
from .oracle import exhaustive_optima
from .pipeline import RunConfig, StageError, render, run_pipeline
from .simplex import (EQ, GE, LE, InfeasibleError, LinearProgram, LPResult, Row, UtilityDuty,
                      min_utility, solve_lp)
from .symmetry import (BY_FCP, BY_LOAD, GroupElement, GroupError, StreamClass, SymmetryGroup,
                       apply_permutation, build_group, canonical_form, equivalence_classes,
                       model_classes, model_group, orbit, symmetry_breaking_constraints,
                       verify_group_action)

__version__ = "0.1.0"
