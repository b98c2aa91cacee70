"""Estimators of the homogenized coefficient of random conductance models.

The main entry points are :func:`run_hier` (hierarchical resolvent cascade),
:func:`run_classical`, :func:`run_parabolic` and the random-walk estimators,
plus scikit-learn style wrappers in :mod:`ahom.estimators` and the ``ahom``
command line.
"""
from .cg import ConvergenceError, SolveParams, WorkCounter, cg_solve
from .chain import ChainSpec, Schedule, chain_sequence, discrete_sigma2, pgk_decomposition, \
    remainder_decay
from .classical import ClassicalPlan, make_classical_plan, run_classical
from .env import ConductanceLaw, Environment, edge, mean_conductance, parse_law
from .estimators import ClassicalEstimator, HierarchicalEstimator, ParabolicEstimator, \
    WalkEstimator
from .hier import HierPlan, HierReport, hier_partial_terms, make_plan, run_hier
from .lattice import BoxSpec, GridFn, LocalField, apply_operator, box_average, div_a_xi, \
    materialize, pi_weight
from .parabolic import ParabolicPlan, make_parabolic_plan, run_parabolic, \
    spectral_identity_check
from .report import EstimateReport
from .sweep import fit_slope
from .walk import WalkConfig, WalkSample, extrapolated_estimator, naive_estimator, \
    simulate_vsrw

__version__ = "0.1.0"
