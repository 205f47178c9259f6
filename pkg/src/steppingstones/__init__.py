"""Exact runtime analysis of the (1+1) EA on functions of unitation."""
from .chain import (
    EAChain,
    MutationKernel,
    UnreachableTargetError,
    build_ea_chain,
    expected_hitting_time,
    hitting_times,
    mutation_kernel,
    one_step_optimum_prob,
    transition_pmf,
    uniform_start,
)
from .fitness import (
    ConstructionError,
    SteppingStoneProfile,
    UnitationFitness,
    alpha,
    build_dss,
    build_jump,
    build_needle,
    build_onemax,
    closed_form_s,
)

__version__ = "0.1.0"
