"""Injectivity capacity upper bounds for deep random ReLU networks.

Plain and partially lifted random-dual objectives, their saddle points and
capacity roots, plus a finite-size Monte Carlo check.
"""

from .kernels import DomainError, fq1_lifted, fq1_plain, fq2_lifted, fq2_plain
from .mc_lab import McOutcome, SampledNetwork, phase_sweep, rfp_minimize, sample_network
from .objective import (InjectivityMode, Method, NetworkProfile, ObjectiveBreakdown, SaddleVariables, evaluate,
                        phi0_lifted, phi0_plain)
from .solver import (CapacityResult, NoSignChange, SaddleReport, SolverConfig, SolverError, capacity_root,
                     minimal_sequence, saddle_solve)

__version__ = "0.1.0"
