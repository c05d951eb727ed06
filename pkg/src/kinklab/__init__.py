"""Kink-defect interaction toolkit: reduced Hamiltonian model, invariant
manifold traces, exponentially small splitting and critical energies."""

from .closedforms import PredictorSet, predictors, separatrix, separatrix_time, torus_point
from .criticality import (FitReport, ScanRow, find_hc, find_hc_shooting, find_hs,
                          fit_exponential_rate, fit_vf_law, measure_vf)
from .errors import (AccuracyError, BracketError, DegenerateError, DomainError,
                     IntegrationError, IntegrationTimeout, KinklabError, TurnedBackError)
from .integrator import IntegratorConfig, Outcome, integrate, integrate_to_section, shoot
from .manifolds import (SectionCurve, SectionPoint, point_curve_relation, splitting_distance,
                        stable_curve, stable_point, unstable_curve, unstable_point)
from .melnikov import MelnikovResult, melnikov_quadrature, melnikov_residue
from .model import Params, PhaseState, hamiltonian, make_params, reflect, vector_field

__version__ = "0.1.0"
