"""Phase-field approximation of branched transport energies."""

from .costs import (CostParams, CostEvaluation, TransitionProfile,
                    transition_energy, q_infinity, kappa, cost_f, cost_table,
                    competitor_bound, finite_eps_cost, write_cost_table_csv)
from .errors import (BranchflowError, ValidationError, SolverError,
                     NonConvergence, BracketFailure, KirchhoffViolation)
from .fields import (GridSpec, ScalarField, VectorField, SourceSpec,
                     EnergyBreakdown, eta_barrier, mollified_source,
                     divergence, divergence_residual, energy)
from .recovery import (Segment, PolyhedralMeasure, RecoveryResult,
                       validate_kirchhoff, limit_energy,
                       build_segment_recovery, build_polyhedral_recovery,
                       mass_fraction_near)
from .scenario import Scenario, load_scenario, parse_scenario
from .solver import (OptimizerConfig, MinimizeResult, sigma_step, u_step,
                     minimize, mass_bound_check)

__version__ = "0.1.0"
