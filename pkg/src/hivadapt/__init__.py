"""Adaptive adjoint-based reconstruction of the immune response in an acute HIV model."""
__version__ = "0.1.0"

from .mesh import TimeMesh, PiecewiseFn, uniform_mesh, jumps, refine_where, transfer, l2_norm, weighted_l2
from .model import ModelParams, CtlParams, PATIENT_CTL, rhs, rhs_jacobian, adjoint_rhs, ctl_f, ctl_d, ctl_e0
from .forward import NewtonConfig, StateTrajectory, step_implicit, solve_forward
from .adjoint import AdjointTrajectory, step_backward, solve_adjoint
from .data import ClinicalSeries, InterpolatedData, TwinSpec, builtin_patient, interpolate_to_mesh, load_csv, write_csv, make_twin
from .objective import (SmoothingWeights, TikhonovConfig, InverseProblem, evaluate_j, assemble_gradient,
                        stationarity_residual, data_residuals, build_smoothing)
from .optimizer import CgaConfig, CgaTrace, cga_run, reg_schedule
from .adaptive import AcgaConfig, RefinementRecord, acga_run, estimator_gradient_jump, estimator_lipschitz_jump, estimator_residual
from .problems import PatientSetup, TwinSetup
