"""Optimal dosing for a reaction-diffusion tumour model with a drug ODE.

Forward solves, penalized objective, adjoint gradient and fixed-step
gradient descent on a structured grid.
"""

from .adjoint import reduced_gradient, solve_adjoint, solve_p1, solve_p2
from .config import Scenario, load_scenario
from .drug import convolution_oracle, solve_s, verify_bounds
from .forward import ForwardProblem, assemble_A, initial_condition, solve_forward, step_y
from .model import (Grid, GrowthLaw, ModelParams, TimeMesh, check_feasibility, chi_eval, d_eval,
                    d_prime, penalty_f1, penalty_f2, reference_constant_control)
from .objective import eval_J, eval_Jeps
from .optimizer import DivergenceError, IterateRecord, dosing_init, run
from .problem import ControlProblem, gradient_check

__version__ = "0.1.0"
