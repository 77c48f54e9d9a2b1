"""Periodic kernels, dyadic block analysis, kernel splitting and entropy estimates."""

from .budget import BudgetPlan, EAProfile, LevelClassSpec, budget_allocate, predicted_exponents
from .decomposition import block_norm_table, image_functions, split_kernel
from .entropy import (MetricInstance, ball_sampler, covering_exact, covering_greedy,
                      entropy_bracket, entropy_table, packing_number)
from .errors import GridTooSmallError, PreconditionError, ResourceCapError
from .kernels import DifferenceKernel, KernelSpec, bernoulli, fejer, vdp
from .rates import RateFit, fit_rates
from .smoothness import ClassParams, certify_H
from .spectral import Grid, TrigPolynomial, hyperbolic_cross

__version__ = "0.1.0"
