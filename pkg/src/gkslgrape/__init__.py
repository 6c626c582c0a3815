"""GRAPE optimization of coherent and incoherent controls for two qubits."""
from .model import GeneratorSet, Interaction, ModelParams, build_generators, rho_to_x, x_to_rho
from .numerics import QuadratureConfig
from .propagate import ControlGrid, Trajectory, propagate
from .grape import (
    ObjectiveSpec,
    OptimizationTrace,
    OptimizerConfig,
    gradient_descent,
    grape_gradient,
    initial_guess_reference,
    objective_assemble,
)

__version__ = "0.1.0"
