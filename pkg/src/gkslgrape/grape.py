"""GRAPE for coherent and incoherent controls.

The incoherent controls are optimized through ``n = w**2``, so the descent
runs on the unconstrained vector ``v = (u, w1, w2)`` and ``n`` can never go
negative. Because ``dL/dw = 2 w B_n``, the gradient along ``w`` vanishes
identically wherever ``w = 0``: the plane ``w = 0`` is always critical for
the reparametrized problem, so starting guesses should keep ``w`` away
from zero.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import GeneratorSet
from .numerics import (
    QuadratureConfig,
    exp_nodes,
    expm_frechet_exact,
    trapezoid_weights,
)
from .propagate import ControlGrid, Trajectory, propagate

__all__ = [
    "BETA",
    "DivergedError",
    "ObjectiveSpec",
    "OptimizationTrace",
    "OptimizerConfig",
    "default_workers",
    "gradient_descent",
    "grape_gradient",
    "initial_guess_reference",
    "objective_assemble",
    "objective_gradient_terminal",
    "value_and_gradient",
]

log = logging.getLogger(__name__)

BETA = np.array([1, 2, 2, 2, 2, 2, 2, 1, 2, 2, 2, 2, 1, 2, 2, 1], dtype=float)
BETA.setflags(write=False)

WORKERS_ENV = "GKSLGRAPE_MAX_WORKERS"


def default_workers() -> int:
    """Worker cap from ``$GKSLGRAPE_MAX_WORKERS`` (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


class DivergedError(RuntimeError):
    """Objective or gradient became non-finite during the descent."""

    def __init__(self, msg, iteration, grid, J, grad):
        super().__init__(msg)
        self.iteration = iteration
        self.grid = grid
        self.J = J
        self.grad = grad


@dataclass(frozen=True)
class ObjectiveSpec:
    """Squared Hilbert-Schmidt distance to ``x_target`` in the real coordinates.

    ``J(x) = <x, Z x> + <b, x> + d`` with ``Z = diag(beta)``,
    ``b = -2 beta*x_target`` and ``d = <beta*x_target, x_target>``.
    """

    x_target: np.ndarray
    beta: np.ndarray = field(default_factory=lambda: BETA.copy())

    @property
    def Z(self) -> np.ndarray:
        return np.diag(self.beta)

    @property
    def b(self) -> np.ndarray:
        return -2.0 * self.beta * self.x_target

    @property
    def d(self) -> float:
        return float((self.beta * self.x_target) @ self.x_target)

    def value(self, x) -> float:
        # same quadratic as <x,Zx> + <b,x> + d, without the cancellation
        r = np.asarray(x, dtype=float) - self.x_target
        return float(r @ (self.beta * r))

    def value_expanded(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ (self.beta * x) + self.b @ x + self.d)


def objective_assemble(x_target) -> ObjectiveSpec:
    x_target = np.array(x_target, dtype=float)
    if x_target.shape != (16,):
        raise ValueError(f"x_target must have 16 components, got shape {x_target.shape}")
    x_target.setflags(write=False)
    return ObjectiveSpec(x_target)


def objective_gradient_terminal(spec: ObjectiveSpec, xT) -> np.ndarray:
    """``2 Z x(T) + b``."""
    xT = np.asarray(xT, dtype=float)
    return 2.0 * spec.beta * xT + spec.b


def _interval_grad_trapezoid(L, dt, lam, x_left, dirs, q):
    P = exp_nodes(L, dt, q)
    w = trapezoid_weights(q)
    left = np.einsum("i,kij->kj", lam, P)  # lam^T exp(a_k dt L)
    right = np.einsum("kij,j->ki", P[::-1], x_left)  # exp((1-a_k) dt L) x
    return [dt * np.einsum("k,ki,ij,kj->", w, left, E, right) for E in dirs]


def _interval_grad_exact(L, dt, lam, x_left, dirs, q):
    return [lam @ expm_frechet_exact(L, E, dt) @ x_left for E in dirs]


_ROUTES = {"trapezoid": _interval_grad_trapezoid, "exact": _interval_grad_exact}


def value_and_gradient(gen: GeneratorSet, grid: ControlGrid, x0, spec: ObjectiveSpec,
                       q: QuadratureConfig | None = None, *, method: str = "trapezoid",
                       traj: Trajectory | None = None, workers: int = 1):
    """Return ``(J, grad, traj)`` for the controls in ``grid``.

    ``grad`` is ordered ``(dJ/du^1..dJ/du^N, dJ/dw1^1.., dJ/dw2^1..)``.
    ``method`` selects the trapezoid quadrature or the exact block-exponential
    derivative for ``d exp(dt_j L_j)``.
    """
    if method not in _ROUTES:
        raise ValueError(f"unknown gradient method {method!r}")
    q = q or QuadratureConfig()
    if traj is None:
        traj = propagate(gen, grid, x0, samples_per_interval=1, check=False)
    if traj.interval_states.shape[1] != gen.A.shape[0]:
        raise ValueError("state and generator dimensions differ")
    N = grid.N
    xT = traj.final_state
    J = spec.value(xT)

    # adjoints lam_j = (exp(dt_N L_N)...exp(dt_{j+1} L_{j+1}))^T (2 Z x(T) + b)
    lams = np.empty((N, xT.size))
    lam = objective_gradient_terminal(spec, xT)
    for k in range(N - 1, -1, -1):
        lams[k] = lam
        lam = traj.propagators[k].T @ lam

    route = _ROUTES[method]
    dirs = (gen.B_u, gen.B_n1, gen.B_n2)
    dts = grid.dts

    def one(k):
        return route(traj.generators[k], dts[k], lams[k], traj.interval_states[k], dirs, q)

    if workers > 1 and N > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(one, range(N)))
    else:
        parts = [one(k) for k in range(N)]

    grad = np.empty(3 * N)
    for k, (gu, g1, g2) in enumerate(parts):
        grad[k] = gu
        grad[N + k] = 2.0 * grid.w1[k] * g1
        grad[2 * N + k] = 2.0 * grid.w2[k] * g2
    return J, grad, traj


def grape_gradient(gen: GeneratorSet, grid: ControlGrid, x0, spec: ObjectiveSpec,
                   q: QuadratureConfig | None = None, *, method: str = "trapezoid",
                   workers: int = 1) -> np.ndarray:
    """Gradient of the terminal distance with respect to ``(u, w1, w2)``."""
    return value_and_gradient(gen, grid, x0, spec, q, method=method, workers=workers)[1]


@dataclass(frozen=True)
class OptimizerConfig:
    step: float = 1.0
    max_iters: int = 20000
    tol: float = 1e-6
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    log_every: int = 500
    method: str = "trapezoid"
    backtracking: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError("max_iters must be a non-negative integer")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.method not in _ROUTES:
            raise ValueError(f"unknown gradient method {self.method!r}")


@dataclass
class OptimizationTrace:
    J: np.ndarray
    grid: ControlGrid
    iterations: int
    reason: str
    final_state: np.ndarray

    @property
    def converged(self) -> bool:
        return self.reason == "converged"

    @property
    def final_J(self) -> float:
        return float(self.J[-1])


def gradient_descent(gen: GeneratorSet, grid0: ControlGrid, x0, spec: ObjectiveSpec,
                     cfg: OptimizerConfig | None = None,
                     sink: Callable[[int, float], None] | None = None) -> OptimizationTrace:
    """Constant-step gradient descent ``v <- v - h grad J(v)``.

    Stops as soon as ``J < cfg.tol`` (reason ``"converged"``) or after
    ``cfg.max_iters`` updates (reason ``"max_iters"``). ``sink(k, J)`` is
    called for every evaluated iterate, including ``k = 0``.
    """
    cfg = cfg or OptimizerConfig()
    x0 = np.asarray(x0, dtype=float)
    grid = grid0
    history = []

    def evaluate(g):
        with np.errstate(over="ignore", invalid="ignore"):
            try:
                return value_and_gradient(gen, g, x0, spec, cfg.quadrature,
                                          method=cfg.method, workers=cfg.workers)
            except ValueError as exc:  # non-finite generator or propagator
                raise DivergedError(str(exc), len(history), g, math.nan, None) from exc

    J, grad, traj = evaluate(grid)
    k = 0
    while True:
        if not (math.isfinite(J) and np.all(np.isfinite(grad))):
            raise DivergedError(f"non-finite objective or gradient at iteration {k}", k, grid, J, grad)
        history.append(J)
        if sink is not None:
            sink(k, J)
        if k % cfg.log_every == 0:
            log.info("iter %d  J = %.6e", k, J)
        if J < cfg.tol:
            reason = "converged"
            break
        if k >= cfg.max_iters:
            reason = "max_iters"
            break
        v = grid.vector()
        h = cfg.step
        if not np.all(np.isfinite(v - h * grad)):
            raise DivergedError(f"non-finite controls after iteration {k}", k, grid, J, grad)
        new_grid = grid.with_vector(v - h * grad)
        new_J, new_grad, new_traj = evaluate(new_grid)
        if cfg.backtracking:
            gg = float(grad @ grad)
            while not (math.isfinite(new_J) and new_J <= J - 1e-4 * h * gg) and h > 1e-12:
                h *= 0.5
                new_grid = grid.with_vector(v - h * grad)
                new_J, new_grad, new_traj = evaluate(new_grid)
        grid, J, grad, traj = new_grid, new_J, new_grad, new_traj
        k += 1

    log.info("stopped after %d iterations (%s), J = %.6e", k, reason, J)
    return OptimizationTrace(np.array(history), grid, k, reason, traj.final_state.copy())


def initial_guess_reference(T: float, N: int, breakpoints=None) -> ControlGrid:
    """``u^j = cos(0.3 t_j)``, ``w1^j = w2^j = exp(-5 (t_j/T - 1/2)^2)``.

    ``t_j`` is the right endpoint of interval ``j``.
    """
    geom = ControlGrid.zeros(T, N) if breakpoints is None else ControlGrid(
        T, N, np.zeros(N), np.zeros(N), np.zeros(N), breakpoints)
    t = geom.times[1:]
    u = np.cos(0.3 * t)
    w = np.exp(-5.0 * (t / T - 0.5) ** 2)
    return ControlGrid(T, N, u, w, w.copy(), geom.breakpoints)
