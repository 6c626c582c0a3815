"""Piecewise-constant propagation of the real 16-dimensional state."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .model import DIAG_INDICES, GeneratorSet, validate_density_matrix, x_to_rho
from .numerics import expm

__all__ = [
    "ControlGrid",
    "Trajectory",
    "prefix_suffix_products",
    "propagate",
    "step_matrix",
    "trace_residual",
    "validate_state",
]


@dataclass(frozen=True)
class ControlGrid:
    """Piecewise-constant controls ``(u, w1, w2)`` on ``N`` intervals of ``[0, T]``.

    The incoherent controls are ``n_i = w_i**2``. ``breakpoints`` (length
    ``N+1``, from 0 to ``T``) is optional; the default is the uniform grid.
    """

    T: float
    N: int
    u: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    breakpoints: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive, got {self.T!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        for name in ("u", "w1", "w2"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.N,):
                raise ValueError(f"{name} must have length N={self.N}, got shape {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.breakpoints is not None:
            bp = np.array(self.breakpoints, dtype=float)
            if bp.shape != (self.N + 1,):
                raise ValueError("breakpoints must have length N+1")
            if bp[0] != 0 or not np.isclose(bp[-1], self.T) or np.any(np.diff(bp) <= 0):
                raise ValueError("breakpoints must increase strictly from 0 to T")
            bp.setflags(write=False)
            object.__setattr__(self, "breakpoints", bp)

    @classmethod
    def zeros(cls, T: float, N: int) -> "ControlGrid":
        z = np.zeros(N)
        return cls(T, N, z, z, z)

    @property
    def times(self) -> np.ndarray:
        """Breakpoints ``t_0 = 0 < t_1 < ... < t_N = T``."""
        if self.breakpoints is not None:
            return self.breakpoints
        return np.arange(self.N + 1) * (self.T / self.N)

    @property
    def dts(self) -> np.ndarray:
        if self.breakpoints is not None:
            return np.diff(self.breakpoints)
        return np.full(self.N, self.T / self.N)

    @property
    def n1(self) -> np.ndarray:
        return self.w1**2

    @property
    def n2(self) -> np.ndarray:
        return self.w2**2

    def vector(self) -> np.ndarray:
        """Optimization variables ``(u^1..u^N, w1^1..w1^N, w2^1..w2^N)``."""
        return np.concatenate([self.u, self.w1, self.w2])

    def with_vector(self, v) -> "ControlGrid":
        v = np.asarray(v, dtype=float)
        N = self.N
        if v.shape != (3 * N,):
            raise ValueError(f"expected a vector of length {3 * N}, got shape {v.shape}")
        return replace(self, u=v[:N], w1=v[N : 2 * N], w2=v[2 * N :])


def step_matrix(gen: GeneratorSet, grid: ControlGrid, j: int) -> np.ndarray:
    """``L_j = A + B_u u^j + B_n1 (w1^j)^2 + B_n2 (w2^j)^2`` for ``1 <= j <= N``."""
    if not 1 <= j <= grid.N:
        raise IndexError(f"interval index {j} outside 1..{grid.N}")
    k = j - 1
    return gen.matrix(grid.u[k], grid.w1[k] ** 2, grid.w2[k] ** 2)


def trace_residual(x) -> np.ndarray:
    """``x1 + x8 + x13 + x16 - 1`` (vectorized over leading axes)."""
    x = np.asarray(x)
    return x[..., list(DIAG_INDICES)].sum(axis=-1) - 1.0


def validate_state(x0) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (16,):
        raise ValueError(f"initial state must have 16 components, got shape {x0.shape}")
    validate_density_matrix(x_to_rho(x0))
    return x0


@dataclass
class Trajectory:
    """Sampled evolution plus the per-interval data reused by the gradient.

    ``interval_states[j]`` is the state at breakpoint ``t_j`` (so index 0 is
    ``x0`` and index ``N`` is ``x(T)``). ``propagators[j-1]`` is
    ``exp(dt_j L_j)``.
    """

    grid: ControlGrid
    times: np.ndarray
    states: np.ndarray
    generators: np.ndarray
    propagators: np.ndarray
    interval_states: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        return self.interval_states[-1]


def propagate(gen: GeneratorSet, grid: ControlGrid, x0, samples_per_interval: int = 10,
              *, check: bool = True) -> Trajectory:
    """Evolve ``x0`` exactly under the piecewise-constant controls of ``grid``.

    States at the breakpoints come from the product of step propagators;
    intra-interval samples apply ``exp(s L_j)`` to the state at the left
    breakpoint and never feed back into the breakpoint chain.
    """
    if samples_per_interval < 1:
        raise ValueError("samples_per_interval must be >= 1")
    x0 = validate_state(x0) if check else np.asarray(x0, dtype=float)
    N = grid.N
    dts = grid.dts
    bps = grid.times
    Ls = np.array([step_matrix(gen, grid, j) for j in range(1, N + 1)])
    Es = np.array([expm(Ls[k], dts[k]) for k in range(N)])
    xs = np.empty((N + 1, 16))
    xs[0] = x0
    for k in range(N):
        xs[k + 1] = Es[k] @ xs[k]

    times, states = [], []
    for k in range(N):
        times.append(bps[k])
        states.append(xs[k])
        for m in range(1, samples_per_interval):
            s = dts[k] * m / samples_per_interval
            times.append(bps[k] + s)
            states.append(expm(Ls[k], s) @ xs[k])
    times.append(bps[N])
    states.append(xs[N])
    return Trajectory(grid, np.array(times), np.array(states), Ls, Es, xs)


def prefix_suffix_products(traj: Trajectory):
    """Left state products and right propagator products per interval.

    Returns ``(left, right)`` where ``left[j-1] = exp(dt_{j-1}L_{j-1})...exp(dt_1 L_1) x0``
    (a vector) and ``right[j-1] = exp(dt_N L_N)...exp(dt_{j+1} L_{j+1})`` (a
    matrix), for ``j = 1..N``.
    """
    Es = traj.propagators
    N = len(Es)
    left = traj.interval_states[:-1].copy()
    right = np.empty_like(Es)
    acc = np.eye(Es.shape[1])
    for k in range(N - 1, -1, -1):
        right[k] = acc
        acc = acc @ Es[k]
    return left, right
