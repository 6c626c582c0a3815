"""Matrix exponentials and their directional (Frechet) derivatives.

Two routes to the derivative of ``exp(dt*L)`` in the direction ``E`` are
provided:

* :func:`expm_frechet_trapezoid` evaluates the integral representation

      dt * int_0^1 exp(a*dt*L) E exp((1-a)*dt*L) da

  with the composite trapezoid rule on uniform nodes (endpoints included).
* :func:`expm_frechet_exact` reads the derivative off the upper-right block of
  ``exp(dt*[[L, E], [0, L]])``. It is used as the oracle for the quadrature.

The matrix norm used by :func:`quadrature_error_bound` is the spectral norm
(largest singular value), see :data:`BOUND_NORM`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "BOUND_NORM",
    "QuadratureConfig",
    "expm",
    "exp_nodes",
    "expm_frechet_trapezoid",
    "expm_frechet_exact",
    "quadrature_error_bound",
    "trapezoid_weights",
]

#: Norm passed to ``numpy.linalg.norm`` inside :func:`quadrature_error_bound`.
BOUND_NORM = 2


@dataclass(frozen=True)
class QuadratureConfig:
    """Number of trapezoid nodes on ``[0, 1]`` (both endpoints counted)."""

    n_points: int = 20

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ValueError(f"n_points must be an integer >= 2, got {self.n_points!r}")

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_points)


def _as_square(M, name="M") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _check_pair(L, E):
    L = _as_square(L, "L")
    E = _as_square(E, "E")
    if L.shape != E.shape:
        raise ValueError(f"dimension mismatch: L is {L.shape}, E is {E.shape}")
    return L, E


def _check_dt(dt):
    if not np.isfinite(dt) or dt <= 0:
        raise ValueError(f"dt must be a positive finite number, got {dt!r}")


def expm(M, s: float = 1.0) -> np.ndarray:
    """Return ``exp(s*M)``.

    Scaling and squaring with a Pade approximant (``scipy.linalg.expm``).
    """
    M = _as_square(M)
    if not np.isfinite(s):
        raise ValueError(f"s must be finite, got {s!r}")
    return scipy.linalg.expm(s * M)


def trapezoid_weights(q: QuadratureConfig) -> np.ndarray:
    """Composite trapezoid weights for the uniform nodes of ``q``."""
    n = q.n_points
    w = np.full(n, 1.0 / (n - 1))
    w[0] = w[-1] = 0.5 / (n - 1)
    return w


def exp_nodes(L, dt: float, q: QuadratureConfig) -> np.ndarray:
    """Stack of ``exp(a_k*dt*L)`` over the trapezoid nodes ``a_k = k/(n-1)``.

    Built from powers of the single step ``exp(dt*L/(n-1))`` so one
    exponential serves all nodes. Shape ``(n_points, d, d)``.
    """
    L = _as_square(L, "L")
    _check_dt(dt)
    n = q.n_points
    step = scipy.linalg.expm(dt / (n - 1) * L)
    out = np.empty((n,) + L.shape)
    out[0] = np.eye(L.shape[0])
    for k in range(1, n):
        out[k] = step @ out[k - 1]
    return out


def expm_frechet_trapezoid(L, E, dt: float, q: QuadratureConfig | None = None) -> np.ndarray:
    """Trapezoid approximation of ``d/dv exp(dt*L(v))`` for ``dL/dv = E``."""
    L, E = _check_pair(L, E)
    _check_dt(dt)
    q = q or QuadratureConfig()
    P = exp_nodes(L, dt, q)
    w = trapezoid_weights(q)
    n = q.n_points
    acc = np.zeros_like(L)
    for k in range(n):
        acc += w[k] * (P[k] @ E @ P[n - 1 - k])
    return dt * acc


def expm_frechet_exact(L, E, dt: float) -> np.ndarray:
    """Frechet derivative of ``exp(dt*L)`` in direction ``E`` via the block identity."""
    L, E = _check_pair(L, E)
    _check_dt(dt)
    d = L.shape[0]
    big = np.zeros((2 * d, 2 * d))
    big[:d, :d] = L
    big[:d, d:] = E
    big[d:, d:] = L
    return scipy.linalg.expm(dt * big)[:d, d:]


def quadrature_error_bound(L, E, dt: float, q: QuadratureConfig | None = None) -> float:
    """Error estimate ``dt^3 |L|^2 |E| |exp(dt L)| / (3 n^3)`` for the trapezoid route.

    Norms are spectral. Note the estimate decays like ``n**-3`` while the
    trapezoid error itself decays like ``n**-2``; it is a heuristic scale and
    can be exceeded (see the numerics tests).
    """
    L, E = _check_pair(L, E)
    _check_dt(dt)
    q = q or QuadratureConfig()
    nrm = lambda M: np.linalg.norm(M, BOUND_NORM)  # noqa: E731
    return float(
        dt**3 * nrm(L) ** 2 * nrm(E) * nrm(scipy.linalg.expm(dt * L)) / (3.0 * q.n_points**3)
    )
