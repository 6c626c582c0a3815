"""Diagnostics along a trajectory: distance, entropy, purity, Bloch vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grape import BETA, ObjectiveSpec
from .model import X_TILDE_INDICES, GeneratorSet, Interaction, InvalidStateError, x_to_rho
from .propagate import Trajectory

__all__ = [
    "DecouplingReport",
    "DiagnosticsRow",
    "bloch_vectors",
    "bloch_vectors_partial_trace",
    "decoupling_check",
    "diagnostics",
    "entropy",
    "hs_distance_sq",
    "purity",
    "reduced_states",
]

# eigenvalues in [-CLAMP_TOL, 0) are treated as zero
CLAMP_TOL = 1e-8

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def hs_distance_sq(x, spec: ObjectiveSpec) -> float:
    """``||rho(x) - rho_target||^2`` (Frobenius); the optimizer's objective."""
    return spec.value(x)


def entropy(rho) -> float:
    """von Neumann entropy ``-sum lambda ln lambda`` over nonzero eigenvalues."""
    lam = np.linalg.eigvalsh(np.asarray(rho, dtype=complex))
    if lam.min() < -CLAMP_TOL:
        raise InvalidStateError(f"eigenvalue {lam.min():.3e} below -{CLAMP_TOL}")
    lam = np.clip(lam, 0.0, 1.0)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)))


def purity(state) -> float:
    """``Tr rho^2``. Accepts either a 4x4 matrix or the 16-vector ``x``."""
    a = np.asarray(state)
    if a.shape == (16,):
        a = a.astype(float)
        return float((BETA * a) @ a)
    rho = a.astype(complex)
    return float(np.sum(np.abs(rho) ** 2))


def reduced_states(rho):
    """Partial traces ``(Tr_2 rho, Tr_1 rho)``."""
    r = np.asarray(rho, dtype=complex).reshape(2, 2, 2, 2)
    return np.einsum("ikjk->ij", r), np.einsum("kikj->ij", r)


def bloch_vectors(x):
    """Bloch vectors of both qubits, linear in ``x``."""
    x = np.asarray(x, dtype=float)
    x1, x2, x3, x4, x5 = x[0], x[1], x[2], x[3], x[4]
    x8, x11, x12, x13, x14, x15, x16 = x[7], x[10], x[11], x[12], x[13], x[14], x[15]
    r1 = np.array([2 * (x4 + x11), -2 * (x5 + x12), x1 + x8 - x13 - x16])
    r2 = np.array([2 * (x2 + x14), -2 * (x3 + x15), x1 + x13 - x8 - x16])
    return r1 + 0.0, r2 + 0.0  # no signed zeros in output


def bloch_vectors_partial_trace(rho):
    """Bloch vectors via ``Tr(rho_i sigma_j)``; slower reference route."""
    out = []
    for red in reduced_states(rho):
        out.append(np.array([np.trace(red @ s).real for s in (_SX, _SY, _SZ)]))
    return tuple(out)


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    F_dist: float
    S: float
    P: float
    r1: np.ndarray
    r2: np.ndarray


def diagnostics(traj: Trajectory, spec: ObjectiveSpec) -> list[DiagnosticsRow]:
    rows = []
    for t, x in zip(traj.times, traj.states):
        r1, r2 = bloch_vectors(x)
        rows.append(DiagnosticsRow(float(t), hs_distance_sq(x, spec), entropy(x_to_rho(x)),
                                   purity(x), r1, r2))
    return rows


@dataclass(frozen=True)
class DecouplingReport:
    max_x_tilde: float
    max_transverse_bloch: float
    asserted: bool
    passed: bool
    tol: float = 1e-10


def decoupling_check(gen: GeneratorSet, traj: Trajectory, tol: float = 1e-10) -> DecouplingReport:
    """Size of the off-diagonal block ``x~`` along a trajectory from a diagonal state.

    The zero-``x~`` claim is asserted only for ``V2``; for ``V1`` the numbers
    are reported with ``asserted=False``.
    """
    x0 = traj.states[0]
    idx = list(X_TILDE_INDICES)
    if np.any(x0[idx] != 0):
        raise ValueError("initial state has nonzero x~ components")
    xt = np.abs(traj.states[:, idx]).max()
    transverse = 0.0
    for x in traj.states:
        r1, r2 = bloch_vectors(x)
        transverse = max(transverse, abs(r1[0]), abs(r1[1]), abs(r2[0]), abs(r2[1]))
    asserted = gen.interaction is Interaction.V2
    passed = bool(xt < tol and transverse < tol) if asserted else True
    return DecouplingReport(float(xt), float(transverse), asserted, passed, tol)
