"""Two-qubit GKSL model and its real 16-dimensional bilinear form.

The density matrix is parametrized by 16 reals, reading the upper triangle
row by row; diagonal entries contribute one real, off-diagonal entries a
(real, imaginary) pair::

    rho = [[x1,        x2+i x3,   x4+i x5,   x6+i x7 ],
           [.,         x8,        x9+i x10,  x11+i x12],
           [.,         .,         x13,       x14+i x15],
           [.,         .,         .,         x16      ]]

In these coordinates the master equation reads
``dx/dt = (A + B_u u + B_n1 n1 + B_n2 n2) x``; :func:`build_generators`
obtains the four matrices by pushing each real basis matrix through the
complex right-hand side.

Raising/lowering operators follow the convention
``sigma_plus = [[0, 0], [1, 0]]`` and ``sigma_minus = [[0, 1], [0, 0]]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "DIAG_INDICES",
    "X_TILDE_INDICES",
    "GeneratorSet",
    "Interaction",
    "InvalidStateError",
    "ModelParams",
    "PauliOps",
    "build_generators",
    "dissipator_apply",
    "gksl_rhs",
    "hamiltonian",
    "interaction_operator",
    "pauli_ops",
    "rho_to_x",
    "validate_density_matrix",
    "x_to_rho",
]

DIM = 4
NX = 16

# zero-based positions of x1, x8, x13, x16 (the diagonal of rho)
DIAG_INDICES = (0, 7, 12, 15)
# zero-based positions of x2, x3, x4, x5, x11, x12, x14, x15
X_TILDE_INDICES = (1, 2, 3, 4, 10, 11, 13, 14)

# (row, col) of rho for every slot of x, in order
_SLOTS: list[tuple[int, int, str]] = []
for _i in range(DIM):
    for _j in range(_i, DIM):
        if _i == _j:
            _SLOTS.append((_i, _j, "re"))
        else:
            _SLOTS.append((_i, _j, "re"))
            _SLOTS.append((_i, _j, "im"))
del _i, _j


class InvalidStateError(ValueError):
    """Raised when a matrix or vector does not describe a valid quantum state."""


class Interaction(str, enum.Enum):
    V1 = "V1"
    V2 = "V2"


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-qubit model (hbar = 1).

    ``dissipator_coupling`` multiplies the dissipator in the master
    equation. ``None`` means "use ``eps``", which is the master equation as
    usually written, ``-i[H_S + eps H_eff + V u, rho] + eps L_n(rho)``.
    The built-in presets set it to 1.0 (see ``gkslgrape.config``).
    """

    eps: float = 0.1
    omega1: float = 1.0
    omega2: float = 0.5
    lambda1: float = 0.05
    lambda2: float = 0.05
    Omega1: float = 0.05
    Omega2: float = 0.05
    dissipator_coupling: float | None = None

    def __post_init__(self):
        for name in ("eps", "omega1", "omega2", "lambda1", "lambda2", "Omega1", "Omega2"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be strictly positive, got {v!r}")
        if self.omega1 == self.omega2:
            raise ValueError("omega1 and omega2 must differ")
        c = self.dissipator_coupling
        if c is not None and (not np.isfinite(c) or c < 0):
            raise ValueError(f"dissipator_coupling must be non-negative, got {c!r}")

    @property
    def kappa(self) -> float:
        """Effective prefactor of the dissipator."""
        return self.eps if self.dissipator_coupling is None else self.dissipator_coupling


class PauliOps(NamedTuple):
    I2: np.ndarray
    sx: np.ndarray
    sz: np.ndarray
    sp: np.ndarray
    sm: np.ndarray
    sp1: np.ndarray
    sm1: np.ndarray
    sp2: np.ndarray
    sm2: np.ndarray


def pauli_ops() -> PauliOps:
    I2 = np.eye(2, dtype=complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    sp = np.array([[0, 0], [1, 0]], dtype=complex)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    return PauliOps(
        I2, sx, sz, sp, sm,
        np.kron(sp, I2), np.kron(sm, I2),
        np.kron(I2, sp), np.kron(I2, sm),
    )


_OPS = pauli_ops()
_Z1 = np.kron(_OPS.sz, _OPS.I2)
_Z2 = np.kron(_OPS.I2, _OPS.sz)


def interaction_operator(interaction: Interaction | str) -> np.ndarray:
    interaction = Interaction(interaction)
    sx, I2 = _OPS.sx, _OPS.I2
    if interaction is Interaction.V1:
        return np.kron(sx, I2) + np.kron(I2, sx)
    return np.kron(sx, sx)


def _check_n(n1, n2):
    if n1 < 0 or n2 < 0:
        raise ValueError(f"incoherent controls must be non-negative, got n1={n1}, n2={n2}")


def hamiltonian(params: ModelParams, interaction, u: float, n1: float, n2: float) -> np.ndarray:
    """``H_S + eps*H_eff(n) + u*V``."""
    _check_n(n1, n2)
    p = params
    return (
        (p.omega1 / 2 + p.eps * p.lambda1 * n1) * _Z1
        + (p.omega2 / 2 + p.eps * p.lambda2 * n2) * _Z2
        + u * interaction_operator(interaction)
    )


def _lindblad_term(jump, jump_dag, rho):
    # 2 J rho J^+ - J^+ J rho - rho J^+ J
    jdj = jump_dag @ jump
    return 2 * jump @ rho @ jump_dag - jdj @ rho - rho @ jdj


def dissipator_apply(params: ModelParams, n1: float, n2: float, rho) -> np.ndarray:
    """Sum of both single-qubit dissipators, without the coupling prefactor."""
    _check_n(n1, n2)
    rho = np.asarray(rho, dtype=complex)
    o = _OPS
    out = params.Omega1 * (n1 + 1) * _lindblad_term(o.sm1, o.sp1, rho)
    out += params.Omega1 * n1 * _lindblad_term(o.sp1, o.sm1, rho)
    out += params.Omega2 * (n2 + 1) * _lindblad_term(o.sm2, o.sp2, rho)
    out += params.Omega2 * n2 * _lindblad_term(o.sp2, o.sm2, rho)
    return out


def gksl_rhs(params: ModelParams, interaction, u: float, n1: float, n2: float, rho) -> np.ndarray:
    """Complex right-hand side ``d rho / dt`` of the master equation."""
    rho = np.asarray(rho, dtype=complex)
    H = hamiltonian(params, interaction, u, n1, n2)
    return -1j * (H @ rho - rho @ H) + params.kappa * dissipator_apply(params, n1, n2, rho)


def rho_to_x(rho, atol: float = 1e-12) -> np.ndarray:
    """Real coordinates of a Hermitian 4x4 matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (DIM, DIM):
        raise ValueError(f"expected a 4x4 matrix, got shape {rho.shape}")
    if not np.allclose(rho, rho.conj().T, rtol=0, atol=atol):
        raise InvalidStateError("matrix is not Hermitian")
    x = np.empty(NX)
    for k, (i, j, part) in enumerate(_SLOTS):
        x[k] = rho[i, j].real if part == "re" else rho[i, j].imag
    return x


def x_to_rho(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (NX,):
        raise ValueError(f"expected 16 components, got shape {x.shape}")
    rho = np.zeros((DIM, DIM), dtype=complex)
    for k, (i, j, part) in enumerate(_SLOTS):
        if part == "re":
            rho[i, j] += x[k]
        else:
            rho[i, j] += 1j * x[k]
    upper = np.triu(rho, 1)
    return np.diag(np.diag(rho)) + upper + upper.conj().T


def validate_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-12, psd_tol=1e-10) -> np.ndarray:
    """Return ``rho`` as a complex array or raise :class:`InvalidStateError`."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (DIM, DIM):
        raise InvalidStateError(f"expected a 4x4 matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise InvalidStateError(f"density matrix has trace {tr!r}, expected 1")
    lmin = np.linalg.eigvalsh(rho).min()
    if lmin < -psd_tol:
        raise InvalidStateError(f"density matrix is not positive semi-definite (min eigenvalue {lmin:.3e})")
    return rho


@dataclass(frozen=True)
class GeneratorSet:
    A: np.ndarray
    B_u: np.ndarray
    B_n1: np.ndarray
    B_n2: np.ndarray
    interaction: Interaction
    params: ModelParams = field(default_factory=ModelParams)

    def __post_init__(self):
        for name in ("A", "B_u", "B_n1", "B_n2"):
            getattr(self, name).setflags(write=False)

    def matrix(self, u: float, n1: float, n2: float) -> np.ndarray:
        """``A + B_u u + B_n1 n1 + B_n2 n2``."""
        return self.A + self.B_u * u + self.B_n1 * n1 + self.B_n2 * n2

    def dump(self) -> str:
        """Row-major text dump at full double precision."""
        lines = [f"# interaction {self.interaction.value}", f"# params {self.params}"]
        for name in ("A", "B_u", "B_n1", "B_n2"):
            lines.append(f"[{name}]")
            for row in getattr(self, name):
                lines.append(" ".join(f"{v:.17g}" for v in row))
        return "\n".join(lines) + "\n"


def _real_image(linear_map) -> np.ndarray:
    cols = [rho_to_x(linear_map(x_to_rho(e))) for e in np.eye(NX)]
    return np.array(cols).T


def _commutator_map(H):
    return lambda rho: -1j * (H @ rho - rho @ H)


def build_generators(params: ModelParams, interaction: Interaction | str) -> GeneratorSet:
    """Assemble ``A, B_u, B_n1, B_n2`` from the complex right-hand side.

    Each matrix is the real image of the part of the right-hand side that is
    constant, or proportional to ``u``, ``n1`` or ``n2``. The ``+1`` in the
    ``(n+1)`` decay terms therefore lands in ``A``.
    """
    interaction = Interaction(interaction)
    p, o = params, _OPS
    A = _real_image(lambda rho: gksl_rhs(p, interaction, 0.0, 0.0, 0.0, rho))
    B_u = _real_image(_commutator_map(interaction_operator(interaction)))

    def n_part(lam, Om, Z, sp, sm):
        comm = _commutator_map(p.eps * lam * Z)
        return lambda rho: comm(rho) + p.kappa * Om * (
            _lindblad_term(sm, sp, rho) + _lindblad_term(sp, sm, rho)
        )

    B_n1 = _real_image(n_part(p.lambda1, p.Omega1, _Z1, o.sp1, o.sm1))
    B_n2 = _real_image(n_part(p.lambda2, p.Omega2, _Z2, o.sp2, o.sm2))
    return GeneratorSet(A, B_u, B_n1, B_n2, interaction, params)
