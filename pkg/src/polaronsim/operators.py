"""Discretised boson and fermion primitives as explicit dense matrices.

Register ordering is fixed: all fermionic qubits first (site-major, spin-minor),
then the bosonic registers (site-major). Qubit 0 is the most significant factor
of every Kronecker product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import reduce

import numpy as np
import scipy.linalg as sla

__all__ = [
    "DEFAULT_MAX_DIM",
    "Quantisation",
    "RegisterLayout",
    "Operator",
    "HermiteBasis",
    "DimensionCapError",
    "as_matrix",
    "position_op",
    "centered_dft",
    "momentum_op",
    "ladder_ops",
    "hermite_state",
    "hermite_basis",
    "jw_fermion_ops",
    "displacement_1q",
    "displacement_2q",
    "qht",
    "unitarity_error",
    "expm_hermitian",
    "kron_all",
    "embed",
]

DEFAULT_MAX_DIM = 2**14
HERMITIAN_TOL = 1e-12


class DimensionCapError(ValueError):
    """Raised when a requested Hilbert space exceeds the configured cap."""


class Quantisation(str, Enum):
    FirstQ = "FirstQ"
    SecondQ = "SecondQ"


@dataclass(frozen=True)
class RegisterLayout:
    """Tensor-factor description of a fermion/boson register.

    ``fermion_modes_per_site`` is 2 for spinful lattice models and 1 when the
    "fermion" register is a set of two-level atoms.  ``num_boson_registers``
    defaults to one boson register per site.
    """

    num_sites: int
    boson_dim: int
    quantisation: Quantisation = Quantisation.SecondQ
    fermion_modes_per_site: int = 2
    num_boson_registers: int | None = None
    max_dim: int = DEFAULT_MAX_DIM

    def __post_init__(self):
        if self.num_sites < 1:
            raise ValueError("num_sites must be positive")
        if self.boson_dim < 2:
            raise ValueError("boson_dim must be at least 2")
        if Quantisation(self.quantisation) is Quantisation.FirstQ and self.boson_dim % 2:
            raise ValueError("first-quantised grids need an even boson_dim")
        if self.total_dim > self.max_dim:
            raise DimensionCapError(
                f"dimension {self.total_dim} exceeds cap {self.max_dim}"
            )

    @property
    def n_boson_registers(self) -> int:
        if self.num_boson_registers is None:
            return self.num_sites
        return self.num_boson_registers

    @property
    def num_fermion_modes(self) -> int:
        return self.num_sites * self.fermion_modes_per_site

    @property
    def fermion_dim(self) -> int:
        return 2**self.num_fermion_modes

    @property
    def bosonic_dim(self) -> int:
        return self.boson_dim**self.n_boson_registers

    @property
    def total_dim(self) -> int:
        return self.fermion_dim * self.bosonic_dim

    def boson_dims(self) -> list[int]:
        return [self.boson_dim] * self.n_boson_registers


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense square matrix tied to an optional register layout."""

    matrix: np.ndarray
    layout: RegisterLayout | None = None
    hermitian_hint: bool = False
    label: str = field(default="", compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("operator matrix must be square")
        if self.layout is not None and m.shape[0] != self.layout.total_dim:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match layout {self.layout.total_dim}"
            )
        if self.hermitian_hint:
            dev = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
            if dev > HERMITIAN_TOL:
                raise ValueError(f"operator flagged Hermitian deviates by {dev:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def H(self) -> np.ndarray:
        return self.matrix.conj().T

    def __matmul__(self, other):
        return self.matrix @ as_matrix(other)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def as_matrix(a) -> np.ndarray:
    """Return the dense array behind an Operator or array-like."""
    if isinstance(a, Operator):
        return a.matrix
    return np.asarray(a)


def kron_all(mats) -> np.ndarray:
    return reduce(np.kron, mats)


def embed(op: np.ndarray, position: int, dims: list[int]) -> np.ndarray:
    """Place ``op`` on tensor factor ``position`` of a product space."""
    left = int(np.prod(dims[:position], dtype=np.int64))
    right = int(np.prod(dims[position + 1 :], dtype=np.int64))
    return np.kron(np.kron(np.eye(left), op), np.eye(right))


def unitarity_error(u) -> float:
    """Max-norm deviation of U^dagger U from the identity."""
    u = as_matrix(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def expm_hermitian(h: np.ndarray, t: complex = 1.0) -> np.ndarray:
    """exp(-i t h) for Hermitian h via eigendecomposition."""
    h = as_matrix(h)
    w, v = np.linalg.eigh((h + h.conj().T) / 2)
    return (v * np.exp(-1j * t * w)) @ v.conj().T


def _check_grid(M: int) -> None:
    if int(M) != M or M < 2 or M % 2:
        raise ValueError(f"grid size must be a positive even integer, got {M}")


def grid_points(M: int) -> np.ndarray:
    """Grid values sqrt(2pi/M) * (-M + 2x)/2 for x = 0..M-1."""
    _check_grid(M)
    return np.sqrt(2 * np.pi / M) * (-M + 2 * np.arange(M)) / 2


def position_op(M: int) -> Operator:
    return Operator(np.diag(grid_points(M)).astype(complex), hermitian_hint=True)


def centered_dft(M: int) -> Operator:
    """[F]_{k,l} = exp(i 2pi k l / M)/sqrt(M) with signed k, l in grid order."""
    _check_grid(M)
    s = np.arange(M) - M // 2
    return Operator(np.exp(2j * np.pi * np.outer(s, s) / M) / np.sqrt(M))


def _momentum_conjugate(diag_values: np.ndarray) -> np.ndarray:
    # F diag(v) F^{-1}; this orientation gives [X, P] -> +i on low-lying states.
    M = diag_values.shape[0]
    F = centered_dft(M).matrix
    return (F * diag_values) @ F.conj().T


def momentum_op(M: int) -> Operator:
    """Discrete momentum, the centered-DFT conjugate of the position grid."""
    p = _momentum_conjugate(grid_points(M).astype(complex))
    return Operator((p + p.conj().T) / 2, hermitian_hint=True)


def ladder_ops(cutoff: int) -> tuple[Operator, Operator]:
    """Truncated annihilation and creation operators on levels 0..cutoff."""
    if int(cutoff) != cutoff or cutoff < 1:
        raise ValueError("cutoff must be a positive integer")
    b = np.diag(np.sqrt(np.arange(1, cutoff + 1)), k=1).astype(complex)
    return Operator(b), Operator(b.T.copy())


def _hermite_functions(x: np.ndarray, m_max: int) -> np.ndarray:
    out = np.empty((m_max + 1, x.size))
    out[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if m_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for m in range(1, m_max):
        out[m + 1] = np.sqrt(2.0 / (m + 1)) * x * out[m] - np.sqrt(m / (m + 1)) * out[m - 1]
    return out


def hermite_state(M: int, m: int) -> np.ndarray:
    """Sampled, rescaled Hermite function psi_m on the M-point grid."""
    _check_grid(M)
    if m < 0 or m > M // 4:
        raise ValueError(f"Hermite index {m} outside 0..{M // 4}")
    x = grid_points(M)
    return (2 * np.pi / M) ** 0.25 * _hermite_functions(x, m)[m].astype(complex)


@dataclass(frozen=True)
class HermiteBasis:
    M: int
    states: tuple

    def __post_init__(self):
        if len(self.states) - 1 > self.M // 4:
            raise ValueError("m_max must not exceed M/4")

    @property
    def m_max(self) -> int:
        return len(self.states) - 1

    def matrix(self) -> np.ndarray:
        return np.column_stack(self.states)


def hermite_basis(M: int, m_max: int) -> HermiteBasis:
    _check_grid(M)
    if m_max > M // 4:
        raise ValueError("m_max must not exceed M/4")
    x = grid_points(M)
    rows = (2 * np.pi / M) ** 0.25 * _hermite_functions(x, m_max)
    return HermiteBasis(M, tuple(r.astype(complex) for r in rows))


def jw_fermion_ops(num_modes: int, max_dim: int = DEFAULT_MAX_DIM) -> list[Operator]:
    """Jordan-Wigner annihilators c_k = Z^(k) (X+iY)/2 I^(n-k-1)."""
    if num_modes < 1:
        raise ValueError("need at least one mode")
    if 2**num_modes > max_dim:
        raise DimensionCapError(f"2^{num_modes} exceeds cap {max_dim}")
    z = np.diag([1.0, -1.0])
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    ops = []
    for k in range(num_modes):
        factors = [z] * k + [lower] + [np.eye(2)] * (num_modes - k - 1)
        ops.append(Operator(kron_all(factors).astype(complex)))
    return ops


def displacement_1q(M: int, alpha: float) -> Operator:
    """exp(-i alpha P) on the M-point grid."""
    x = grid_points(M)
    return Operator(_momentum_conjugate(np.exp(-1j * alpha * x)))


def displacement_2q(cutoff: int, alpha: complex) -> Operator:
    """exp(alpha b^dagger - conj(alpha) b) on levels 0..cutoff."""
    b, bd = ladder_ops(cutoff)
    gen = alpha * bd.matrix - np.conj(alpha) * b.matrix
    # gen is anti-Hermitian, so i*gen is Hermitian and exp(gen) = exp(-i (i gen)).
    return Operator(expm_hermitian(1j * gen))


def qht(M: int, cutoff: int) -> Operator:
    """Unitary whose first cutoff+1 columns are the Lowdin-orthonormal Hermite frame."""
    _check_grid(M)
    if cutoff + 1 > M // 4:
        raise ValueError(f"{cutoff + 1} Hermite columns exceed M/4 = {M // 4}")
    psi = hermite_basis(M, cutoff).matrix()
    w, v = np.linalg.eigh(psi.conj().T @ psi)
    frame = psi @ (v * w**-0.5) @ v.conj().T
    rest = sla.null_space(frame.conj().T)
    return Operator(np.hstack([frame, rest]))
