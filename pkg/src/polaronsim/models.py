"""Fermion-boson model Hamiltonians as bundles of dense operators.

Each builder returns a dict of Hermitian :class:`Operator` blocks on a common
:class:`RegisterLayout`.  Parameter documents are pydantic models whose JSON
field names use the physics symbols (``ω₀``, ``μ``, ``Λ`` ...); the ASCII
attribute names are accepted on input as well.
"""

from __future__ import annotations

from enum import Enum
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .operators import (
    DEFAULT_MAX_DIM,
    Operator,
    Quantisation,
    RegisterLayout,
    embed,
    jw_fermion_ops,
    ladder_ops,
    momentum_op,
    position_op,
)

__all__ = [
    "Boundary",
    "HubbardHolsteinParams",
    "DickeParams",
    "FrohlichParams",
    "SSHParams",
    "FermionLattice",
    "hh_layout",
    "hh_hamiltonian",
    "hh_total",
    "dicke_layout",
    "dicke_hamiltonian",
    "frohlich_layout",
    "frohlich_couplings",
    "frohlich_hamiltonian",
    "ssh_layout",
    "ssh_hamiltonian_single_mode",
    "ring_hopping_matrix",
    "kappa_kernel",
    "bonds",
    "boson_site_ops",
]


class Boundary(str, Enum):
    Open = "Open"
    Periodic = "Periodic"


class _Params(BaseModel):
    model_config = ConfigDict(
        populate_by_name=True, frozen=True, extra="forbid", arbitrary_types_allowed=True
    )

    def to_json_dict(self) -> dict:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


class HubbardHolsteinParams(_Params):
    """Hubbard-Holstein chain; ``cutoff`` is the grid size M (FirstQ) or Λ (SecondQ)."""

    N: int = Field(ge=1)
    g: float = 0.0
    omega0: float = Field(1.0, alias="ω₀", gt=0)
    U: float = 0.0
    mu: float = Field(0.0, alias="μ")
    cutoff: int = Field(ge=1)
    quantisation: Quantisation = Quantisation.SecondQ
    boundary: Boundary = Boundary.Open
    max_dim: int = Field(DEFAULT_MAX_DIM, ge=1)

    @model_validator(mode="after")
    def _check_cutoff(self):
        if self.quantisation is Quantisation.FirstQ and (self.cutoff < 2 or self.cutoff % 2):
            raise ValueError("FirstQ cutoff M must be an even integer >= 2")
        return self

    @property
    def boson_dim(self) -> int:
        return self.cutoff if self.quantisation is Quantisation.FirstQ else self.cutoff + 1


class DickeParams(_Params):
    """N two-level atoms coupled to one boson mode truncated at Λ quanta."""

    N: int = Field(ge=1)
    omega0: float = Field(1.0, alias="ω₀", gt=0)
    Omega: float = Field(1.0, alias="Ω")
    g: float = 0.0
    Lambda: int = Field(alias="Λ", ge=1)
    max_dim: int = Field(DEFAULT_MAX_DIM, ge=1)


class FrohlichParams(_Params):
    """Hubbard-Fröhlich chain with ``n_modes`` boson modes per site.

    The coupling is taken, in order of precedence, from ``f_callable(i, j, γ)``,
    the table ``f`` (indexed ``f[i][j][γ]``) or the built-in kernel
    κ/(|i-j|³+1)^{3/2}.
    """

    N: int = Field(ge=1)
    n_modes: int = Field(1, ge=1)
    omega: Optional[list[list[float]]] = Field(None, alias="ω")
    omega0: float = Field(1.0, alias="ω₀", gt=0)
    f: Optional[list[list[list[float]]]] = None
    kappa: float = Field(1.0, alias="κ")
    U: float = 0.0
    mu: float = Field(0.0, alias="μ")
    cutoff: int = Field(ge=1)
    quantisation: Quantisation = Quantisation.SecondQ
    boundary: Boundary = Boundary.Open
    max_dim: int = Field(DEFAULT_MAX_DIM, ge=1)
    f_callable: Optional[Callable] = Field(None, exclude=True)

    @model_validator(mode="after")
    def _check(self):
        if self.omega is not None:
            arr = np.asarray(self.omega, dtype=float)
            if arr.shape != (self.N, self.n_modes) or np.any(arr <= 0):
                raise ValueError("ω must be an N x n_modes table of positive frequencies")
        if self.f is not None:
            arr = np.asarray(self.f, dtype=float)
            if arr.shape != (self.N, self.N, self.n_modes) or not np.all(np.isfinite(arr)):
                raise ValueError("f must be a finite N x N x n_modes table")
        if self.quantisation is Quantisation.FirstQ and (self.cutoff < 2 or self.cutoff % 2):
            raise ValueError("FirstQ cutoff M must be an even integer >= 2")
        return self

    @property
    def boson_dim(self) -> int:
        return self.cutoff if self.quantisation is Quantisation.FirstQ else self.cutoff + 1

    def omega_table(self) -> np.ndarray:
        if self.omega is None:
            return np.full((self.N, self.n_modes), float(self.omega0))
        return np.asarray(self.omega, dtype=float)


class SSHParams(_Params):
    """Periodic SSH ring with one shared boson mode truncated at Λ quanta."""

    N: int = Field(ge=1)
    t_hop: float = 1.0
    g: float = 0.0
    omega0: float = Field(1.0, alias="ω₀", gt=0)
    Lambda: int = Field(alias="Λ", ge=1)
    boundary: Boundary = Boundary.Periodic
    max_dim: int = Field(DEFAULT_MAX_DIM, ge=1)

    @field_validator("boundary")
    @classmethod
    def _periodic_only(cls, v):
        if Boundary(v) is not Boundary.Periodic:
            raise ValueError("the momentum-space transform needs a periodic ring")
        return v


def kappa_kernel(distance: int, kappa: float) -> float:
    return kappa / (abs(distance) ** 3 + 1) ** 1.5


def bonds(N: int, boundary: Boundary) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds; a two-site ring has a single bond."""
    out = [(i, i + 1) for i in range(N - 1)]
    if Boundary(boundary) is Boundary.Periodic and N > 2:
        out.append((N - 1, 0))
    return out


class FermionLattice:
    """Jordan-Wigner operators for ``num_sites`` sites with ``modes_per_site`` modes."""

    def __init__(self, num_sites: int, modes_per_site: int = 2, max_dim: int = DEFAULT_MAX_DIM):
        self.num_sites = num_sites
        self.modes_per_site = modes_per_site
        self.num_modes = num_sites * modes_per_site
        self.dim = 2**self.num_modes
        self.c = [op.matrix for op in jw_fermion_ops(self.num_modes, max_dim)]

    def mode(self, site: int, spin: int = 0) -> int:
        return site * self.modes_per_site + spin

    @cached_property
    def occupations(self) -> np.ndarray:
        """occupations[f, k] = occupation of mode k in basis state f."""
        f = np.arange(self.dim)[:, None]
        k = np.arange(self.num_modes)[None, :]
        return (f >> (self.num_modes - 1 - k)) & 1

    def site_occupations(self) -> np.ndarray:
        occ = self.occupations.reshape(self.dim, self.num_sites, self.modes_per_site)
        return occ.sum(axis=2)

    def number(self, site: int, spin: int | None = None) -> np.ndarray:
        if spin is None:
            vals = self.site_occupations()[:, site]
        else:
            vals = self.occupations[:, self.mode(site, spin)]
        return np.diag(vals.astype(complex))

    def hop(self, p: int, q: int) -> np.ndarray:
        """c_p^dagger c_q + c_q^dagger c_p."""
        a = self.c[p].conj().T @ self.c[q]
        return a + a.conj().T

    def hubbard_hopping(self, bond_list) -> np.ndarray:
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for i, j in bond_list:
            for s in range(self.modes_per_site):
                h -= self.hop(self.mode(i, s), self.mode(j, s))
        return h

    def hubbard_diagonal(self, U: float, mu: float) -> np.ndarray:
        occ = self.occupations.reshape(self.dim, self.num_sites, self.modes_per_site)
        up, dn = occ[:, :, 0], occ[:, :, 1]
        vals = (U * (up - 0.5) * (dn - 0.5) - mu * (up + dn)).sum(axis=1)
        return np.diag(vals.astype(complex))


def boson_site_ops(quantisation: Quantisation, cutoff: int, omega: float = 1.0):
    """Single-register (h_b, coupling operator) pair.

    SecondQ: (ω b†b, b + b†).  FirstQ: ((ω/2)(X² + P²), √2 X).
    """
    if Quantisation(quantisation) is Quantisation.SecondQ:
        b, bd = ladder_ops(cutoff)
        return omega * (bd.matrix @ b.matrix), b.matrix + bd.matrix
    x = position_op(cutoff).matrix
    p = momentum_op(cutoff).matrix
    hb = omega / 2 * (x @ x + p @ p)
    return (hb + hb.conj().T) / 2, np.sqrt(2.0) * x


def _full(fermion_op: np.ndarray, boson_op: np.ndarray | None, layout: RegisterLayout):
    if boson_op is None:
        boson_op = np.eye(layout.bosonic_dim)
    return np.kron(fermion_op, boson_op)


def _boson(op: np.ndarray, register: int, layout: RegisterLayout) -> np.ndarray:
    return embed(op, register, layout.boson_dims())


def hh_layout(p: HubbardHolsteinParams) -> RegisterLayout:
    return RegisterLayout(p.N, p.boson_dim, p.quantisation, max_dim=p.max_dim)


def hh_hamiltonian(p: HubbardHolsteinParams) -> dict[str, Operator]:
    """Blocks H_f_hop, H_f_diag, H_b, H_fb of the Hubbard-Holstein chain."""
    layout = hh_layout(p)
    lat = FermionLattice(p.N, 2, p.max_dim)
    hb_site, coup = boson_site_ops(p.quantisation, p.cutoff, p.omega0)
    h_b = sum(_boson(hb_site, i, layout) for i in range(p.N))
    h_fb = np.zeros((layout.total_dim,) * 2, dtype=complex)
    if p.g != 0:
        for i in range(p.N):
            h_fb += p.g * np.kron(lat.number(i) - np.eye(lat.dim), _boson(coup, i, layout))
    out = {
        "H_f_hop": _full(lat.hubbard_hopping(bonds(p.N, p.boundary)), None, layout),
        "H_f_diag": _full(lat.hubbard_diagonal(p.U, p.mu), None, layout),
        "H_b": np.kron(np.eye(lat.dim), h_b),
        "H_fb": h_fb,
    }
    return {k: Operator(v, layout, hermitian_hint=True, label=k) for k, v in out.items()}


def hh_total(p: HubbardHolsteinParams) -> Operator:
    blocks = hh_hamiltonian(p)
    layout = blocks["H_b"].layout
    return Operator(sum(op.matrix for op in blocks.values()), layout, hermitian_hint=True)


def dicke_layout(p: DickeParams) -> RegisterLayout:
    return RegisterLayout(
        p.N, p.Lambda + 1, Quantisation.SecondQ, fermion_modes_per_site=1,
        num_boson_registers=1, max_dim=p.max_dim,
    )


def _pauli_sum(N: int, pauli: np.ndarray) -> np.ndarray:
    return sum(embed(pauli, j, [2] * N) for j in range(N))


def dicke_hamiltonian(p: DickeParams) -> dict[str, Operator]:
    """Blocks H_b = ω₀b†b, H_atom = Ω S_z, H_fb = g(b + b†)S_x with S = Σ Pauli."""
    layout = dicke_layout(p)
    b, bd = ladder_ops(p.Lambda)
    sx = _pauli_sum(p.N, np.array([[0, 1], [1, 0]], dtype=complex))
    sz = _pauli_sum(p.N, np.diag([1.0, -1.0]).astype(complex))
    ia = np.eye(2**p.N)
    ib = np.eye(p.Lambda + 1)
    out = {
        "H_b": np.kron(ia, p.omega0 * bd.matrix @ b.matrix),
        "H_atom": np.kron(p.Omega * sz, ib),
        "H_fb": p.g * np.kron(sx, b.matrix + bd.matrix),
    }
    return {k: Operator(v, layout, hermitian_hint=True, label=k) for k, v in out.items()}


def frohlich_layout(p: FrohlichParams) -> RegisterLayout:
    return RegisterLayout(
        p.N, p.boson_dim, p.quantisation, num_boson_registers=p.N * p.n_modes,
        max_dim=p.max_dim,
    )


def frohlich_couplings(p: FrohlichParams) -> np.ndarray:
    """Coupling table f[i, j, γ]."""
    if p.f_callable is not None:
        f = np.array(
            [[[p.f_callable(i, j, g) for g in range(p.n_modes)] for j in range(p.N)]
             for i in range(p.N)],
            dtype=float,
        )
    elif p.f is not None:
        f = np.asarray(p.f, dtype=float)
    else:
        d = np.abs(np.subtract.outer(np.arange(p.N), np.arange(p.N)))
        f = np.repeat(kappa_kernel(d, p.kappa)[:, :, None], p.n_modes, axis=2)
    if not np.all(np.isfinite(f)):
        raise ValueError("coupling table must be finite")
    return f


def frohlich_hamiltonian(p: FrohlichParams) -> dict[str, Operator]:
    """Blocks H_b, H_fb, H_f_diag, H_f_hop; boson registers ordered (site, mode) row-major."""
    layout = frohlich_layout(p)
    lat = FermionLattice(p.N, 2, p.max_dim)
    omegas = p.omega_table()
    f = frohlich_couplings(p)
    h_b = np.zeros((layout.bosonic_dim,) * 2, dtype=complex)
    h_fb = np.zeros((layout.total_dim,) * 2, dtype=complex)
    for i in range(p.N):
        for gam in range(p.n_modes):
            reg = i * p.n_modes + gam
            hb_site, coup = boson_site_ops(p.quantisation, p.cutoff, omegas[i, gam])
            h_b += _boson(hb_site, reg, layout)
            coup_full = _boson(coup, reg, layout)
            for j in range(p.N):
                if f[i, j, gam] != 0:
                    h_fb += f[i, j, gam] * np.kron(lat.number(j) - np.eye(lat.dim), coup_full)
    out = {
        "H_b": np.kron(np.eye(lat.dim), h_b),
        "H_fb": h_fb,
        "H_f_diag": _full(lat.hubbard_diagonal(p.U, p.mu), None, layout),
        "H_f_hop": _full(lat.hubbard_hopping(bonds(p.N, p.boundary)), None, layout),
    }
    return {k: Operator(v, layout, hermitian_hint=True, label=k) for k, v in out.items()}


def ssh_layout(p: SSHParams) -> RegisterLayout:
    return RegisterLayout(
        p.N, p.Lambda + 1, Quantisation.SecondQ, num_boson_registers=1, max_dim=p.max_dim
    )


def ring_hopping_matrix(lat: FermionLattice) -> np.ndarray:
    """Σ_{i,σ} (c†_{i+1,σ} c_{i,σ} + h.c.) summed literally around the ring."""
    N = lat.num_sites
    t = np.zeros((lat.dim, lat.dim), dtype=complex)
    for i in range(N):
        for s in range(lat.modes_per_site):
            t += lat.hop(lat.mode((i + 1) % N, s), lat.mode(i, s))
    return t


def ssh_hamiltonian_single_mode(p: SSHParams) -> dict[str, Operator]:
    """Blocks H_hop = -t T, H_fb = g(b + b†)T, H_b = ω₀b†b with T the ring hopping."""
    layout = ssh_layout(p)
    lat = FermionLattice(p.N, 2, p.max_dim)
    b, bd = ladder_ops(p.Lambda)
    t = ring_hopping_matrix(lat)
    out = {
        "H_hop": np.kron(-p.t_hop * t, np.eye(p.Lambda + 1)),
        "H_fb": p.g * np.kron(t, b.matrix + bd.matrix),
        "H_b": np.kron(np.eye(lat.dim), p.omega0 * bd.matrix @ b.matrix),
    }
    return {k: Operator(v, layout, hermitian_hint=True, label=k) for k, v in out.items()}
