"""Polaron (Lang-Firsov) transforms and the transformed Hamiltonian pieces.

Every transform here is block diagonal over fermionic configurations: inside
the block for a configuration, each boson register is displaced by an amount
fixed by the occupations.  The convention is ``conjugate(H, D) = D H D†``, under
which ``D (H_b + H_fb) D†`` becomes ``H_b`` plus a purely fermionic diagonal
shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np
import mpmath as mp
import scipy.linalg as sla

from .models import (
    DickeParams,
    FermionLattice,
    FrohlichParams,
    HubbardHolsteinParams,
    SSHParams,
    bonds,
    boson_site_ops,
    dicke_layout,
    frohlich_couplings,
    frohlich_layout,
    hh_hamiltonian,
    hh_layout,
    ring_hopping_matrix,
    ssh_layout,
)
from .operators import (
    DimensionCapError,
    Operator,
    Quantisation,
    RegisterLayout,
    as_matrix,
    displacement_1q,
    displacement_2q,
    expm_hermitian,
    kron_all,
    ladder_ops,
    qht,
)

__all__ = [
    "PolaronTransform",
    "hh_alpha",
    "build_polaron_hh",
    "build_polaron_dicke",
    "build_polaron_frohlich",
    "build_ssh_transforms",
    "conjugate",
    "transformed_h0_hh",
    "transformed_v_hh",
    "diagonalization_residual",
    "diagonalization_residual_dense",
    "fermionic_shift_hh",
    "ssh_momentum_weights",
    "low_projector",
]

ModelParams = Union[HubbardHolsteinParams, DickeParams, FrohlichParams, SSHParams]


@dataclass(frozen=True, eq=False)
class PolaronTransform:
    """Configuration-controlled displacement unitary.

    ``alpha_table`` maps a fermionic occupation pattern to the displacement of
    each boson register.  For Dicke and SSH the key is the eigenvalue (or
    configuration) of the controlling operator instead.
    """

    unitary: Operator
    alpha_table: dict = field(default_factory=dict)
    model_tag: str = ""


def hh_alpha(n: int, g: float, omega0: float, quantisation) -> float:
    if n not in (0, 1, 2):
        raise ValueError(f"site occupation must be 0, 1 or 2, got {n}")
    if omega0 <= 0:
        raise ValueError("omega0 must be positive")
    scale = np.sqrt(2.0) if Quantisation(quantisation) is Quantisation.FirstQ else 1.0
    return float(scale * g * (n - 1) / omega0)


def _displacement(quantisation, cutoff: int, alpha: float) -> np.ndarray:
    if Quantisation(quantisation) is Quantisation.FirstQ:
        return displacement_1q(cutoff, alpha).matrix
    return displacement_2q(cutoff, alpha).matrix


def _alpha_from_coupling(quantisation, c: float, omega: float) -> float:
    # Displacement cancelling c * coup for h_b = omega b†b (2Q) or (omega/2)(X²+P²) (1Q).
    if Quantisation(quantisation) is Quantisation.FirstQ:
        return float(np.sqrt(2.0) * c / omega)
    return float(c / omega)


def _block_diagonal(layout: RegisterLayout, blocks: list[np.ndarray]) -> np.ndarray:
    nb = layout.bosonic_dim
    out = np.zeros((layout.total_dim,) * 2, dtype=complex)
    for f, blk in enumerate(blocks):
        out[f * nb:(f + 1) * nb, f * nb:(f + 1) * nb] = blk
    return out


def _controlled_unitary(layout: RegisterLayout, cutoff: int, alphas: np.ndarray) -> np.ndarray:
    """alphas[f, r]: displacement of boson register r in fermion basis state f."""
    cache: dict[float, np.ndarray] = {}

    def disp(a: float) -> np.ndarray:
        if a not in cache:
            cache[a] = _displacement(layout.quantisation, cutoff, a)
        return cache[a]

    blocks = [kron_all([disp(float(a)) for a in row]) for row in alphas]
    return _block_diagonal(layout, blocks)


def build_polaron_hh(p: HubbardHolsteinParams) -> PolaronTransform:
    layout = hh_layout(p)
    lat = FermionLattice(p.N, 2, p.max_dim)
    occ = lat.site_occupations()
    table = {n: hh_alpha(n, p.g, p.omega0, p.quantisation) for n in (0, 1, 2)}
    alphas = np.vectorize(table.get)(occ).astype(float)
    u = _controlled_unitary(layout, p.cutoff, alphas)
    alpha_table = {tuple(int(x) for x in row): tuple(a) for row, a in zip(occ, alphas.tolist())}
    return PolaronTransform(Operator(u, layout), alpha_table, "hubbard_holstein")


def _collective_sx(N: int) -> np.ndarray:
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    return sum(kron_all([x if k == j else np.eye(2) for k in range(N)]) for j in range(N))


def build_polaron_dicke(p: DickeParams) -> PolaronTransform:
    layout = dicke_layout(p)
    b, bd = ladder_ops(p.Lambda)
    gen = (p.g / p.omega0) * np.kron(_collective_sx(p.N), bd.matrix - b.matrix)
    u = expm_hermitian(1j * gen)
    alpha_table = {s: p.g * s / p.omega0 for s in range(-p.N, p.N + 1, 2)}
    return PolaronTransform(Operator(u, layout), alpha_table, "dicke")


def frohlich_alphas(p: FrohlichParams) -> tuple[np.ndarray, np.ndarray]:
    """(site occupations[f, j], alphas[f, (i, γ)]) for every fermion basis state f."""
    lat = FermionLattice(p.N, 2, p.max_dim)
    occ = lat.site_occupations()
    f = frohlich_couplings(p)
    omegas = p.omega_table()
    c = np.einsum("ijg,fj->fig", f, occ - 1)
    scale = np.sqrt(2.0) if p.quantisation is Quantisation.FirstQ else 1.0
    alphas = scale * c / omegas[None, :, :]
    return occ, alphas.reshape(occ.shape[0], -1)


def build_polaron_frohlich(p: FrohlichParams) -> PolaronTransform:
    layout = frohlich_layout(p)
    occ, alphas = frohlich_alphas(p)
    u = _controlled_unitary(layout, p.cutoff, alphas)
    alpha_table = {tuple(int(x) for x in row): tuple(a) for row, a in zip(occ, alphas.tolist())}
    return PolaronTransform(Operator(u, layout), alpha_table, "frohlich")


def _fock_lift(single_particle: np.ndarray, lat: FermionLattice) -> np.ndarray:
    """Fock-space unitary S with S c†_q S† = Σ_p u_{pq} c†_p."""
    t, z = sla.schur(single_particle, output="complex")
    h = (z * np.log(np.diag(t))) @ z.conj().T
    gen = np.zeros((lat.dim, lat.dim), dtype=complex)
    for p_ in range(lat.num_modes):
        for q in range(lat.num_modes):
            if h[p_, q] != 0:
                gen += h[p_, q] * (lat.c[p_].conj().T @ lat.c[q])
    # gen is anti-Hermitian; exp(gen) = exp(-i (i gen)).
    return expm_hermitian(1j * gen)


def ssh_momentum_weights(p: SSHParams) -> tuple[np.ndarray, np.ndarray]:
    """(S on the fermion space, diagonal of S† T S) for the ring hopping T."""
    lat = FermionLattice(p.N, 2, p.max_dim)
    k = np.arange(p.N)
    u = np.exp(2j * np.pi * np.outer(k, k) / p.N) / np.sqrt(p.N)
    s = _fock_lift(np.kron(u, np.eye(2)), lat)
    t = ring_hopping_matrix(lat)
    w = np.real(np.diag(s.conj().T @ t @ s))
    return s, w


def build_ssh_transforms(p: SSHParams) -> tuple[Operator, PolaronTransform]:
    """Fermionic Fourier rotation S and the momentum-frame polaron transform.

    In the frame H → S† H S the total hopping is diag(w); the transform then
    displaces the shared mode by g w / ω₀ in each momentum configuration.
    """
    layout = ssh_layout(p)
    s_f, w = ssh_momentum_weights(p)
    nb = layout.bosonic_dim
    s = Operator(np.kron(s_f, np.eye(nb)), layout)
    alphas = (p.g * w / p.omega0)[:, None]
    u = _controlled_unitary(layout, p.Lambda, alphas)
    lat = FermionLattice(p.N, 2, p.max_dim)
    alpha_table = {
        tuple(int(x) for x in row): float(a) for row, a in zip(lat.occupations, alphas[:, 0])
    }
    return s, PolaronTransform(Operator(u, layout), alpha_table, "ssh")


def conjugate(A, U) -> Operator:
    """U A U†."""
    a, u = as_matrix(A), as_matrix(U)
    if a.shape != u.shape:
        raise ValueError(f"dimension mismatch {a.shape} vs {u.shape}")
    layout = A.layout if isinstance(A, Operator) else None
    return Operator(u @ a @ u.conj().T, layout)


def fermionic_shift_hh(p: HubbardHolsteinParams) -> np.ndarray:
    """Diagonal of H′ over the fermion basis: -Σ_i ω₀α² (2Q) or -(ω₀/2)α² (1Q)."""
    lat = FermionLattice(p.N, 2, p.max_dim)
    occ = lat.site_occupations()
    pref = p.omega0 / 2 if p.quantisation is Quantisation.FirstQ else p.omega0
    alpha = np.vectorize(lambda n: hh_alpha(int(n), p.g, p.omega0, p.quantisation))(occ)
    return -pref * (np.abs(alpha) ** 2).sum(axis=1)


def transformed_h0_hh(p: HubbardHolsteinParams) -> Operator:
    """H̃₀ = H_b + H′ + H_f_diag."""
    blocks = hh_hamiltonian(p)
    layout = blocks["H_b"].layout
    shift = np.kron(np.diag(fermionic_shift_hh(p)), np.eye(layout.bosonic_dim))
    h = blocks["H_b"].matrix + shift + blocks["H_f_diag"].matrix
    return Operator(h, layout, hermitian_hint=True, label="H0_tilde")


def transformed_v_hh(p: HubbardHolsteinParams) -> Operator:
    """Ṽ = -Σ_{bonds,σ} [c†_i c_j ⊗ e^{-ia(P_i - P_j)} + h.c.] with a = √2 g/ω₀."""
    if p.quantisation is not Quantisation.FirstQ:
        raise ValueError("transformed_v_hh is defined for FirstQ; conjugate V by D instead")
    layout = hh_layout(p)
    lat = FermionLattice(p.N, 2, p.max_dim)
    a = np.sqrt(2.0) * p.g / p.omega0
    dims = layout.boson_dims()
    v = np.zeros((layout.total_dim,) * 2, dtype=complex)
    for i, j in bonds(p.N, p.boundary):
        factors = [np.eye(d) for d in dims]
        if a != 0:
            factors[i] = displacement_1q(p.cutoff, a).matrix
            factors[j] = displacement_1q(p.cutoff, -a).matrix
        phase = kron_all(factors)
        for s in range(2):
            hop = lat.c[lat.mode(i, s)].conj().T @ lat.c[lat.mode(j, s)]
            term = np.kron(hop, phase)
            v -= term + term.conj().T
    return Operator(v, layout, hermitian_hint=True, label="V_tilde")


def _low_dim(dim: int, low_fraction: float) -> int:
    if not 0 < low_fraction <= 0.25:
        raise ValueError("low_fraction must lie in (0, 1/4]")
    return max(1, int(np.floor(low_fraction * dim)))


def low_projector(quantisation, cutoff: int, low_fraction: float) -> np.ndarray:
    """Isometry onto the lowest number (2Q) or Hermite (1Q) states of one register."""
    if Quantisation(quantisation) is Quantisation.FirstQ:
        m = _low_dim(cutoff, low_fraction)
        return qht(cutoff, m - 1).matrix[:, :m]
    m = _low_dim(cutoff + 1, low_fraction)
    return np.eye(cutoff + 1, dtype=complex)[:, :m]


class _LocalResidual:
    """Q† [D(h_b + c·coup)D† - (h_b - c²/ω)] Q for one register, cached by c."""

    def __init__(self, quantisation, cutoff: int, omega: float, q: np.ndarray):
        self.quantisation = Quantisation(quantisation)
        self.cutoff = cutoff
        self.omega = omega
        self.q = q
        self.hb, self.coup = boson_site_ops(quantisation, cutoff, omega)
        self.cache: dict[float, np.ndarray] = {}

    def __call__(self, c: float) -> np.ndarray:
        c = float(c)
        if c not in self.cache:
            if c == 0:
                self.cache[c] = np.zeros((self.q.shape[1],) * 2, dtype=complex)
            else:
                a = _alpha_from_coupling(self.quantisation, c, self.omega)
                d = _displacement(self.quantisation, self.cutoff, a)
                lhs = d @ (self.hb + c * self.coup) @ d.conj().T
                rhs = self.hb - (c * c / self.omega) * np.eye(self.hb.shape[0])
                self.cache[c] = self.q.conj().T @ (lhs - rhs) @ self.q
        return self.cache[c]


class _LocalResidualMP(_LocalResidual):
    """Extended-precision variant: the same projected block evaluated with mpmath.

    Only the low columns D†Q are formed, by a Taylor series on vectors (number
    basis) or by exact Fourier conjugation (grid).  The result is rounded to
    double at the end, so tiny residuals keep their relative accuracy.
    """

    def __init__(self, quantisation, cutoff: int, omega: float, m: int, dps: int):
        self.quantisation = Quantisation(quantisation)
        self.cutoff = cutoff
        self.omega = omega
        self.m = m
        self.dps = dps
        self.cache = {}

    def __call__(self, c: float) -> np.ndarray:
        c = float(c)
        if c not in self.cache:
            with mp.workdps(self.dps):
                if c == 0:
                    r = np.zeros((self.m, self.m), dtype=complex)
                elif self.quantisation is Quantisation.SecondQ:
                    r = self._number_basis(mp.mpf(c))
                else:
                    r = self._grid(mp.mpf(c))
            self.cache[c] = r
        return self.cache[c]

    def _number_basis(self, c):
        n, om = self.cutoff + 1, mp.mpf(self.omega)
        alpha = c / om
        sq = [mp.sqrt(k) for k in range(n)]

        def apply_gen(v):
            # (b† - b) v
            out = [mp.mpf(0)] * n
            for k in range(n):
                if k > 0:
                    out[k] += sq[k] * v[k - 1]
                if k + 1 < n:
                    out[k] -= sq[k + 1] * v[k + 1]
            return out

        tol = mp.mpf(10) ** (-self.dps)
        cols = []
        for k in range(self.m):
            # D† e_k = exp(-alpha (b† - b)) e_k
            term = [mp.mpf(int(j == k)) for j in range(n)]
            acc = list(term)
            j = 0
            while max(abs(x) for x in term) > tol:
                j += 1
                term = [-alpha * x / j for x in apply_gen(term)]
                acc = [a + t for a, t in zip(acc, term)]
            cols.append(acc)

        def apply_h(v):
            out = [om * k * v[k] for k in range(n)]
            for k in range(n - 1):
                out[k] += c * sq[k + 1] * v[k + 1]
                out[k + 1] += c * sq[k + 1] * v[k]
            return out

        hv = [apply_h(v) for v in cols]
        r = np.empty((self.m, self.m))
        for a in range(self.m):
            for b in range(self.m):
                val = mp.fsum(x * y for x, y in zip(cols[a], hv[b]))
                if a == b:
                    val -= om * a - c * c / om
                r[a, b] = float(val)
        return r.astype(complex)

    def _grid(self, c):
        M, om = self.cutoff, mp.mpf(self.omega)
        alpha = mp.sqrt(2) * c / om
        step = mp.sqrt(2 * mp.pi / M)
        x = [step * (-M + 2 * j) / 2 for j in range(M)]
        s = [j - M // 2 for j in range(M)]
        F = mp.matrix(M, M)
        for a in range(M):
            for b in range(M):
                F[a, b] = mp.expjpi(mp.mpf(2 * s[a] * s[b]) / M) / mp.sqrt(M)
        Fh = F.H
        # Lowdin-orthonormalised sampled Hermite functions
        psi = mp.matrix(M, self.m)
        pref = (2 * mp.pi / M) ** mp.mpf(0.25) * mp.pi ** mp.mpf(-0.25)
        for j in range(M):
            h0 = pref * mp.exp(-x[j] ** 2 / 2)
            prev, cur = mp.mpf(0), h0
            for k in range(self.m):
                psi[j, k] = cur
                nxt = mp.sqrt(mp.mpf(2) / (k + 1)) * x[j] * cur - mp.sqrt(mp.mpf(k) / (k + 1)) * prev
                prev, cur = cur, nxt
        gram = psi.T * psi
        w, v = mp.eigsy(gram)
        inv_sqrt = v * mp.diag([1 / mp.sqrt(e) for e in w]) * v.T
        q = psi * inv_sqrt
        # D† Q = F diag(e^{i alpha x}) F† Q
        fq = Fh * q
        for j in range(M):
            ph = mp.expj(alpha * x[j])
            for k in range(self.m):
                fq[j, k] *= ph
        vcols = F * fq

        def apply_h(mat, coupling):
            pp = Fh * mat
            for j in range(M):
                for k in range(self.m):
                    pp[j, k] *= x[j] ** 2
            pp = F * pp
            out = mp.matrix(M, self.m)
            for j in range(M):
                for k in range(self.m):
                    out[j, k] = om / 2 * (x[j] ** 2 * mat[j, k] + pp[j, k])
                    out[j, k] += coupling * mp.sqrt(2) * x[j] * mat[j, k]
            return out

        r = vcols.H * apply_h(vcols, c) - q.T * apply_h(q, 0)
        for k in range(self.m):
            r[k, k] += c * c / om
        return np.array(r.tolist(), dtype=complex)


def _sum_local(terms: list[np.ndarray]) -> np.ndarray:
    dims = [t.shape[0] for t in terms]
    total = 0
    for r, t in enumerate(terms):
        if np.any(t):
            total = total + kron_all(
                [t if k == r else np.eye(d) for k, d in enumerate(dims)]
            )
    if isinstance(total, int):
        return np.zeros((1, 1))
    return total


def _couplings(p: ModelParams) -> tuple[Quantisation, int, np.ndarray, np.ndarray]:
    """(quantisation, cutoff, omegas[r], couplings[config, r]) for the residual."""
    if isinstance(p, HubbardHolsteinParams):
        lat = FermionLattice(p.N, 2, p.max_dim)
        c = p.g * (lat.site_occupations() - 1)
        return p.quantisation, p.cutoff, np.full(p.N, p.omega0), c.astype(float)
    if isinstance(p, FrohlichParams):
        lat = FermionLattice(p.N, 2, p.max_dim)
        c = np.einsum("ijg,fj->fig", frohlich_couplings(p), lat.site_occupations() - 1)
        return p.quantisation, p.cutoff, p.omega_table().ravel(), c.reshape(c.shape[0], -1)
    if isinstance(p, DickeParams):
        s = np.arange(-p.N, p.N + 1, 2, dtype=float)
        return Quantisation.SecondQ, p.Lambda, np.array([p.omega0]), (p.g * s)[:, None]
    if isinstance(p, SSHParams):
        _, w = ssh_momentum_weights(p)
        c = np.unique(np.round(p.g * w, 12))
        return Quantisation.SecondQ, p.Lambda, np.array([p.omega0]), c[:, None]
    raise TypeError(f"unsupported parameter type {type(p).__name__}")


def diagonalization_residual(
    p: ModelParams, low_fraction: float = 0.25, dps: int | None = None
) -> float:
    """Spectral norm of P_low (D(H_b + H_fb)D† - (H_b + H′)) P_low.

    The operator is block diagonal over fermionic (or collective-spin, or
    momentum) configurations and within a block is a sum of single-register
    terms, so the norm is the maximum over configurations of the norm of that
    sum restricted to the low subspace.  Only low-subspace matrices are built.

    Residuals at large cutoffs fall below double-precision roundoff (about
    1e-14 for number-basis registers).  Passing ``dps`` evaluates the
    single-register blocks with that many decimal digits.
    """
    quant, cutoff, omegas, c = _couplings(p)
    q = low_projector(quant, cutoff, low_fraction)
    locals_: dict[float, _LocalResidual] = {}
    worst = 0.0
    seen = set()
    for row in np.round(c, 14):
        key = tuple(row)
        if key in seen:
            continue
        seen.add(key)
        terms = []
        for r, cr in enumerate(row):
            om = float(omegas[r])
            if om not in locals_:
                if dps is None:
                    locals_[om] = _LocalResidual(quant, cutoff, om, q)
                else:
                    locals_[om] = _LocalResidualMP(quant, cutoff, om, q.shape[1], dps)
            terms.append(locals_[om](cr))
        if q.shape[1] ** len(terms) > p.max_dim:
            raise DimensionCapError("projected residual exceeds the dimension cap")
        worst = max(worst, float(np.linalg.norm(_sum_local(terms), 2)))
    return worst


def diagonalization_residual_dense(p: ModelParams, low_fraction: float = 0.25) -> float:
    """Same quantity as :func:`diagonalization_residual` from full dense matrices."""
    from .models import dicke_hamiltonian, frohlich_hamiltonian, ssh_hamiltonian_single_mode

    if isinstance(p, HubbardHolsteinParams):
        blocks = hh_hamiltonian(p)
        d = build_polaron_hh(p).unitary
        target = transformed_h0_hh(p).matrix - blocks["H_f_diag"].matrix
        lhs = conjugate(blocks["H_b"].matrix + blocks["H_fb"].matrix, d).matrix
        quant, cutoff, layout = p.quantisation, p.cutoff, hh_layout(p)
    elif isinstance(p, FrohlichParams):
        blocks = frohlich_hamiltonian(p)
        d = build_polaron_frohlich(p).unitary
        _, alphas = frohlich_alphas(p)
        omegas = p.omega_table().ravel()
        pref = 0.5 if p.quantisation is Quantisation.FirstQ else 1.0
        shift = -pref * (omegas[None, :] * alphas**2).sum(axis=1)
        layout = frohlich_layout(p)
        target = blocks["H_b"].matrix + np.kron(np.diag(shift), np.eye(layout.bosonic_dim))
        lhs = conjugate(blocks["H_b"].matrix + blocks["H_fb"].matrix, d).matrix
        quant, cutoff = p.quantisation, p.cutoff
    elif isinstance(p, DickeParams):
        blocks = dicke_hamiltonian(p)
        d = build_polaron_dicke(p).unitary
        layout = dicke_layout(p)
        sx_atoms = _collective_sx(p.N)
        target = blocks["H_b"].matrix - (p.g**2 / p.omega0) * np.kron(
            sx_atoms @ sx_atoms, np.eye(p.Lambda + 1)
        )
        lhs = conjugate(blocks["H_b"].matrix + blocks["H_fb"].matrix, d).matrix
        quant, cutoff = Quantisation.SecondQ, p.Lambda
    elif isinstance(p, SSHParams):
        blocks = ssh_hamiltonian_single_mode(p)
        s, tr = build_ssh_transforms(p)
        layout = ssh_layout(p)
        _, w = ssh_momentum_weights(p)
        h = blocks["H_b"].matrix + blocks["H_fb"].matrix
        rotated = s.matrix.conj().T @ h @ s.matrix
        lhs = conjugate(rotated, tr.unitary).matrix
        target = blocks["H_b"].matrix - np.kron(
            np.diag((p.g * w) ** 2 / p.omega0), np.eye(p.Lambda + 1)
        )
        quant, cutoff = Quantisation.SecondQ, p.Lambda
    else:
        raise TypeError(f"unsupported parameter type {type(p).__name__}")
    q1 = low_projector(quant, cutoff, low_fraction)
    q = np.kron(np.eye(layout.fermion_dim), kron_all([q1] * layout.n_boson_registers))
    return float(np.linalg.norm(q.conj().T @ (lhs - target) @ q, 2))
