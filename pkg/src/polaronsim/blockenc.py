"""Matrix-level block-encodings of the lattice Hamiltonians.

A :class:`BlockEncoding` is stored as a list of sparse unitary factors on
``ancilla ⊗ system`` (ancilla most significant, all-zero ancilla state is
index 0).  Comparators and adders are evaluated as exact integer arithmetic on
basis labels rather than gate networks; the corresponding gate counts live in
:mod:`polaronsim.resources`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .models import Boundary, FermionLattice, HubbardHolsteinParams, bonds
from .operators import (
    DimensionCapError,
    Operator,
    Quantisation,
    RegisterLayout,
    centered_dft,
    displacement_1q,
    grid_points,
    kron_all,
    ladder_ops,
)

__all__ = [
    "BlockEncoding",
    "SwupRegisters",
    "usp_nn",
    "swup",
    "be_hop",
    "be_diagonal",
    "be_hf",
    "be_full",
    "lcu",
    "walk_ingredients",
    "verify_block",
    "sample_space_size",
    "index_bits",
]

DENSE_UNITARY_CAP = 2**12

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_I2 = np.eye(2, dtype=complex)


@dataclass(eq=False)
class BlockEncoding:
    """U = factors[-1] ... factors[0] with ⟨0_anc|U|0_anc⟩ ≈ target / alpha."""

    factors: list
    ancilla_dim: int
    system_dim: int
    alpha: float
    target_tag: str = ""
    registers: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.ancilla_dim * self.system_dim

    def block(self) -> np.ndarray:
        """Top-left system block ⟨0_anc|U|0_anc⟩."""
        cols = np.zeros((self.dim, self.system_dim), dtype=complex)
        cols[: self.system_dim] = np.eye(self.system_dim)
        for f in self.factors:
            cols = f @ cols
        return cols[: self.system_dim]

    @property
    def unitary(self) -> Operator:
        if self.dim > DENSE_UNITARY_CAP:
            raise DimensionCapError(
                f"dense unitary of dimension {self.dim} exceeds {DENSE_UNITARY_CAP}"
            )
        u = np.eye(self.dim, dtype=complex)
        for f in self.factors:
            u = f @ u
        return Operator(u)

    def unitarity_error(self) -> float:
        """Largest max-norm deviation of F†F from I over the factors."""
        worst = 0.0
        for f in self.factors:
            f = sp.csr_matrix(f)
            d = (f.conj().T @ f - sp.identity(f.shape[0], format="csr")).tocoo()
            if d.nnz:
                worst = max(worst, float(np.max(np.abs(d.data))))
        return worst


def verify_block(be: BlockEncoding, target) -> float:
    """‖⟨0|U|0⟩·alpha − target‖_max."""
    t = target.matrix if isinstance(target, Operator) else np.asarray(target)
    if t.shape != (be.system_dim, be.system_dim):
        raise ValueError(f"target shape {t.shape} does not match system {be.system_dim}")
    return float(np.max(np.abs(be.block() * be.alpha - t)))


def index_bits(N: int) -> int:
    """b_N = ceil(log2 N)."""
    return max(0, math.ceil(math.log2(N))) if N > 1 else 0


def sample_space_size(eps: float) -> int:
    """M_s = 2^ceil(log2(1/eps))."""
    if not 0 < eps <= 0.1:
        raise ValueError("eps must lie in (0, 0.1]")
    return 2 ** math.ceil(math.log2(1 / eps) - 1e-12)


def _state_prep(v: np.ndarray) -> np.ndarray:
    """Unitary whose first column is the unit vector v (Householder reflection)."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    n = v.size
    e0 = np.zeros(n, dtype=complex)
    e0[0] = 1
    # absorb the phase of v[0] so the reflection maps e0 exactly onto v
    ph = v[0] / abs(v[0]) if abs(v[0]) > 1e-15 else 1.0
    w = e0 - v / ph
    nw = np.linalg.norm(w)
    if nw < 1e-15:
        return np.eye(n, dtype=complex) * ph
    w = w / nw
    return (np.eye(n) - 2 * np.outer(w, w.conj())) * ph


def _kron(*mats) -> sp.csr_matrix:
    out = sp.csr_matrix(np.ones((1, 1), dtype=complex))
    for m in mats:
        out = sp.kron(out, sp.csr_matrix(m), format="csr")
    return out


def _eye(n: int) -> sp.csr_matrix:
    return sp.identity(n, dtype=complex, format="csr")


def _controlled(blocks: Sequence, inner_dim: int = 1) -> sp.csr_matrix:
    """Σ_c |c⟩⟨c| ⊗ I_inner ⊗ blocks[c]."""
    return sp.block_diag(
        [_kron(_eye(inner_dim), b) for b in blocks], format="csr"
    ).astype(complex)


# ---------------------------------------------------------------- USP / SWUP


def _ring_slots(N: int, boundary) -> list[bool]:
    """Slot i holds the pair (i, i+1 mod N); True when that pair is a bond."""
    bset = set(bonds(N, boundary))
    return [(i, (i + 1) % N) in bset for i in range(N)]


def usp_nn(N: int, boundary=Boundary.Open, ring_slots: bool = False) -> np.ndarray:
    """Uniform superposition over bond slots on a 2^b_N index register.

    Slot i stands for the bond (i, i+1 mod N), so the second site is implicit.
    With ``ring_slots`` every one of the N slots gets weight 1/√N, including
    slots that are not bonds; :func:`be_hop` uses this so that α = 4N for open
    chains as well.
    """
    if N < 2 and not ring_slots:
        raise ValueError("need at least two sites")
    dim = 2 ** index_bits(N)
    v = np.zeros(dim, dtype=complex)
    if ring_slots:
        v[:N] = 1
    else:
        v[[i for i, ok in enumerate(_ring_slots(N, boundary)) if ok]] = 1
    return v / np.linalg.norm(v)


class SwupRegisters(str, Enum):
    Fermion2 = "Fermion2"
    Boson1 = "Boson1"
    Both = "Both"


def _site_order(N: int, i: int) -> list[int]:
    """Original site held at each position after moving i, i+1 to the front."""
    order = list(range(N))
    if N == 1 or i >= N:
        return order
    order[0], order[i] = order[i], order[0]
    j = (i + 1) % N
    pj = order.index(j)
    if pj != 1:
        order[1], order[pj] = order[pj], order[1]
    return order


def _factor_permutation(dims: list[int], order: list[int]) -> np.ndarray:
    """perm[n] = old flat index of the basis state that lands on new index n."""
    idx = np.arange(int(np.prod(dims))).reshape(dims)
    return idx.transpose(order).ravel()


def _system_dims(N: int, layout: RegisterLayout | None) -> tuple[list[int], int, int]:
    modes = 2 * N if layout is None else layout.num_fermion_modes
    nbos = 0 if layout is None else layout.n_boson_registers
    dims = [2] * modes + ([] if layout is None else layout.boson_dims())
    return dims, modes, nbos


def _swup_orders(N: int, layout, registers: SwupRegisters, control: int) -> list[int]:
    dims, modes, nbos = _system_dims(N, layout)
    registers = SwupRegisters(registers)
    fermion = list(range(modes))
    boson = list(range(modes, modes + nbos))
    if control < N:
        sites = _site_order(N, control)
        if registers in (SwupRegisters.Fermion2, SwupRegisters.Both):
            fermion = [2 * s + k for s in sites for k in range(2)]
        if registers is SwupRegisters.Both:
            boson = [modes + s for s in sites]
        if registers is SwupRegisters.Boson1:
            b = list(range(N))
            b[0], b[control] = b[control], b[0]
            boson = [modes + s for s in b]
    return fermion + boson


def _swup_perms(N: int, layout, registers) -> list[sp.csr_matrix]:
    dims, _, _ = _system_dims(N, layout)
    dim = int(np.prod(dims))
    out = []
    for c in range(2 ** index_bits(N)):
        perm = _factor_permutation(dims, _swup_orders(N, layout, registers, c))
        out.append(sp.csr_matrix((np.ones(dim, dtype=complex), (np.arange(dim), perm)), shape=(dim, dim)))
    return out


def swup(N: int, layout: RegisterLayout | None = None, registers=SwupRegisters.Fermion2) -> Operator:
    """Index-controlled permutation moving sites i and i+1 to the front.

    ``layout=None`` means a purely fermionic system of N spinful sites.  The
    move is done by the transpositions (0 i) then (1 pos(i+1)); control values
    ≥ N act as the identity.
    """
    if registers in (SwupRegisters.Boson1, SwupRegisters.Both, "Boson1", "Both") and layout is None:
        raise ValueError("boson registers need a layout")
    return Operator(_controlled(_swup_perms(N, layout, registers)).toarray())


# ---------------------------------------------------------------- hopping


def _pauli_string(n: int, ops: dict[int, np.ndarray]) -> sp.csr_matrix:
    return _kron(*[ops.get(k, _I2) for k in range(n)])


def _hop_select_terms(N: int, boundary, layout, transformed: bool, g_over_w: float, M: int):
    """SEL blocks indexed by (slot, a, b, σ) on the permuted system."""
    dims, modes, nbos = _system_dims(N, layout)
    bdim = int(np.prod(dims[modes:])) if nbos else 1
    sys_dim = 2**modes * bdim
    active = _ring_slots(N, boundary) if N > 1 else [False]
    slot_dim = 2 ** index_bits(N)
    shift = np.sqrt(2.0) * g_over_w
    blocks = []
    for slot in range(slot_dim):
        ok = slot < N and active[slot]
        if ok:
            order = _site_order(N, slot)
            pos = {s: order.index(s) for s in range(N)}
            j = (slot + 1) % N
        for a in (0, 1):
            for b in (0, 1):
                for s in (0, 1):
                    if not ok:
                        sign = 1.0 if a == 0 else -1.0
                        blocks.append(sign * _eye(sys_dim))
                        continue
                    p, q = sorted((2 * slot + s, 2 * j + s))
                    low, high = p // 2, q // 2
                    pp, pq = 2 * pos[low] + s, 2 * pos[high] + s
                    zs = {2 * pos[k // 2] + k % 2: _Z for k in range(p + 1, q)}
                    if a == 1 and b == 1:
                        ops = {**zs, pp: _X, pq: _X}
                    elif a == 0 and b == 0:
                        ops = {**zs, pp: _Y, pq: _Y}
                    else:
                        # the mixed terms cancel in pairs
                        ops = {**zs, pp: _X, pq: (1j if a == 1 else -1j) * _Y}
                    term = _pauli_string(modes, ops)
                    if transformed and a == b:
                        # multiply by e^{i Z_q φ}, φ = a(P_low − P_high), on the permuted bosons
                        bos = [np.eye(M, dtype=complex)] * nbos
                        bos[pos[low]] = displacement_1q(M, -shift).matrix
                        bos[pos[high]] = displacement_1q(M, shift).matrix
                        ephi = kron_all(bos)
                        p0 = _pauli_string(modes, {pq: np.diag([1.0, 0.0]).astype(complex)})
                        p1 = _pauli_string(modes, {pq: np.diag([0.0, 1.0]).astype(complex)})
                        phase = _kron(p0, ephi) + _kron(p1, ephi.conj().T)
                        blocks.append(-(_kron(term, _eye(bdim)) @ phase))
                    else:
                        blocks.append(-_kron(term, _eye(bdim)))
    return blocks


def _hop_layout(p: HubbardHolsteinParams, transformed: bool):
    if not transformed:
        return None
    if p.quantisation is not Quantisation.FirstQ:
        raise ValueError("the transformed hopping encoding is defined for FirstQ")
    return RegisterLayout(p.N, p.cutoff, Quantisation.FirstQ, max_dim=p.max_dim)


def be_hop(p: HubbardHolsteinParams, transformed: bool = False) -> BlockEncoding:
    """PREP = USP ⊗ H^⊗3, then SWUP, SEL over (a, b, σ), SWUP†, PREP†; α = 4N.

    The system is the fermion register (2^{2N}); with ``transformed`` it is the
    full FirstQ layout and the encoded operator is the polaron-transformed
    hopping Ṽ.
    """
    layout = _hop_layout(p, transformed)
    dims, _, _ = _system_dims(p.N, layout)
    sys_dim = int(np.prod(dims))
    idx = usp_nn(p.N, p.boundary, ring_slots=True)
    plus = np.ones(2) / np.sqrt(2)
    prep_state = np.kron(idx, kron_all([plus] * 3))
    anc = prep_state.size
    prep = _kron(_state_prep(prep_state), _eye(sys_dim))
    registers = SwupRegisters.Both if transformed else SwupRegisters.Fermion2
    sw = _controlled(_swup_perms(p.N, layout, registers), inner_dim=8)
    sel = _controlled(
        _hop_select_terms(p.N, p.boundary, layout, transformed, p.g / p.omega0, p.cutoff)
    )
    factors = [prep, sw, sel, sw.conj().T.tocsr(), prep.conj().T.tocsr()]
    tag = "V_tilde" if transformed else "H_f_hop"
    return BlockEncoding(
        factors, anc, sys_dim, 4.0 * p.N, tag,
        {"index": idx.size, "a": 2, "b": 2, "sigma": 2, "system": sys_dim},
    )


# ---------------------------------------------------------------- diagonal


def _diag_values(d, dim: int) -> np.ndarray:
    vals = d(np.arange(dim)) if callable(d) else np.asarray(d, dtype=float)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (dim,)).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("diagonal values must be finite")
    return vals


def _diag_factors(vals: np.ndarray, eps: float, d_max: float, prefix_dim: int = 1):
    """Factors of the rejection-sampling encoding on sample ⊗ flag ⊗ system."""
    Ms = sample_space_size(eps)
    dim = vals.size
    absval = np.abs(vals)
    m = np.arange(1, Ms + 1)[:, None]
    if d_max > 0:
        success = (m * d_max <= Ms * absval[None, :]) & (absval[None, :] > 0)
    else:
        success = np.zeros((Ms, dim), dtype=bool)
    # flag |0⟩ marks success; the comparator flips the flag on failure
    n = Ms * 2 * dim
    rows, cols, data = [], [], []
    neg = vals < 0
    for mi in range(Ms):
        for f in (0, 1):
            base = (mi * 2 + f) * dim
            flip = ~success[mi]
            target_f = np.where(flip, 1 - f, f)
            tgt = (mi * 2) * dim + target_f * dim + np.arange(dim)
            # -Z on the flag for negative entries: phase -1 on the success branch
            ph = np.where(neg & (target_f == 0), -1.0, 1.0)
            rows.append(tgt)
            cols.append(base + np.arange(dim))
            data.append(ph)
    cmp_ = sp.csr_matrix(
        (np.concatenate(data).astype(complex), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    hs = _state_prep(np.ones(Ms) / np.sqrt(Ms))
    prep = _kron(hs, _eye(2 * dim))
    factors = [prep, cmp_, prep.conj().T.tocsr()]
    if prefix_dim > 1:
        factors = [_kron(_eye(prefix_dim), f) for f in factors]
    return factors, Ms


def be_diagonal(
    d,
    dim: int,
    eps: float,
    allow_negative: bool = False,
    d_max: float | None = None,
) -> BlockEncoding:
    """Rejection-sampling encoding of diag(d) with α = d_max.

    A uniform sample m ∈ {1..M_s} succeeds when m·d_max ≤ M_s·|d(x)|, so the
    encoded entry is ⌊M_s|d(x)|/d_max⌋/M_s, within 1/M_s of |d(x)|/d_max.
    Negative entries (``allow_negative``) pick up a −Z phase on the flag.
    """
    vals = _diag_values(d, dim)
    if np.any(vals < 0) and not allow_negative:
        raise ValueError("negative diagonal entries need allow_negative=True")
    top = float(np.max(np.abs(vals))) if vals.size else 0.0
    d_max = top if d_max is None else float(d_max)
    if d_max < top * (1 - 1e-12):
        raise ValueError("d_max is below max |d|")
    factors, Ms = _diag_factors(vals, eps, d_max)
    return BlockEncoding(
        factors, 2 * Ms, dim, d_max, "diagonal", {"sample": Ms, "flag": 2, "system": dim}
    )


# ---------------------------------------------------------------- LCU


def _pad(f: sp.spmatrix, anc: int, anc_max: int, sys_dim: int) -> sp.csr_matrix:
    """U ⊕ I: extend an ancilla register of size anc to anc_max."""
    extra = (anc_max - anc) * sys_dim
    if extra == 0:
        return sp.csr_matrix(f)
    return sp.block_diag([f, _eye(extra)], format="csr")


def lcu(parts: Sequence[BlockEncoding], tag: str = "lcu") -> BlockEncoding:
    """Weighted sum Σ_k α_k·block_k with a branch register and a shared ancilla.

    Branch amplitudes are √(α_k/α), α = Σ α_k, so the block encodes Σ_k H_k / α.
    """
    parts = [p for p in parts if p.alpha > 0]
    if not parts:
        raise ValueError("need at least one branch with positive alpha")
    sys_dim = parts[0].system_dim
    if any(p.system_dim != sys_dim for p in parts):
        raise ValueError("branches act on different systems")
    alpha = float(sum(p.alpha for p in parts))
    nb = 2 ** max(1, math.ceil(math.log2(len(parts))))
    amps = np.zeros(nb)
    amps[: len(parts)] = np.sqrt([p.alpha / alpha for p in parts])
    anc_max = max(p.ancilla_dim for p in parts)
    inner = anc_max * sys_dim
    prep = _kron(_state_prep(amps), _eye(inner))
    depth = max(len(p.factors) for p in parts)
    layers = []
    for j in range(depth):
        blocks = []
        for k in range(nb):
            if k < len(parts) and j < len(parts[k].factors):
                blocks.append(_pad(parts[k].factors[j], parts[k].ancilla_dim, anc_max, sys_dim))
            else:
                blocks.append(_eye(inner))
        layers.append(sp.block_diag(blocks, format="csr"))
    factors = [prep, *layers, prep.conj().T.tocsr()]
    return BlockEncoding(
        factors, nb * anc_max, sys_dim, alpha, tag,
        {"branch": nb, "shared": anc_max, "system": sys_dim},
    )


def _scaled(be: BlockEncoding, alpha: float) -> BlockEncoding:
    """Same unitary, reported with a different α (used for zero blocks)."""
    return BlockEncoding(be.factors, be.ancilla_dim, be.system_dim, alpha, be.target_tag, be.registers)


# ---------------------------------------------------------------- H_f


def _site_h(U: float, mu: float) -> np.ndarray:
    """h(n↑, n↓) on the four states of one site, basis order |n↑ n↓⟩."""
    occ = np.array([(0, 0), (0, 1), (1, 0), (1, 1)], dtype=float)
    return U * (occ[:, 0] - 0.5) * (occ[:, 1] - 0.5) - mu * occ.sum(axis=1)


def _be_fdiag(p: HubbardHolsteinParams, eps: float, variant: str, layout) -> BlockEncoding:
    """Per-site LCU: index over sites, SWUP site i to the front, encode h there."""
    if variant == "printed":
        d_site = abs(p.U) + 2 * abs(p.mu)
    elif variant == "tight":
        d_site = abs(p.U / 4) + abs(2 * p.mu)
    else:
        raise ValueError("variant must be 'printed' or 'tight'")
    dims, modes, _ = _system_dims(p.N, layout)
    sys_dim = int(np.prod(dims))
    h = _site_h(p.U, p.mu)
    # front-site occupation index = top two fermion qubits of the system label
    front = (np.arange(sys_dim) // (sys_dim // 4)).astype(int)
    vals = h[front]
    idx = np.zeros(2 ** index_bits(p.N), dtype=complex)
    idx[: p.N] = 1 / np.sqrt(p.N)
    diag_f, Ms = _diag_factors(vals, eps, d_site)
    inner = 2 * Ms
    prep = _kron(_state_prep(idx), _eye(inner * sys_dim))
    sw = _controlled(_swup_perms(p.N, layout, SwupRegisters.Fermion2), inner_dim=inner)
    factors = [prep, sw] + [_kron(_eye(idx.size), f) for f in diag_f] + [
        sw.conj().T.tocsr(), prep.conj().T.tocsr()
    ]
    return BlockEncoding(
        factors, idx.size * inner, sys_dim, p.N * d_site, "H_f_diag",
        {"index": idx.size, "sample": Ms, "flag": 2, "system": sys_dim},
    )


def be_hf(p: HubbardHolsteinParams, eps: float = 2**-6, variant: str = "printed") -> BlockEncoding:
    """Two-branch LCU of H_f = H_f_hop + H_f_diag on the fermion register.

    ``variant="printed"`` normalises the diagonal branch by |U| + 2|μ| per site,
    giving α_f = N(4 + |U| + 2|μ|); ``"tight"`` uses |U/4| + |2μ|.
    """
    hop = be_hop(p)
    if p.U == 0 and p.mu == 0:
        return hop
    diag = _be_fdiag(p, eps, variant, None)
    out = lcu([hop, diag], "H_f")
    return out


def _hf_target(p: HubbardHolsteinParams) -> np.ndarray:
    lat = FermionLattice(p.N, 2, p.max_dim)
    return lat.hubbard_hopping(bonds(p.N, p.boundary)) + lat.hubbard_diagonal(p.U, p.mu)


# ---------------------------------------------------------------- full H


def _full_layout(p: HubbardHolsteinParams) -> RegisterLayout:
    return RegisterLayout(p.N, p.boson_dim, p.quantisation, max_dim=p.max_dim)


def _lift_to_full(be: BlockEncoding, bdim: int) -> BlockEncoding:
    """Tensor a fermion-only encoding with the identity on the boson registers."""
    factors = []
    for f in be.factors:
        factors.append(_kron(f, _eye(bdim)))
    return BlockEncoding(factors, be.ancilla_dim, be.system_dim * bdim, be.alpha, be.target_tag)


def _conjugated(be: BlockEncoding, w: np.ndarray) -> BlockEncoding:
    """Encoding of W A W† from an encoding of A (W on the system)."""
    wl = _kron(_eye(be.ancilla_dim), w)
    return BlockEncoding(
        [wl.conj().T.tocsr(), *be.factors, wl], be.ancilla_dim, be.system_dim, be.alpha, be.target_tag
    )


def be_full(p: HubbardHolsteinParams, eps: float = 2**-6) -> BlockEncoding:
    """Four-branch LCU over {hop, f-diag, b, fb} for the full Hubbard-Holstein H.

    Boson branches are whole-system diagonal encodings, in the number basis
    (2Q H_b), the eigenbasis of b + b† (2Q H_fb), the grid basis (1Q X² and
    H_fb) or the momentum basis (1Q P²).
    """
    layout = _full_layout(p)
    N, bdim_site = p.N, p.boson_dim
    lat = FermionLattice(N, 2, p.max_dim)
    bdim = bdim_site**N
    sys_dim = lat.dim * bdim
    occ = lat.site_occupations()
    hop = _lift_to_full(be_hop(p), bdim)
    parts = [hop]
    if p.U != 0 or p.mu != 0:
        parts.append(_be_fdiag(p, eps, "printed", layout))
    ferm_idx = np.arange(sys_dim) // bdim
    bos_idx = np.arange(sys_dim) % bdim
    bos_digits = np.array(np.unravel_index(bos_idx, [bdim_site] * N)).T
    nm1 = occ[ferm_idx] - 1
    if p.quantisation is Quantisation.SecondQ:
        n_b = bos_digits.sum(axis=1)
        alpha_b = N * p.omega0 * p.cutoff
        parts.append(be_diagonal(p.omega0 * n_b, sys_dim, eps, d_max=alpha_b))
        if p.g != 0:
            b, bd = ladder_ops(p.cutoff)
            lam, w = np.linalg.eigh(b.matrix + bd.matrix)
            site_norm = float(np.max(np.abs(lam)))
            alpha_fb = N * abs(p.g) * max(math.sqrt(2 * p.cutoff), site_norm)
            vals = p.g * (lam[bos_digits] * nm1).sum(axis=1)
            enc = be_diagonal(vals, sys_dim, eps, allow_negative=True, d_max=alpha_fb)
            wfull = np.kron(np.eye(lat.dim), kron_all([w] * N))
            parts.append(_conjugated(enc, wfull))
    else:
        M = p.cutoff
        x = grid_points(M)
        xx = (x[bos_digits] ** 2).sum(axis=1)
        d_sq = N * p.omega0 * M**2 / 4
        parts.append(be_diagonal(p.omega0 / 2 * xx, sys_dim, eps, d_max=d_sq))
        F = centered_dft(M).matrix
        fful = np.kron(np.eye(lat.dim), kron_all([F] * N))
        parts.append(_conjugated(be_diagonal(p.omega0 / 2 * xx, sys_dim, eps, d_max=d_sq), fful))
        if p.g != 0:
            vals = p.g * np.sqrt(2.0) * (x[bos_digits] * nm1).sum(axis=1)
            alpha_fb = N * abs(p.g) * math.sqrt(2.0) * M
            parts.append(be_diagonal(vals, sys_dim, eps, allow_negative=True, d_max=alpha_fb))
    return lcu(parts, "H")


# ---------------------------------------------------------------- walk


def walk_ingredients(Lambda: int, eps2: float = 1e-3) -> dict:
    """PREP, SELECT, W and α_K for K = i(b − b†)/(2√Λ) on levels 0..Λ−1.

    K = Σ_m c_m i(|m−1⟩⟨m| − |m⟩⟨m−1|), c_m = √m/(2√Λ).  With the cyclic shift
    S|m⟩ = |m−1⟩ and Z_m = I − 2|m⟩⟨m|, each m contributes the unitaries iS and
    −iSZ_m (sign index s) with weight c_m/2 each, plus their adjoints.  A
    Hermitising qubit h makes SELECT = Σ |m,s⟩⟨m,s| ⊗ (|1⟩⟨0|_h⊗U + |0⟩⟨1|_h⊗U†)
    self-inverse, and PREP puts h in |+⟩.  ``eps2`` is the sampling precision of
    the circuit realisation; the amplitudes here are exact.
    """
    if Lambda < 2:
        raise ValueError("Lambda must be at least 2")
    L = Lambda
    c = np.sqrt(np.arange(L)) / (2 * np.sqrt(L))
    alpha = float(2 * c.sum())
    m_dim = 2 ** math.ceil(math.log2(L))
    shift = np.roll(np.eye(L), -1, axis=0).astype(complex)  # S|m⟩ = |m−1 mod Λ⟩
    w = np.zeros(m_dim * 2)
    for m in range(1, L):
        w[2 * m] = w[2 * m + 1] = c[m]
    amps = np.kron(np.sqrt(w / w.sum()), np.ones(2) / np.sqrt(2))
    prep_anc = _state_prep(amps)
    anc = amps.size
    blocks = []
    for m in range(m_dim):
        for s in (0, 1):
            if 1 <= m < L:
                zm = np.eye(L, dtype=complex)
                zm[m, m] = -1
                u = 1j * shift if s == 0 else -1j * shift @ zm
                herm = np.block([[np.zeros((L, L)), u.conj().T], [u, np.zeros((L, L))]])
            else:
                herm = np.eye(2 * L, dtype=complex)
            blocks.append(herm)
    select = sp.block_diag(blocks, format="csr").toarray()
    prep = np.kron(prep_anc, np.eye(L))
    g = np.zeros(anc, dtype=complex)
    g[:] = amps
    proj = np.kron(np.outer(g, g.conj()), np.eye(L))
    walk = (2 * proj - np.eye(anc * L)) @ select
    b, bd = ladder_ops(L - 1)
    K = 1j * (b.matrix - bd.matrix) / (2 * np.sqrt(L))
    return {
        "PREP": Operator(prep),
        "SELECT": Operator(select),
        "W": Operator(walk),
        "alpha_K": alpha,
        "K": Operator(K),
        "ancilla_dim": anc,
        "eps2": eps2,
        "sample_space": sample_space_size(min(eps2, 0.1)),
    }


def walk_block(ingredients: dict) -> np.ndarray:
    """⟨0|PREP† SELECT PREP|0⟩ on the system register."""
    L = ingredients["K"].dim
    prep = ingredients["PREP"].matrix
    sel = ingredients["SELECT"].matrix
    full = prep.conj().T @ sel @ prep
    return full[:L, :L]


def walk_phase_errors(ingredients: dict) -> np.ndarray:
    """|cos θ − λ/α_K| for every eigenpair (λ, u) of K.

    W restricted to span{|G,u⟩, W|G,u⟩} has eigenvalues e^{±iθ}.
    """
    K = ingredients["K"].matrix
    W = ingredients["W"].matrix
    alpha = ingredients["alpha_K"]
    L = K.shape[0]
    prep = ingredients["PREP"].matrix
    lam, vecs = np.linalg.eigh(K)
    errs = []
    for k in range(L):
        e0 = np.zeros(prep.shape[0] // L, dtype=complex)
        e0[0] = 1
        v0 = prep @ np.kron(e0, vecs[:, k])
        v1 = W @ v0
        v1 = v1 - np.vdot(v0, v1) * v0
        if np.linalg.norm(v1) < 1e-12:
            basis = v0[:, None]
        else:
            basis = np.column_stack([v0, v1 / np.linalg.norm(v1)])
        small = basis.conj().T @ W @ basis
        ev = np.linalg.eigvals(small)
        errs.append(float(np.max(np.abs(np.cos(np.angle(ev)) - lam[k] / alpha))))
    return np.array(errs)
