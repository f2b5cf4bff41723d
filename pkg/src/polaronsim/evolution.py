"""Exact and fast-forwarded propagators and the interaction-picture Dyson pipeline.

The pipeline follows the usual three steps: apply the polaron transform,
evolve under H̃ = H̃₀ + Ṽ by alternating exact-or-fast-forwarded H̃₀ steps with
truncated Dyson series for Ṽ in the interaction picture, then undo the
transform.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .models import FermionLattice, HubbardHolsteinParams, boson_site_ops, hh_hamiltonian, hh_layout
from .operators import (
    Operator,
    Quantisation,
    as_matrix,
    centered_dft,
    expm_hermitian,
    grid_points,
    kron_all,
    unitarity_error,
)
from .polaron import build_polaron_hh, conjugate, fermionic_shift_hh, transformed_h0_hh, transformed_v_hh

__all__ = [
    "T0",
    "DysonPlan",
    "exact_evolution",
    "rounding_bits",
    "diagonal_evolution_rounded",
    "qho_factored_evolution",
    "h0_fastforward_hh",
    "dyson_truncation_params",
    "dyson_segment",
    "dyson_segment_oracle",
    "interaction_picture_evolution",
    "InteractionPictureResult",
    "effective_hamiltonian_hh",
    "expectation_pushing_check",
]

T0 = 0.7
HERMITIAN_TOL = 1e-10
MAX_SIMPLEX_TERMS = 10**6


def _check_hermitian(h: np.ndarray) -> None:
    dev = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if dev > HERMITIAN_TOL:
        raise ValueError(f"Hamiltonian is not Hermitian (deviation {dev:.3e})")


def exact_evolution(H, t: float) -> Operator:
    """e^{-iHt} by eigendecomposition."""
    h = as_matrix(H)
    _check_hermitian(h)
    layout = H.layout if isinstance(H, Operator) else None
    if t == 0:
        return Operator(np.eye(h.shape[0], dtype=complex), layout)
    return Operator(expm_hermitian(h, t), layout)


def rounding_bits(t: float, eps: float) -> int:
    """k = ceil(log2(1.053 |t| / eps)), clamped at zero."""
    if not 0 < eps <= 0.1:
        raise ValueError("eps must lie in (0, 0.1]")
    if t == 0:
        return 0
    return max(0, math.ceil(math.log2(1.053 * abs(t) / eps)))


def diagonal_evolution_rounded(d, dim: int, t: float, eps: float) -> Operator:
    """diag(exp(-i round_k(d(x)) t)) with d(x) floored to k binary fraction bits.

    ``d`` is either a callable on the index array ``0..dim-1`` or an array of
    length ``dim``.  The phase error per entry is at most |t| 2^-k < eps.
    """
    k = rounding_bits(t, eps)
    values = d(np.arange(dim)) if callable(d) else np.asarray(d, dtype=float)
    values = np.broadcast_to(np.asarray(values, dtype=float), (dim,))
    if not np.all(np.isfinite(values)):
        raise ValueError("diagonal values must be finite")
    rounded = np.floor(values * 2.0**k) / 2.0**k
    return Operator(np.diag(np.exp(-1j * rounded * t)))


def _p2_phase(M: int, s: float) -> np.ndarray:
    # e^{-i s P²} = F diag(e^{-i s x²}) F†
    F = centered_dft(M).matrix
    return (F * np.exp(-1j * s * grid_points(M) ** 2)) @ F.conj().T


def _x2_phase(M: int, s: float) -> np.ndarray:
    return np.diag(np.exp(-1j * s * grid_points(M) ** 2))


def qho_factored_evolution(M: int, tau: float, omega0: float = 1.0) -> Operator:
    """Five-factor product for exp(-i (X² + P²) ω₀τ/2).

    With s = ω₀τ the factors are e^{-iaP²} e^{-ibX²} e^{-2iaP²} e^{-ibX²} e^{-iaP²}
    with a = tan(s/4)/2 and b = sin(s/2)/2.  Valid for |ω₀τ| < π.
    """
    s = omega0 * tau
    if abs(s) >= np.pi:
        raise ValueError(
            f"|omega0 * tau| = {abs(s):.4g} >= pi; split tau into shorter steps"
        )
    if s == 0:
        return Operator(np.eye(M, dtype=complex))
    a = np.tan(s / 4) / 2
    b = np.sin(s / 2) / 2
    pa, xb = _p2_phase(M, a), _x2_phase(M, b)
    u = pa @ xb @ _p2_phase(M, 2 * a) @ xb @ pa
    return Operator(u)


def _fermion_diag_hh(p: HubbardHolsteinParams) -> np.ndarray:
    """Diagonal of H̃_f^diag = Hubbard diagonal + polaron shift on the fermion basis."""
    lat = FermionLattice(p.N, 2, p.max_dim)
    return np.real(np.diag(lat.hubbard_diagonal(p.U, p.mu))) + fermionic_shift_hh(p)


def h0_fastforward_hh(p: HubbardHolsteinParams, tau: float, eps_diag: float = 1e-6) -> Operator:
    """Fast-forwarded e^{-iH̃₀τ} in first quantisation.

    Per-site five-factor oscillator evolutions times a k-bit rounded diagonal
    phase on the fermions.  When |ω₀τ| ≥ π the oscillator part is applied as
    2^j equal sub-steps.
    """
    if p.quantisation is not Quantisation.FirstQ:
        raise ValueError("h0_fastforward_hh needs FirstQ parameters")
    layout = hh_layout(p)
    pieces = 1
    while abs(p.omega0 * tau / pieces) >= np.pi:
        pieces *= 2
    site = qho_factored_evolution(p.cutoff, tau / pieces, p.omega0).matrix
    if pieces > 1:
        site = np.linalg.matrix_power(site, pieces)
    bos = kron_all([site] * p.N)
    fdiag = _fermion_diag_hh(p)
    ferm = diagonal_evolution_rounded(fdiag, fdiag.size, tau, eps_diag).matrix
    return Operator(np.kron(ferm, bos), layout)


@dataclass(frozen=True)
class DysonPlan:
    r: int
    K: int
    L: int
    t0: float
    dt: float
    eps_budget: float
    split: tuple[float, float, float]

    def __post_init__(self):
        if self.r < 1 or self.K < 1 or self.L < 2:
            raise ValueError("plan needs r >= 1, K >= 1, L >= 2")
        if abs(sum(self.split) - 1) > 1e-12:
            raise ValueError("split fractions must sum to 1")

    @property
    def t(self) -> float:
        return self.r * self.dt


def dyson_truncation_params(
    t: float,
    eps: float,
    V_norm: float,
    dVdt_bound: float | None = None,
    h0_norm: float | None = None,
    split: Sequence[float] = (0.5, 0.5, 0.0),
) -> DysonPlan:
    """Choose (r, K, L) for total error eps.

    r = ceil(‖V‖t/t₀); K is the smallest k with 2 t₀^{k+1}/(k+1)! ≤ ε_K/r;
    L = ceil((t/r)² max‖dV/ds‖ / (ε_L/r)), where ε_K, ε_L are the first two
    split fractions of eps.  ``dVdt_bound`` defaults to 2‖H₀‖‖V‖.
    """
    if t <= 0 or V_norm <= 0:
        raise ValueError("t and V_norm must be positive")
    if not 0 < eps <= 0.1:
        raise ValueError("eps must lie in (0, 0.1]")
    split = tuple(float(x) for x in split)
    if len(split) != 3 or min(split[:2]) <= 0 or min(split) < 0:
        raise ValueError("split needs positive Dyson and grid fractions")
    if dVdt_bound is None:
        if h0_norm is None:
            raise ValueError("give dVdt_bound or h0_norm")
        dVdt_bound = 2 * h0_norm * V_norm
    if dVdt_bound < 0:
        raise ValueError("dVdt_bound must be nonnegative")
    r = max(1, math.ceil(V_norm * t / T0 - 1e-12))
    eps_k = split[0] * eps / r
    K = 1
    while 2 * T0 ** (K + 1) / math.factorial(K + 1) > eps_k:
        K += 1
    eps_l = split[1] * eps / r
    L = max(2, math.ceil((t / r) ** 2 * dVdt_bound / eps_l))
    return DysonPlan(r, K, L, T0, t / r, eps, split)


def _ordered_sum(v_at: Callable[[int], np.ndarray], dim: int, dt: float, K: int, L: int) -> np.ndarray:
    """Σ_k (-iδ)^k Σ_{l₁≤…≤l_k} V_{l_k}…V_{l₁} with δ = dt/L, by recursion over l."""
    delta = dt / L
    terms = [np.eye(dim, dtype=complex)] + [np.zeros((dim, dim), dtype=complex) for _ in range(K)]
    for l in range(L):
        v = v_at(l)
        # ascending k so T_{k-1} already contains terms ending at this same l
        for k in range(1, K + 1):
            terms[k] += (-1j * delta) * (v @ terms[k - 1])
    return sum(terms)


def dyson_segment(H0_evolution, V, dt: float, K: int, L: int, max_terms: int = MAX_SIMPLEX_TERMS) -> Operator:
    """Left-endpoint, weakly ordered Dyson sum for 𝒯exp(-i∫₀^dt V(s)ds).

    ``H0_evolution`` maps s to e^{-iH₀s}, or is a 1-d array of H₀ eigenvalues
    when V is already written in the H₀ eigenbasis.  V(s) = e^{iH₀s} V e^{-iH₀s}.
    """
    v = as_matrix(V)
    layout = V.layout if isinstance(V, Operator) else None
    if dt <= 0:
        raise ValueError("dt must be positive")
    if K < 0 or L < 1:
        raise ValueError("need K >= 0 and L >= 1")
    if K * L > max_terms:
        raise ValueError(f"K*L = {K * L} exceeds the simplex-term cap {max_terms}")
    dim = v.shape[0]
    if K == 0 or not np.any(v):
        return Operator(np.eye(dim, dtype=complex), layout)
    if isinstance(H0_evolution, np.ndarray) and H0_evolution.ndim == 1:
        return Operator(_diag_segment(H0_evolution, v, dt, K, L), layout)
    delta = dt / L

    def v_at(l):
        u0 = as_matrix(H0_evolution(l * delta))
        return u0.conj().T @ v @ u0

    return Operator(_ordered_sum(v_at, dim, dt, K, L), layout)


def _blocks(v: np.ndarray) -> list[np.ndarray]:
    n, labels = connected_components(csr_matrix(np.abs(v) > 0), directed=False)
    return [np.flatnonzero(labels == c) for c in range(n)]


def _diag_segment(energies: np.ndarray, v: np.ndarray, dt: float, K: int, L: int) -> np.ndarray:
    dim = v.shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    delta = dt / L
    for idx in _blocks(v):
        e = energies[idx]
        vb = v[np.ix_(idx, idx)]
        gap = np.subtract.outer(e, e)
        out[np.ix_(idx, idx)] = _ordered_sum(
            lambda l: np.exp(1j * gap * l * delta) * vb, idx.size, dt, K, L
        )
    return out


def dyson_segment_oracle(H0_evolution, V, dt: float, steps: int = 1000) -> Operator:
    """Time-ordered product of midpoint exponentials exp(-i h V(s_mid))."""
    v = as_matrix(V)
    dim = v.shape[0]
    h = dt / steps
    u = np.eye(dim, dtype=complex)
    if isinstance(H0_evolution, np.ndarray) and H0_evolution.ndim == 1:
        gap = np.subtract.outer(H0_evolution, H0_evolution)
        for idx in _blocks(v):
            gb = gap[np.ix_(idx, idx)]
            vb = v[np.ix_(idx, idx)]
            ub = np.eye(idx.size, dtype=complex)
            for j in range(steps):
                ub = expm_hermitian(np.exp(1j * gb * (j + 0.5) * h) * vb, h) @ ub
            u[np.ix_(idx, idx)] = ub
        return Operator(u)
    for j in range(steps):
        u0 = as_matrix(H0_evolution((j + 0.5) * h))
        u = expm_hermitian(u0.conj().T @ v @ u0, h) @ u
    return Operator(u)


def _h0_eigenbasis(p: HubbardHolsteinParams):
    """(energies, basis) with H̃₀ = basis diag(energies) basis†; basis None means identity."""
    fdiag = _fermion_diag_hh(p)
    if p.quantisation is Quantisation.SecondQ:
        site_e = p.omega0 * np.arange(p.cutoff + 1, dtype=float)
        basis = None
    else:
        hb, _ = boson_site_ops(p.quantisation, p.cutoff, p.omega0)
        site_e, w = np.linalg.eigh(hb)
        basis = np.kron(np.eye(fdiag.size), kron_all([w] * p.N))
    bos_e = site_e
    for _ in range(p.N - 1):
        bos_e = np.add.outer(bos_e, site_e).ravel()
    energies = np.add.outer(fdiag, bos_e).ravel()
    return energies, basis


def _transformed_v(p: HubbardHolsteinParams, d: Operator) -> np.ndarray:
    if p.quantisation is Quantisation.FirstQ:
        return transformed_v_hh(p).matrix
    return conjugate(hh_hamiltonian(p)["H_f_hop"], d).matrix


def effective_hamiltonian_hh(p: HubbardHolsteinParams) -> Operator:
    """D†(H̃₀ + Ṽ)D: the Hamiltonian the pipeline simulates exactly in the ε → 0 limit.

    It equals the lattice Hamiltonian up to the bosonic truncation residual
    of the polaron transform.
    """
    d = build_polaron_hh(p).unitary
    h = transformed_h0_hh(p).matrix + _transformed_v(p, d)
    u = d.matrix
    out = u.conj().T @ h @ u
    return Operator((out + out.conj().T) / 2, d.layout, hermitian_hint=True)


@dataclass(frozen=True, eq=False)
class InteractionPictureResult:
    propagator: Operator
    plan: DysonPlan | None
    max_segment_unitarity_error: float


_DEFAULT_SPLIT = {
    Quantisation.SecondQ: (0.5, 0.5, 0.0),
    Quantisation.FirstQ: (0.45, 0.45, 0.1),
}


def interaction_picture_evolution(
    p: HubbardHolsteinParams,
    t: float,
    eps: float,
    h0_method: str = "auto",
    split: Sequence[float] | None = None,
    return_details: bool = False,
    plan: DysonPlan | None = None,
):
    """Approximate e^{-iHt} as D† Π_segments [e^{-iH̃₀Δt} U_seg] D.

    ``h0_method`` is "auto" (five-factor fast-forward in FirstQ, exact
    diagonal phases in SecondQ) or "exact" (eigendecomposition of H̃₀).
    A supplied ``plan`` fixes Δt, K and L; |t|/Δt must then be an integer.
    """
    layout = hh_layout(p)
    if t == 0:
        res = Operator(np.eye(layout.total_dim, dtype=complex), layout)
        return InteractionPictureResult(res, None, 0.0) if return_details else res
    if h0_method not in ("auto", "exact"):
        raise ValueError("h0_method must be 'auto' or 'exact'")
    split = tuple(split) if split is not None else _DEFAULT_SPLIT[p.quantisation]
    d = build_polaron_hh(p).unitary
    v = _transformed_v(p, d)
    energies, basis = _h0_eigenbasis(p)
    v_eig = v if basis is None else basis.conj().T @ v @ basis
    v_norm = float(np.linalg.norm(v, 2))
    ident = np.eye(layout.total_dim, dtype=complex)
    if v_norm == 0:
        seg, plan, dt, r = ident, None, abs(t), 1
    else:
        # ‖dV/ds‖ = ‖[H̃₀, V(s)]‖ does not depend on s
        if plan is None:
            comm = np.subtract.outer(energies, energies) * v_eig
            plan = dyson_truncation_params(
                abs(t), eps, v_norm, dVdt_bound=float(np.linalg.norm(comm, 2)), split=split
            )
            dt, r = plan.dt, plan.r
        else:
            dt = plan.dt
            r = int(round(abs(t) / dt))
            if r < 1 or abs(r * dt - abs(t)) > 1e-9 * max(1.0, abs(t)):
                raise ValueError("|t| must be a positive integer multiple of plan.dt")
            plan = dataclasses.replace(plan, r=r)
        sgn = np.sign(t)
        seg = _diag_segment(sgn * energies, sgn * v_eig, dt, plan.K, plan.L)
        if basis is not None:
            seg = basis @ seg @ basis.conj().T
    sgn = np.sign(t)
    if p.quantisation is Quantisation.FirstQ and h0_method == "auto":
        eps_diag = max(min(split[2] * eps / r, 0.1), 1e-12) if split[2] > 0 else 1e-12
        u0 = h0_fastforward_hh(p, sgn * dt, eps_diag).matrix
    else:
        phases = np.exp(-1j * energies * sgn * dt)
        u0 = phases[:, None] * ident if basis is None else (basis * phases) @ basis.conj().T
    step = u0 @ seg
    total = np.linalg.matrix_power(step, r)
    u = d.matrix
    res = Operator(u.conj().T @ total @ u, layout)
    if return_details:
        return InteractionPictureResult(res, plan, unitarity_error(seg))
    return res


def expectation_pushing_check(p: HubbardHolsteinParams, t: float, state, O) -> tuple[float, float]:
    """Both sides of ⟨ψ|e^{iHt} O e^{-iHt}|ψ⟩ = ⟨ψ|D† e^{iH̃t} Õ e^{-iH̃t} D|ψ⟩.

    Here H̃ = D H D† and Õ = D O D†, evaluated with exact propagators.
    """
    blocks = hh_hamiltonian(p)
    h = sum(b.matrix for b in blocks.values())
    psi = np.asarray(state, dtype=complex).ravel()
    o = as_matrix(O)
    if psi.size != h.shape[0] or o.shape != h.shape:
        raise ValueError("state and observable must match the model dimension")
    _check_hermitian(o)
    psi = psi / np.linalg.norm(psi)
    d = build_polaron_hh(p).unitary
    u = exact_evolution(h, t).matrix
    lhs = np.vdot(u @ psi, o @ (u @ psi)).real
    h_t = conjugate(h, d).matrix
    o_t = conjugate(o, d).matrix
    ut = exact_evolution((h_t + h_t.conj().T) / 2, t).matrix
    phi = ut @ (d.matrix @ psi)
    rhs = np.vdot(phi, o_t @ phi).real
    return float(lhs), float(rhs)
