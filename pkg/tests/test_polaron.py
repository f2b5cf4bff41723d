import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polaronsim.models import (
    DickeParams,
    FermionLattice,
    FrohlichParams,
    HubbardHolsteinParams,
    SSHParams,
    dicke_hamiltonian,
    frohlich_hamiltonian,
    hh_hamiltonian,
    kappa_kernel,
    ring_hopping_matrix,
)
from polaronsim.operators import Quantisation, displacement_1q, displacement_2q, unitarity_error
from polaronsim.polaron import (
    build_polaron_dicke,
    build_polaron_frohlich,
    build_polaron_hh,
    build_ssh_transforms,
    conjugate,
    diagonalization_residual,
    diagonalization_residual_dense,
    fermionic_shift_hh,
    hh_alpha,
    ssh_momentum_weights,
    transformed_h0_hh,
    transformed_v_hh,
)

Q1, Q2 = Quantisation.FirstQ, Quantisation.SecondQ


def comm_dev(a, b):
    return np.max(np.abs(a @ b - b @ a))


def hh(**kw):
    base = dict(N=1, g=1.0, omega0=1.0, cutoff=8, quantisation=Q1)
    base.update(kw)
    return HubbardHolsteinParams(**base)


def test_hh_alpha_table():
    assert hh_alpha(1, 0.7, 1.3, Q1) == 0
    assert hh_alpha(1, 0.7, 1.3, Q2) == 0
    assert np.isclose(hh_alpha(2, 1.0, 2.0, Q1), np.sqrt(2) / 2)
    assert hh_alpha(0, 3.0, 1.0, Q2) == -3.0
    with pytest.raises(ValueError):
        hh_alpha(3, 1.0, 1.0, Q1)
    with pytest.raises(ValueError):
        hh_alpha(1, 1.0, 0.0, Q1)


def test_polaron_hh_trivial_cases():
    assert np.allclose(build_polaron_hh(hh(g=0.0)).unitary.matrix, np.eye(32))
    d = build_polaron_hh(hh(cutoff=8)).unitary.matrix
    # basis states 01 and 10 of the single site have n = 1
    for f in (1, 2):
        assert np.allclose(d[f * 8:(f + 1) * 8, f * 8:(f + 1) * 8], np.eye(8))


def test_polaron_hh_site_factorisation():
    p1 = hh(g=0.6)
    d1 = build_polaron_hh(p1).unitary.matrix
    d2 = build_polaron_hh(hh(N=2, g=0.6)).unitary.matrix
    # reorder (f1 b1) ⊗ (f2 b2) into (f1 f2 b1 b2)
    prod = np.kron(d1, d1).reshape([4, 8, 4, 8] * 2)
    prod = prod.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(d2.shape)
    assert np.max(np.abs(prod - d2)) <= 1e-12


@pytest.mark.parametrize("quant,cutoff", [(Q1, 8), (Q2, 5)])
def test_polaron_hh_invariants(quant, cutoff):
    p = hh(N=2, g=0.8, U=0.7, mu=0.2, cutoff=cutoff, quantisation=quant)
    d = build_polaron_hh(p).unitary.matrix
    assert unitarity_error(d) <= 1e-12
    lat = FermionLattice(2)
    nb = (cutoff if quant is Q1 else cutoff + 1) ** 2
    for i in range(2):
        assert comm_dev(d, np.kron(lat.number(i), np.eye(nb))) <= 1e-12
    shift = np.kron(np.diag(fermionic_shift_hh(p)), np.eye(nb))
    assert comm_dev(d, shift) <= 1e-12
    assert comm_dev(d, hh_hamiltonian(p)["H_f_diag"].matrix) <= 1e-12


def test_polaron_hh_alpha_table_entries():
    t = build_polaron_hh(hh(N=2, g=0.5, omega0=2.0, quantisation=Q2, cutoff=3)).alpha_table
    assert t[(2, 0)] == (0.25, -0.25)
    assert t[(1, 1)] == (0.0, 0.0)


def test_dicke_transform():
    assert np.allclose(build_polaron_dicke(DickeParams(N=2, g=0.0, Lambda=4)).unitary.matrix, np.eye(20))
    g, w, L = 0.7, 1.3, 6
    d = build_polaron_dicke(DickeParams(N=1, g=g, omega0=w, Lambda=L)).unitary.matrix
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    ref = sum(
        np.kron(np.outer(v, v), displacement_2q(L, s * g / w).matrix)
        for s, v in ((1, plus), (-1, minus))
    )
    assert np.max(np.abs(d - ref)) <= 1e-10


def test_dicke_transform_commutes_with_sx():
    p = DickeParams(N=2, g=0.5, Lambda=4)
    d = build_polaron_dicke(p).unitary.matrix
    x = np.array([[0, 1], [1, 0]])
    sx = np.kron(np.kron(x, np.eye(2)) + np.kron(np.eye(2), x), np.eye(5))
    assert unitarity_error(d) <= 1e-12
    assert comm_dev(d, sx) <= 1e-12


def test_dicke_residual_decreases():
    res = []
    for L in (8, 16, 32):
        p = DickeParams(N=2, g=0.5, Lambda=L)
        blocks = dicke_hamiltonian(p)
        d = build_polaron_dicke(p).unitary.matrix
        x = np.array([[0, 1], [1, 0]])
        sx = np.kron(x, np.eye(2)) + np.kron(np.eye(2), x)
        lhs = d @ (blocks["H_b"].matrix + blocks["H_fb"].matrix) @ d.conj().T
        target = blocks["H_b"].matrix - (p.g**2 / p.omega0) * np.kron(sx @ sx, np.eye(L + 1))
        keep = np.kron(np.ones(4), np.arange(L + 1) < (L + 1) // 4).astype(bool)
        diff = (lhs - target)[np.ix_(keep, keep)]
        res.append(np.linalg.norm(diff, 2))
    assert res[0] > res[1] > res[2]


def test_frohlich_transform_configurations():
    p = FrohlichParams(N=2, kappa=0.9, cutoff=3)
    t = build_polaron_frohlich(p)
    assert np.isclose(t.alpha_table[(2, 0)][0], 0.9 - 0.9 / 2**1.5)
    assert np.isclose(t.alpha_table[(2, 0)][0], kappa_kernel(0, 0.9) - kappa_kernel(1, 0.9))
    d = t.unitary.matrix
    nb = 16
    # every basis state with both sites singly occupied
    lat = FermionLattice(2)
    for f, occ in enumerate(lat.site_occupations()):
        if tuple(occ) == (1, 1):
            assert np.allclose(d[f * nb:(f + 1) * nb, f * nb:(f + 1) * nb], np.eye(nb))
    assert unitarity_error(d) <= 1e-12


@pytest.mark.parametrize("quant,cutoff", [(Q1, 4), (Q2, 3)])
def test_frohlich_delta_kernel_matches_holstein(quant, cutoff):
    g = 0.6
    f = [[[g if i == j else 0.0] for j in range(2)] for i in range(2)]
    a = build_polaron_frohlich(FrohlichParams(N=2, f=f, cutoff=cutoff, quantisation=quant))
    b = build_polaron_hh(hh(N=2, g=g, cutoff=cutoff, quantisation=quant))
    assert np.array_equal(a.unitary.matrix, b.unitary.matrix)


def test_frohlich_ground_energy_approaches_shift():
    # configuration (n1, n2) = (2, 0) of a two-site chain
    errs = []
    for L in (4, 8, 16):
        p = FrohlichParams(N=2, kappa=0.8, cutoff=L)
        blocks = frohlich_hamiltonian(p)
        alphas = np.array(build_polaron_frohlich(p).alpha_table[(2, 0)])
        h = blocks["H_b"].matrix + blocks["H_fb"].matrix
        lat = FermionLattice(2)
        f = next(i for i, o in enumerate(lat.site_occupations()) if tuple(o) == (2, 0))
        nb = (L + 1) ** 2
        e0 = np.linalg.eigvalsh(h[f * nb:(f + 1) * nb, f * nb:(f + 1) * nb])[0]
        errs.append(abs(e0 + np.sum(alphas**2)))
    assert errs[0] > errs[1] > errs[2]


def test_ssh_single_site_and_unitarity():
    s, d = build_ssh_transforms(SSHParams(N=1, g=0.4, Lambda=3))
    assert np.allclose(s.matrix, np.eye(s.dim))
    s, d = build_ssh_transforms(SSHParams(N=3, g=0.4, Lambda=2))
    assert unitarity_error(s) <= 1e-12
    assert unitarity_error(d.unitary) <= 1e-12


def test_ssh_fourier_diagonalises_hopping():
    p = SSHParams(N=3, Lambda=1)
    s, w = ssh_momentum_weights(p)
    t = ring_hopping_matrix(FermionLattice(3))
    m = s.conj().T @ t @ s
    assert np.max(np.abs(m - np.diag(np.diag(m)))) <= 1e-10
    assert np.allclose(np.diag(m).real, w)


def test_ssh_polaron_commutes_with_momentum_number():
    p = SSHParams(N=3, g=0.5, Lambda=2)
    _, d = build_ssh_transforms(p)
    _, w = ssh_momentum_weights(p)
    wd = np.kron(np.diag(w), np.eye(3))
    assert comm_dev(d.unitary.matrix, wd) <= 1e-12


def test_conjugate_basics():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    a = a + a.conj().T
    assert np.allclose(conjugate(a, np.eye(6)).matrix, a)
    with pytest.raises(ValueError):
        conjugate(a, np.eye(5))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 8))
def test_conjugate_preserves_spectrum_and_inverts(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    a = a + a.conj().T
    u, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    c = conjugate(a, u).matrix
    assert np.allclose(np.linalg.eigvalsh(c), np.linalg.eigvalsh(a), atol=1e-10)
    back = conjugate(c, u.conj().T).matrix
    assert np.max(np.abs(back - a)) <= 1e-12


def test_transformed_h0_sector_shifts():
    g, w, U, mu = 0.6, 1.5, 0.8, 0.3
    p = hh(g=g, omega0=w, U=U, mu=mu, cutoff=3, quantisation=Q2)
    h = transformed_h0_hh(p).matrix
    hb = hh_hamiltonian(p)["H_b"].matrix
    shift = np.diag(h - hb).real.reshape(4, 4)[:, 0]
    assert np.isclose(shift[3], U / 4 - 2 * mu - g**2 / w)
    assert np.isclose(shift[1], -U / 4 - mu)
    assert np.isclose(shift[0], U / 4 - g**2 / w)
    p0 = hh(g=0.0, U=U, mu=mu, cutoff=3, quantisation=Q2)
    blocks = hh_hamiltonian(p0)
    assert np.array_equal(transformed_h0_hh(p0).matrix, blocks["H_b"].matrix + blocks["H_f_diag"].matrix)


def test_transformed_v_trivial_and_hermitian():
    p0 = hh(N=2, g=0.0, cutoff=4)
    assert np.array_equal(transformed_v_hh(p0).matrix, hh_hamiltonian(p0)["H_f_hop"].matrix)
    v = transformed_v_hh(hh(N=2, g=0.9, cutoff=4)).matrix
    assert np.max(np.abs(v - v.conj().T)) <= 1e-12
    with pytest.raises(ValueError):
        transformed_v_hh(hh(N=2, cutoff=3, quantisation=Q2))


@pytest.mark.parametrize("M", [4, 8])
@pytest.mark.parametrize("g", [0.3, 1.0])
def test_conjugation_identity(M, g):
    p = hh(N=2, g=g, cutoff=M)
    d = build_polaron_hh(p).unitary
    lhs = conjugate(hh_hamiltonian(p)["H_f_hop"], d).matrix
    assert np.max(np.abs(lhs - transformed_v_hh(p).matrix)) <= 1e-10


def test_transformed_v_phase_factors():
    # single bond, one hopping direction picks up e^{-ia(P_0 - P_1)}
    p = hh(N=2, g=0.5, cutoff=4)
    a = np.sqrt(2) * 0.5
    v = transformed_v_hh(p).matrix
    lat = FermionLattice(2)
    hop = lat.c[lat.mode(0, 0)].conj().T @ lat.c[lat.mode(1, 0)]
    phase = np.kron(displacement_1q(4, a).matrix, displacement_1q(4, -a).matrix)
    # project onto the spin-up hop channel via the fermion matrix element
    i, j = np.argwhere(np.abs(hop) > 0)[0]
    blk = v[i * 16:(i + 1) * 16, j * 16:(j + 1) * 16]
    assert np.allclose(blk, -hop[i, j] * phase)


@pytest.mark.parametrize("quant", [Q1, Q2])
def test_residual_zero_coupling(quant):
    assert diagonalization_residual(hh(g=0.0, cutoff=8, quantisation=quant)) <= 1e-12


@pytest.mark.parametrize(
    "p",
    [
        HubbardHolsteinParams(N=1, g=1.0, cutoff=8, quantisation=Q1),
        HubbardHolsteinParams(N=1, g=1.0, cutoff=8, quantisation=Q2),
        DickeParams(N=2, g=0.5, Lambda=8),
        FrohlichParams(N=2, kappa=1.0, cutoff=4),
        SSHParams(N=2, g=0.5, Lambda=8),
    ],
    ids=["hh1q", "hh2q", "dicke", "frohlich", "ssh"],
)
def test_residual_matches_dense(p):
    a = diagonalization_residual(p)
    b = diagonalization_residual_dense(p)
    assert abs(a - b) <= 1e-10 * max(1.0, b)


def test_residual_high_precision_agrees():
    p = HubbardHolsteinParams(N=1, g=1.0, cutoff=8, quantisation=Q2)
    assert abs(diagonalization_residual(p) - diagonalization_residual(p, dps=40)) <= 1e-12


def test_residual_low_fraction_bounds():
    with pytest.raises(ValueError):
        diagonalization_residual(hh(), low_fraction=0.5)
    with pytest.raises(ValueError):
        diagonalization_residual(hh(), low_fraction=0.0)


def test_displaced_spectrum_zero_sector():
    g, w, L = 0.5, 1.0, 64
    p = HubbardHolsteinParams(N=1, g=g, omega0=w, cutoff=L, quantisation=Q2)
    blocks = hh_hamiltonian(p)
    h = (blocks["H_b"].matrix + blocks["H_fb"].matrix)[: L + 1, : L + 1]
    ev = np.linalg.eigvalsh(h)[:5]
    assert np.max(np.abs(ev - (w * np.arange(5) - g**2 / w))) <= 1e-6
