import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from polaronsim.models import boson_site_ops
from polaronsim.operators import (
    DimensionCapError,
    Operator,
    Quantisation,
    RegisterLayout,
    centered_dft,
    displacement_1q,
    displacement_2q,
    hermite_basis,
    hermite_state,
    jw_fermion_ops,
    ladder_ops,
    momentum_op,
    position_op,
    qht,
    unitarity_error,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0])


def test_layout_dimension_and_cap():
    lay = RegisterLayout(2, 4)
    assert lay.total_dim == 4**2 * 4**2
    with pytest.raises(DimensionCapError):
        RegisterLayout(3, 16)
    assert RegisterLayout(3, 16, max_dim=2**20).total_dim == 4**3 * 16**3


def test_layout_rejects_bad_boson_dim():
    with pytest.raises(ValueError):
        RegisterLayout(1, 1)
    with pytest.raises(ValueError):
        RegisterLayout(1, 5, Quantisation.FirstQ)


def test_operator_hermitian_hint_checked():
    with pytest.raises(ValueError):
        Operator(np.array([[0, 1], [0, 0]], dtype=complex), hermitian_hint=True)
    with pytest.raises(ValueError):
        Operator(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        Operator(np.eye(3), layout=RegisterLayout(1, 2))


def test_position_small_grids():
    assert np.allclose(np.diag(position_op(2).matrix), [-np.sqrt(np.pi), 0])
    s = np.sqrt(np.pi / 2)
    assert np.allclose(np.diag(position_op(4).matrix), [-2 * s, -s, 0, s])
    assert position_op(4).hermitian_hint


@pytest.mark.parametrize("M", [2, 6, 10, 64])
def test_position_trace(M):
    assert np.isclose(np.trace(position_op(M).matrix).real, -(M / 2) * np.sqrt(2 * np.pi / M))


@pytest.mark.parametrize("M", [0, 3, -2, 7])
def test_grid_rejects_bad_sizes(M):
    with pytest.raises(ValueError):
        position_op(M)
    with pytest.raises(ValueError):
        centered_dft(M)


def test_dft_m2_and_zero_column():
    assert np.allclose(centered_dft(2).matrix, np.array([[-1, 1], [1, 1]]) / np.sqrt(2))
    for M in (4, 8, 16):
        F = centered_dft(M).matrix
        assert np.allclose(F[:, M // 2], 1 / np.sqrt(M))


@pytest.mark.parametrize("M", [2, 64, 1024])
def test_dft_unitary(M):
    assert unitarity_error(centered_dft(M)) <= 1e-12


def test_momentum_m2_explicit():
    h = np.sqrt(np.pi) / 2
    assert np.allclose(momentum_op(2).matrix, [[-h, h], [h, -h]])


@pytest.mark.parametrize("M", [4, 8, 32])
def test_momentum_position_same_spectrum(M):
    a = np.sort(np.linalg.eigvalsh(momentum_op(M).matrix))
    b = np.sort(np.diag(position_op(M).matrix).real)
    assert np.max(np.abs(a - b)) <= 1e-10


def test_canonical_commutator_converges():
    devs = []
    for M in (8, 16, 32, 64):
        x, p = position_op(M).matrix, momentum_op(M).matrix
        psi = hermite_state(M, 0)
        psi = psi / np.linalg.norm(psi)
        devs.append(abs(np.vdot(psi, (x @ p - p @ x) @ psi) - 1j))
    assert devs[0] > devs[1] > devs[2]
    # double-precision floor from M=32 on
    assert max(devs[2:]) < 1e-13


def test_ladder_basics():
    b, bd = ladder_ops(4)
    assert np.allclose(b.matrix[:, 0], 0)
    assert np.allclose(bd.matrix @ b.matrix, np.diag(np.arange(5)))
    target = np.eye(5)
    target[4, 4] -= 5
    assert np.allclose(b.matrix @ bd.matrix - bd.matrix @ b.matrix, target)
    with pytest.raises(ValueError):
        ladder_ops(0)


def test_hermite_norm_and_orthogonality():
    assert abs(np.linalg.norm(hermite_state(32, 0)) - 1) <= 1e-6
    assert abs(np.vdot(hermite_state(32, 0), hermite_state(32, 1))) <= 1e-8
    with pytest.raises(ValueError):
        hermite_state(16, 5)
    with pytest.raises(ValueError):
        hermite_basis(16, 5)


def test_hermite_basis_norms_m32():
    hb = hermite_basis(32, 8)
    assert hb.m_max == 8
    for s in hb.states:
        assert abs(np.linalg.norm(s) - 1) <= 1e-6


@pytest.mark.parametrize("m", [0, 1, 2])
def test_hermite_eigen_residual_decreasing(m):
    res = []
    for M in (16, 32, 64):
        hb, _ = boson_site_ops(Quantisation.FirstQ, M, 1.0)
        psi = hermite_state(M, m)
        res.append(np.linalg.norm(hb @ psi - (m + 0.5) * psi))
    assert res[0] > res[1] > res[2]


def test_jw_car_algebra():
    c = [op.matrix for op in jw_fermion_ops(4)]
    dev = 0.0
    for j in range(4):
        assert not np.any(c[j] @ c[j])
        for k in range(4):
            anti = c[j] @ c[k].conj().T + c[k].conj().T @ c[j]
            dev = max(dev, np.max(np.abs(anti - (j == k) * np.eye(16))))
            dev = max(dev, np.max(np.abs(c[j] @ c[k] + c[k] @ c[j])))
    assert dev <= 1e-12


def test_jw_hopping_pauli_form():
    c1, c2 = (op.matrix for op in jw_fermion_ops(2))
    hop = c1.conj().T @ c2 + c2.conj().T @ c1
    # (X-iY)/2 ⊗ (X+iY)/2 plus its adjoint
    a = np.kron((X - 1j * Y) / 2, (X + 1j * Y) / 2)
    assert np.allclose(hop, a + a.conj().T)
    assert np.allclose(hop, 0.5 * (np.kron(X, X) + np.kron(Y, Y)))


def test_jw_cap():
    with pytest.raises(DimensionCapError):
        jw_fermion_ops(15)


def test_displacement_1q_basics():
    assert np.allclose(displacement_1q(16, 0.0).matrix, np.eye(16))
    d, dm = displacement_1q(16, 0.7).matrix, displacement_1q(16, -0.7).matrix
    assert np.max(np.abs(d @ dm - np.eye(16))) <= 1e-12


def test_displacement_1q_shifts_position():
    M, a = 32, 0.5
    d = displacement_1q(M, a).matrix
    psi = hermite_state(M, 0)
    psi = psi / np.linalg.norm(psi)
    phi = d @ psi
    assert abs(np.vdot(phi, position_op(M).matrix @ phi).real - a) <= 1e-6


def test_displacement_1q_matches_expm():
    M, a = 16, 0.9
    ref = sla.expm(-1j * a * momentum_op(M).matrix)
    assert np.max(np.abs(ref - displacement_1q(M, a).matrix)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(a1=st.floats(-3, 3), a2=st.floats(-3, 3), M=st.sampled_from([4, 8, 16]))
def test_displacement_1q_group_law(a1, a2, M):
    lhs = displacement_1q(M, a1).matrix @ displacement_1q(M, a2).matrix
    assert np.max(np.abs(lhs - displacement_1q(M, a1 + a2).matrix)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(re=st.floats(-2, 2), im=st.floats(-2, 2), cutoff=st.integers(1, 20))
def test_displacement_2q_unitary(re, im, cutoff):
    assert unitarity_error(displacement_2q(cutoff, complex(re, im))) <= 1e-12


def test_displacement_2q_vacuum_overlap():
    assert np.allclose(displacement_2q(6, 0).matrix, np.eye(7))
    d = displacement_2q(64, 0.5).matrix
    assert abs(d[0, 0] - np.exp(-0.125)) <= 1e-6


def test_displacement_2q_shift_residual_decreasing():
    res = []
    a = 0.5
    for L in (8, 16, 32):
        b, _ = ladder_ops(L)
        d = displacement_2q(L, a).matrix
        lhs = d.conj().T @ b.matrix @ d - b.matrix - a * np.eye(L + 1)
        m = L // 4 + 1
        res.append(np.linalg.norm(lhs[:m, :m], 2))
    assert res[0] > res[1] > res[2]


def test_qht_frame():
    M, cutoff = 64, 8
    q = qht(M, cutoff).matrix
    assert unitarity_error(q) <= 1e-12
    raw = hermite_basis(M, cutoff).matrix()
    for m in range(cutoff + 1):
        v = raw[:, m] / np.linalg.norm(raw[:, m])
        assert abs(np.vdot(v, q[:, m])) >= 1 - 1e-6
    with pytest.raises(ValueError):
        qht(16, 4)


def test_qht_diagonalises_oscillator():
    M, cutoff = 64, 15
    q = qht(M, cutoff).matrix
    hb, _ = boson_site_ops(Quantisation.FirstQ, M, 1.0)
    h = q.conj().T @ hb @ q
    k = (cutoff + 1) // 2
    blk = h[:k, :k]
    assert np.allclose(np.diag(blk).real, np.arange(k) + 0.5, atol=1e-6)
    assert np.max(np.abs(blk - np.diag(np.diag(blk)))) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(M=st.sampled_from([2, 4, 8, 16, 32]))
def test_dft_diagonalises_momentum(M):
    F = centered_dft(M).matrix
    p = F.conj().T @ momentum_op(M).matrix @ F
    assert np.allclose(p, position_op(M).matrix, atol=1e-12)
