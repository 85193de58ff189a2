import numpy as np
import pytest

from irs2pce import linalg as la
from irs2pce.channel import exp_corr_matrix
from conftest import cn


def test_dft_small_sizes():
    assert np.allclose(la.dft_matrix(1), [[1]])
    assert np.allclose(la.dft_matrix(2), [[1, 1], [1, -1]])
    assert np.allclose(la.dft_matrix(4)[1], [1, -1j, -1, 1j])


@pytest.mark.parametrize("L", [1, 3, 7, 33])
def test_dft_orthogonality(L):
    D = la.dft_matrix(L)
    assert np.allclose(D @ D.conj().T, L * np.eye(L))
    assert np.all(D[0] == 1) and np.all(D[:, 0] == 1)


def test_dft_rejects_zero():
    with pytest.raises(ValueError):
        la.dft_matrix(0)


def test_pinv_examples(rng):
    assert np.allclose(la.pinv(np.eye(3)), np.eye(3))
    assert np.allclose(la.pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    X = cn(rng, 6, 4)
    assert np.abs(la.pinv(X) @ X - np.eye(4)).max() < 1e-10


def test_pinv_truncates_rank_deficient(rng):
    X = cn(rng, 5, 2) @ cn(rng, 2, 4)
    P = la.pinv(X, tol=1e-10)
    assert np.allclose(X @ P @ X, X)
    assert np.allclose(P @ X @ P, P)


def test_hermitian_sqrt():
    assert np.allclose(la.hermitian_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(la.hermitian_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    P = exp_corr_matrix(0.5, 4)
    S = la.hermitian_sqrt(P)
    assert np.linalg.norm(S @ S.conj().T - P) < 1e-10
    assert np.allclose(S, S.conj().T)


def test_hermitian_sqrt_rejects_nonhermitian():
    with pytest.raises(ValueError):
        la.hermitian_sqrt(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_kron_examples(rng):
    assert np.allclose(la.kron(np.eye(2), np.eye(2)), np.eye(4))
    assert np.allclose(la.kron(np.array([[1, 0], [0, 0]]), np.array([[2]])), [[2, 0], [0, 0]])
    A, B = cn(rng, 2, 2), cn(rng, 3, 3)
    K = la.kron(A, B)
    for i in range(2):
        for j in range(2):
            for k in range(3):
                for l in range(3):
                    assert np.isclose(K[i * 3 + k, j * 3 + l], A[i, j] * B[k, l], rtol=1e-14)


def test_block_inverse_examples(rng):
    Z = np.zeros((2, 2))
    assert np.allclose(la.block_inverse(la.BlockMatrix2x2(np.eye(2), Z, Z, np.eye(2))), np.eye(4))
    M = la.BlockMatrix2x2(2 * np.eye(2), Z, Z, 4 * np.eye(2))
    assert np.allclose(la.block_inverse(M), np.diag([0.5, 0.5, 0.25, 0.25]))
    M = la.BlockMatrix2x2(cn(rng, 4, 4) + 3 * np.eye(4), cn(rng, 4, 4), cn(rng, 4, 4), cn(rng, 4, 4) + 3 * np.eye(4))
    assert np.abs(la.block_inverse(M) @ M.assemble() - np.eye(8)).max() < 1e-9


def test_block_inverse_singular():
    Z = np.zeros((2, 2))
    with pytest.raises(la.LinAlgError):
        la.block_inverse(la.BlockMatrix2x2(Z, np.eye(2), np.eye(2), Z))


def test_block_pinv_rank_one_example(rng):
    u = cn(rng, 3, 1)
    E = u @ u.conj().T
    got = la.block_pinv_rank1structured(la.BlockMatrix2x2(E, -E, -E, E), tol=1e-10)
    Ep = la.pinv(E, tol=1e-10)
    assert np.allclose(got, 0.25 * np.block([[Ep, -Ep], [-Ep, Ep]]))


def test_block_pinv_identity_corner():
    Z = np.zeros((2, 2))
    got = la.block_pinv_rank1structured(la.BlockMatrix2x2(np.eye(2), Z, Z, Z))
    assert np.allclose(got, np.diag([1.0, 1.0, 0.0, 0.0]))


def test_block_pinv_rejects_unstructured(rng):
    M = la.BlockMatrix2x2(cn(rng, 2, 2), cn(rng, 2, 2), cn(rng, 2, 2), cn(rng, 2, 2))
    with pytest.raises(ValueError):
        la.block_pinv_rank1structured(M)


def test_blockmatrix_shape_check():
    with pytest.raises(ValueError):
        la.BlockMatrix2x2(np.eye(2), np.eye(3), np.eye(2), np.eye(2))
