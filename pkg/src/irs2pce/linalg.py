"""Dense complex matrix helpers used by the estimators and the analysis.

All functions are pure and operate on ``numpy`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COND_LIMIT = 1e12


class LinAlgError(ValueError):
    """Raised when a structured inverse cannot be formed reliably."""


@dataclass(frozen=True)
class BlockMatrix2x2:
    """The four blocks of ``[[A, B], [C, D]]``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A, B, C, D = (np.atleast_2d(np.asarray(x)) for x in (self.A, self.B, self.C, self.D))
        if A.shape[0] != B.shape[0] or C.shape[0] != D.shape[0]:
            raise ValueError("row blocks are not conformable")
        if A.shape[1] != C.shape[1] or B.shape[1] != D.shape[1]:
            raise ValueError("column blocks are not conformable")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    def assemble(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.C, self.D]])


def dft_matrix(L: int) -> np.ndarray:
    """Unnormalized DFT matrix with ``[D]_{m,n} = exp(-j 2 pi m n / L)``.

    ``D @ D.conj().T == L * I``; the first row and column are exactly one.
    """
    if L < 1:
        raise ValueError(f"DFT size must be positive, got {L}")
    idx = np.arange(L)
    # reduce the exponent mod L first so large L keeps full phase accuracy
    phase = np.outer(idx, idx) % L
    return np.exp(-2j * np.pi * phase / L)


def pinv(X: np.ndarray, tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudo-inverse through the SVD.

    Singular values below ``tol * sigma_max`` are treated as zero. The default
    ``tol`` is ``max(rows, cols) * eps``.
    """
    X = np.atleast_2d(np.asarray(X))
    rows, cols = X.shape
    if X.size == 0:
        return np.zeros((cols, rows), dtype=X.dtype)
    if tol is None:
        tol = max(rows, cols) * np.finfo(float).eps
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    keep = s > tol * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vh.conj().T * s_inv) @ U.conj().T


def condition_number(X: np.ndarray) -> float:
    s = np.linalg.svd(np.atleast_2d(X), compute_uv=False)
    if s.size == 0:
        return 1.0
    if s[-1] == 0:
        return np.inf
    return float(s[0] / s[-1])


def hermitian_sqrt(P: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix.

    Eigenvalues down to -1e-10 (scaled by the matrix norm) are clamped to zero;
    anything more negative is rejected.
    """
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    if P.shape[0] != P.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(P)))) if P.size else 1.0
    if np.max(np.abs(P - P.conj().T), initial=0.0) > 1e-8 * scale:
        raise ValueError("matrix is not Hermitian")
    w, V = np.linalg.eigh((P + P.conj().T) / 2)
    if w.size and w.min() < -1e-10 * scale:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.conj().T


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return np.kron(np.atleast_2d(A), np.atleast_2d(B))


def block_inverse(M: BlockMatrix2x2) -> np.ndarray:
    """Inverse of ``[[A, B], [C, D]]`` through the Schur complement of ``A``."""
    A, B, C, D = M.A, M.B, M.C, M.D
    if A.shape[0] != A.shape[1] or D.shape[0] != D.shape[1]:
        raise LinAlgError("diagonal blocks must be square")
    cond_a = condition_number(A)
    if cond_a > COND_LIMIT:
        raise LinAlgError(f"block A is singular to working precision (cond={cond_a:.3e})")
    A_inv = np.linalg.inv(A)
    schur = D - C @ A_inv @ B
    cond_s = condition_number(schur)
    if cond_s > COND_LIMIT:
        raise LinAlgError(f"Schur complement is singular to working precision (cond={cond_s:.3e})")
    S_inv = np.linalg.inv(schur)
    A_inv_B = A_inv @ B
    C_A_inv = C @ A_inv
    top_left = A_inv + A_inv_B @ S_inv @ C_A_inv
    return np.block([[top_left, -A_inv_B @ S_inv], [-S_inv @ C_A_inv, S_inv]])


def block_pinv_rank1structured(M: BlockMatrix2x2, tol: float | None = None,
                               check_tol: float = 1e-8) -> np.ndarray:
    """Pseudo-inverse of a block matrix whose off-diagonal blocks live in the
    range/row space of ``A`` and whose Schur complement vanishes.

    With ``K_B = A^+ B`` and ``K_C = C A^+`` the result is assembled from
    ``A^+`` and the two small Gram corrections ``I + K_B^H K_B`` and
    ``I + K_C K_C^H``. ``tol`` is forwarded to :func:`pinv` for ``A``.
    """
    A, B, C, D = M.A, M.B, M.C, M.D
    A_p = pinv(A, tol)
    scale = max(1.0, float(np.linalg.norm(M.assemble())))
    checks = {
        "(I - A A^+) B = 0": B - A @ (A_p @ B),
        "C (I - A^+ A) = 0": C - (C @ A_p) @ A,
        "D - C A^+ B = 0": D - C @ A_p @ B,
    }
    for name, residual in checks.items():
        r = float(np.linalg.norm(residual)) if residual.size else 0.0
        if r > check_tol * scale:
            raise LinAlgError(f"precondition violated: {name} (residual {r:.3e})")

    K_B = A_p @ B
    K_C = C @ A_p
    nb = K_B.shape[1]
    nc = K_C.shape[0]
    KtB_inv = np.linalg.inv(np.eye(nb) + K_B.conj().T @ K_B)
    KtC_inv = np.linalg.inv(np.eye(nc) + K_C @ K_C.conj().T)
    left = np.eye(A.shape[1]) - K_B @ KtB_inv @ K_B.conj().T
    right = np.eye(A.shape[0]) - K_C.conj().T @ KtC_inv @ K_C
    right_col = K_C.conj().T @ KtC_inv
    low_row = KtB_inv @ K_B.conj().T
    return np.block([
        [left @ A_p @ right, left @ A_p @ right_col],
        [low_row @ A_p @ right, low_row @ A_p @ right_col],
    ])
