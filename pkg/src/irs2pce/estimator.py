"""Received-signal simulation and the LS estimators of 2PCE and 3PCE."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelRealization, SystemConfig
from .linalg import LinAlgError, condition_number, pinv
from .schedule import (TrainingSchedule, index_sets, phase1_schedule, phase3_pairs_3pce,
                       schedule_2pce, schedule_3pce)

COND_MAX = 1e10


@dataclass
class ReceivedBlock:
    Y: np.ndarray  # (M, tau)
    schedule: TrainingSchedule
    noise_variance: float


@dataclass
class EstimateSet:
    hd_hat: np.ndarray  # (K, M)
    H1_hat: np.ndarray  # (M, N)
    mu_hat: np.ndarray  # (K-1, N)

    @property
    def Hk_hat(self) -> np.ndarray:
        """Reflected channels of all users, ``H1_hat diag(mu_hat_k)`` for k >= 1."""
        scale = np.vstack([np.ones((1, self.H1_hat.shape[1])), self.mu_hat])
        return self.H1_hat[None, :, :] * scale[:, None, :]


def _check_cond(X: np.ndarray, what: str):
    c = condition_number(X)
    if not c < COND_MAX:
        raise LinAlgError(f"{what} is rank deficient (cond={c:.3e})")


def _cn(rng: np.random.Generator, shape, var: float) -> np.ndarray:
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def noiseless_rx(real: ChannelRealization, pilots: np.ndarray, patterns: np.ndarray, p: float) -> np.ndarray:
    """``sqrt(p) * sum_k a_{k,i} (h_d,k + H_k theta_i)`` for every slot, as an M x tau matrix."""
    refl = (real.h_r.T @ pilots) * patterns
    return np.sqrt(p) * (real.h_d.T @ pilots + real.G @ refl)


def simulate_rx(real: ChannelRealization, sched: TrainingSchedule, p: float, sigma2: float,
                rng: np.random.Generator) -> ReceivedBlock:
    Y = noiseless_rx(real, sched.pilots, sched.patterns, p)
    M = Y.shape[0]
    # always draw, so the stream position does not depend on sigma2
    noise = _cn(rng, (M, sched.tau), 1.0)
    return ReceivedBlock(Y + np.sqrt(sigma2) * noise, sched, sigma2)


def phase1_estimate(Y_I: np.ndarray, V_I: np.ndarray, p: float) -> tuple[np.ndarray, np.ndarray]:
    """``X = Y_I V_I^H / (sqrt(p)(N+1))``; returns (h_d1_hat, H1_hat)."""
    L = V_I.shape[0]
    X = Y_I @ V_I.conj().T / (np.sqrt(p) * L)
    return X[:, 0], X[:, 1:]


def phase2_estimate_mgeN(Y_II: np.ndarray, H1_hat: np.ndarray, pilots: np.ndarray, p: float):
    """Per-user decorrelation followed by ``V_hat^+``.

    ``Y_II`` holds the 2(K-1) Phase-II slots and ``pilots`` the matching K x 2(K-1)
    block. Returns ``(mu_hat (K-1, N), hd_hat (K-1, M))``.
    """
    M, N = H1_hat.shape
    K = pilots.shape[0]
    L = K - 1
    _check_cond(H1_hat, "H1_hat")
    I = np.eye(M)
    V = np.block([[H1_hat, I], [-H1_hat, I]])
    V_p = pinv(V)
    # Sigma_k y for all users at once: first and second halves decorrelated separately
    z1 = Y_II[:, :L] @ pilots[1:, :L].conj().T  # (M, K-1)
    z2 = Y_II[:, L:] @ pilots[1:, L:].conj().T
    sol = V_p @ np.vstack([z1, z2]) / (np.sqrt(p) * L)
    return sol[:N].T, sol[N:].T


def stacked_design_matrix(H1: np.ndarray, pilots: np.ndarray, patterns: np.ndarray) -> np.ndarray:
    """Full Phase-II system matrix for the unknowns ``[mu_2; h_d2; ...; mu_K; h_dK]``.

    Row block i (M rows) holds ``a_{k,i} [H1 diag(theta_i), I]`` in column block k.
    """
    M, N = H1.shape
    K, tau = pilots.shape
    W = np.zeros((tau * M, (K - 1) * (N + M)), dtype=complex)
    I = np.eye(M)
    for i in range(tau):
        blk = np.hstack([H1 * patterns[:, i], I])
        for k in range(1, K):
            if pilots[k, i] != 0:
                W[i * M:(i + 1) * M, (k - 1) * (N + M):k * (N + M)] = pilots[k, i] * blk
    return W


def phase2_estimate_stacked(Y_II: np.ndarray, H1_hat: np.ndarray, pilots: np.ndarray,
                            patterns: np.ndarray, p: float):
    """Brute-force LS over the whole Phase-II system; reference for the decomposed solvers."""
    M, N = H1_hat.shape
    K = pilots.shape[0]
    W = stacked_design_matrix(H1_hat, pilots, patterns)
    x = pinv(W) @ Y_II.T.reshape(-1) / np.sqrt(p)
    x = x.reshape(K - 1, N + M)
    return x[:, :N], x[:, N:]


def phase2_estimate_mltN_shared(Y_II: np.ndarray, H1_hat: np.ndarray, K: int, p: float):
    """Phase II-A per-user solves followed by the per-slot Phase II-B solves."""
    M, N = H1_hat.shape
    sets = index_sets(M, N, K)
    gamma = sets.gamma
    sp = np.sqrt(p)
    mu_hat = np.zeros((K - 1, N), dtype=complex)
    hd_hat = np.zeros((K - 1, M), dtype=complex)
    for u in range(1, K):
        A = np.array(sets.chi_A[u - 1])
        H_A = H1_hat[:, A]
        rows = []
        for o in range(1, gamma):
            theta = np.zeros(len(A))
            theta[(o - 1) * M: o * M] = 1.0
            rows.append(np.hstack([H_A * theta, np.eye(M)]))
        rows.append(np.hstack([-H_A, np.eye(M)]))
        V_k = np.vstack(rows)
        _check_cond(V_k, f"Phase II-A matrix of user {u}")
        y = Y_II[:, (u - 1) * gamma: u * gamma].T.reshape(-1)
        sol = pinv(V_k) @ y / sp
        mu_hat[u - 1, A] = sol[:len(A)]
        hd_hat[u - 1] = sol[len(A):]

    chi_A = [set(a) for a in sets.chi_A]
    base = (K - 1) * gamma
    for t, slot in enumerate(sets.pairs_B):
        users = sorted({u for u, _ in slot})
        elems = [e for _, e in slot]
        y_bar = Y_II[:, base + t].copy()
        for u in users:
            y_bar -= sp * hd_hat[u - 1]
            known = [e for e in elems if e in chi_A[u - 1]]
            if known:
                y_bar -= sp * H1_hat[:, known] @ mu_hat[u - 1, known]
        cols = H1_hat[:, elems]
        _check_cond(cols, f"Phase II-B slot {t} matrix")
        sol = pinv(cols) @ y_bar / sp
        for (u, e), v in zip(slot, sol):
            mu_hat[u - 1, e] = v
    return mu_hat, hd_hat


def orthogonal_design_matrix(H1: np.ndarray, patterns: np.ndarray) -> np.ndarray:
    """``Q = [H1 diag(theta_1), I; ...; H1 diag(theta_{gamma+1}), I]`` for one user window."""
    M = H1.shape[0]
    return np.vstack([np.hstack([H1 * patterns[:, i], np.eye(M)]) for i in range(patterns.shape[1])])


def phase2_estimate_mltN_orthogonal(Y_II: np.ndarray, H1_hat: np.ndarray, patterns: np.ndarray,
                                    K: int, p: float):
    """Per-user ``Q_hat^+ y / sqrt(p)`` over that user's gamma+1 slots."""
    M, N = H1_hat.shape
    L = Y_II.shape[1] // max(K - 1, 1)
    mu_hat = np.zeros((K - 1, N), dtype=complex)
    hd_hat = np.zeros((K - 1, M), dtype=complex)
    if K < 2:
        return mu_hat, hd_hat
    # the window patterns are the same for every user
    Q = orthogonal_design_matrix(H1_hat, patterns[:, :L])
    _check_cond(Q, "orthogonal Phase-II matrix")
    Q_p = pinv(Q)
    for u in range(1, K):
        y = Y_II[:, (u - 1) * L: u * L].T.reshape(-1)
        sol = Q_p @ y / np.sqrt(p)
        mu_hat[u - 1] = sol[:N]
        hd_hat[u - 1] = sol[N:]
    return mu_hat, hd_hat


@lru_cache(maxsize=64)
def _schedule_2pce(M, N, K, regime):
    return schedule_2pce(M, N, K, regime)


@lru_cache(maxsize=64)
def _schedule_3pce(M, N, K):
    return schedule_3pce(M, N, K)


def _powers(cfg: SystemConfig, noise_variance):
    return cfg.p_mw, cfg.noise_variance_mw if noise_variance is None else float(noise_variance)


def estimate_2pce(block: ReceivedBlock, M: int, N: int, K: int, p: float) -> EstimateSet:
    sched = block.schedule
    V_I, tau1 = phase1_schedule(N)
    hd1, H1_hat = phase1_estimate(block.Y[:, :tau1], V_I, p)
    # Rescale so the H1 and identity column blocks of the Phase-II systems have
    # comparable norms; the LS solution is unchanged, only rounding improves.
    norm = np.linalg.norm(H1_hat)
    c = np.sqrt(M * N) / norm if norm > 0 else 1.0
    Y_II = c * block.Y[:, tau1:]
    H1_s = c * H1_hat
    if K < 2:
        mu_hat, hd_k = np.zeros((0, N), complex), np.zeros((0, M), complex)
    elif sched.regime == "MgeN":
        mu_hat, hd_k = phase2_estimate_mgeN(Y_II, H1_s, sched.pilots[:, tau1:], p)
    elif sched.regime == "MltN_shared":
        mu_hat, hd_k = phase2_estimate_mltN_shared(Y_II, H1_s, K, p)
    else:
        mu_hat, hd_k = phase2_estimate_mltN_orthogonal(Y_II, H1_s, sched.patterns[:, tau1:], K, p)
    hd_k = hd_k / c
    return EstimateSet(np.vstack([hd1[None, :], hd_k]), H1_hat, mu_hat)


def run_2pce(real: ChannelRealization, cfg: SystemConfig, rng: np.random.Generator,
             mltN_regime: str = "shared", noise_variance: float | None = None) -> EstimateSet:
    """Simulate the 2PCE training block and estimate every channel.

    ``noise_variance`` overrides the configured noise power (mW).
    """
    M, N, K = cfg.M, cfg.N, cfg.K
    p, s2 = _powers(cfg, noise_variance)
    sched = _schedule_2pce(M, N, K, mltN_regime)
    block = simulate_rx(real, sched, p, s2, rng)
    return estimate_2pce(block, M, N, K, p)


def estimate_3pce(block: ReceivedBlock, M: int, N: int, K: int, p: float) -> EstimateSet:
    sched = block.schedule
    Y = block.Y
    sp = np.sqrt(p)
    # phase 1: IRS off, K-point DFT pilots
    A1 = sched.pilots[:, :K]
    hd_hat = (Y[:, :K] @ A1.conj().T / (sp * K)).T
    # phase 2: user 0 under N-point DFT reflection patterns
    Theta = sched.patterns[:, K:K + N]
    H1_hat = (Y[:, K:K + N] / sp - hd_hat[0][:, None]) @ Theta.conj().T / N
    Y3 = Y[:, K + N:] / sp
    mu_hat = np.zeros((K - 1, N), dtype=complex)
    if K < 2:
        return EstimateSet(hd_hat, H1_hat, mu_hat)
    if M >= N:
        _check_cond(H1_hat, "H1_hat")
        H1_p = pinv(H1_hat)
        for u in range(1, K):
            mu_hat[u - 1] = H1_p @ (Y3[:, u - 1] - hd_hat[u])
        return EstimateSet(hd_hat, H1_hat, mu_hat)

    # M < N: one joint LS over all phase-3 slots for every (user, element) factor
    slots = phase3_pairs_3pce(M, N, K)
    B = np.zeros((len(slots) * M, (K - 1) * N), dtype=complex)
    rhs = np.zeros(len(slots) * M, dtype=complex)
    for t, slot in enumerate(slots):
        users = sorted({u for u, _ in slot})
        elems = [e for _, e in slot]
        r = slice(t * M, (t + 1) * M)
        rhs[r] = Y3[:, t] - hd_hat[users].sum(axis=0)
        for u in users:
            for e in elems:
                B[r, (u - 1) * N + e] = H1_hat[:, e]
    _check_cond(B, "3PCE phase-3 matrix")
    mu_hat = (pinv(B) @ rhs).reshape(K - 1, N)
    return EstimateSet(hd_hat, H1_hat, mu_hat)


def run_3pce(real: ChannelRealization, cfg: SystemConfig, rng: np.random.Generator,
             noise_variance: float | None = None) -> EstimateSet:
    M, N, K = cfg.M, cfg.N, cfg.K
    p, s2 = _powers(cfg, noise_variance)
    block = simulate_rx(real, _schedule_3pce(M, N, K), p, s2, rng)
    return estimate_3pce(block, M, N, K, p)
