"""Geometry, path loss and correlated Rician channel generation.

One :class:`ChannelRealization` holds the channels of a single coherence
block: direct links ``h_d`` (K x M), user-IRS links ``h_r`` (K x N), the
IRS-BS matrix ``G`` (M x N), the cascaded channels ``H_k = G diag(h_r,k)``
and the scaling vectors ``mu_k = h_r,k / h_r,1`` for users 2..K.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .linalg import hermitian_sqrt, kron


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_mw(x_dbm):
    return db_to_linear(x_dbm)


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the IRS-aided uplink.

    Powers are in dBm, Rician factors are linear, positions in metres.
    ``user_positions=None`` places the users on a 3 m circle around
    ``(0, 48, 0)``.
    """

    M: int = 40
    N_y: int = 4
    N_z: int = 8
    K: int = 4
    p_dBm: float = 20.0
    noise_psd_dBm_per_Hz: float = -169.0
    bandwidth_Hz: float = 1e6
    beta_UB: float = 0.0
    beta_UI: float = 0.0
    beta_IB: float = float(10 ** 0.3)
    alpha_UB: float = 5.0
    alpha_UI: float = 2.2
    alpha_IB: float = 2.2
    r_d: float = 0.0
    r_r: float = 0.0
    r_rk: float = 0.0
    l0_dB: float = -30.0
    d0_m: float = 1.0
    lambda_m: float = 0.1
    bs_ref: tuple = (2.0, 0.0, 0.0)
    irs_ref: tuple = (0.0, 45.0, 2.0)
    user_positions: tuple | None = None
    reference_loss: bool = False

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.N_y < 1 or self.N_z < 1:
            raise ValueError("M, K, N_y and N_z must be positive")
        for name in ("beta_UB", "beta_UI", "beta_IB"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("alpha_UB", "alpha_UI", "alpha_IB"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("r_d", "r_r", "r_rk"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.d0_m <= 0 or self.lambda_m <= 0:
            raise ValueError("d0_m and lambda_m must be positive")
        object.__setattr__(self, "bs_ref", tuple(float(v) for v in self.bs_ref))
        object.__setattr__(self, "irs_ref", tuple(float(v) for v in self.irs_ref))
        if self.user_positions is not None:
            pos = tuple(tuple(float(v) for v in u) for u in self.user_positions)
            if len(pos) != self.K or any(len(u) != 3 for u in pos):
                raise ValueError(f"expected {self.K} user positions in 3D")
            object.__setattr__(self, "user_positions", pos)

    @property
    def N(self) -> int:
        return self.N_y * self.N_z

    @property
    def p_mw(self) -> float:
        return float(dbm_to_mw(self.p_dBm))

    @property
    def noise_variance_mw(self) -> float:
        return float(dbm_to_mw(self.noise_psd_dBm_per_Hz + 10 * np.log10(self.bandwidth_Hz)))

    def users(self) -> np.ndarray:
        if self.user_positions is not None:
            return np.array(self.user_positions, dtype=float)
        ang = 2 * np.pi * np.arange(self.K) / self.K
        return np.column_stack([3.0 * np.cos(ang), 48.0 + 3.0 * np.sin(ang), np.zeros(self.K)])

    def replace(self, **changes) -> "SystemConfig":
        if "N" in changes:
            N = int(changes.pop("N"))
            N_y = int(changes.get("N_y", self.N_y))
            if N % N_y:
                raise ValueError(f"N={N} is not a multiple of N_y={N_y}")
            changes["N_z"] = N // N_y
        for key in [k for k in changes if k.startswith("beta_") and k.endswith("_dB")]:
            changes[key[:-3]] = float(db_to_linear(changes.pop(key)))
        if "K" in changes and "user_positions" not in changes:
            changes["user_positions"] = None
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SystemConfig":
        return cls().replace(**dict(data))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Geometry:
    """Array element positions and reference-point angles (radians)."""

    bs_antenna_positions: np.ndarray
    irs_element_positions: np.ndarray
    user_positions: np.ndarray
    theta_UB: np.ndarray
    theta_IB: float
    phi_UI: np.ndarray
    psi_UI: np.ndarray
    phi_IB: float
    psi_IB: float


def _irs_angles(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # elevation from the array normal (x) and azimuth within the y-z plane
    u = direction / np.linalg.norm(direction, axis=-1, keepdims=True)
    phi = np.arcsin(np.clip(np.hypot(u[..., 1], u[..., 2]), -1.0, 1.0))
    psi = np.arctan2(u[..., 2], u[..., 1])
    return phi, psi


def build_geometry(cfg: SystemConfig) -> Geometry:
    bs = np.asarray(cfg.bs_ref)
    irs = np.asarray(cfg.irs_ref)
    users = cfg.users()
    for k, u in enumerate(users):
        if np.linalg.norm(u - bs) < 1e-9 or np.linalg.norm(u - irs) < 1e-9:
            raise ValueError(f"user {k + 1} coincides with the BS or IRS reference point")
    if np.linalg.norm(irs - bs) < 1e-9:
        raise ValueError("IRS and BS reference points coincide")

    d_B = cfg.lambda_m / 2
    d_I = cfg.lambda_m / 8
    m = np.arange(cfg.M)
    bs_pos = bs + np.outer(m * d_B, [1.0, 0.0, 0.0])
    n = np.arange(cfg.N)
    irs_pos = irs + np.column_stack([np.zeros(cfg.N), (n % cfg.N_y) * d_I, (n // cfg.N_y) * d_I])

    to_users = users - bs
    theta_UB = np.arcsin(np.clip(to_users[:, 0] / np.linalg.norm(to_users, axis=1), -1, 1))
    to_irs = irs - bs
    theta_IB = float(np.arcsin(np.clip(to_irs[0] / np.linalg.norm(to_irs), -1, 1)))
    phi_UI, psi_UI = _irs_angles(users - irs)
    phi_IB, psi_IB = _irs_angles(bs - irs)
    return Geometry(bs_pos, irs_pos, users, theta_UB, theta_IB, phi_UI, psi_UI,
                    float(phi_IB), float(psi_IB))


def path_loss(distance_m, exponent: float, cfg: SystemConfig):
    """Linear path loss ``l0 * (d / d0) ** -alpha``."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = db_to_linear(cfg.l0_dB) * (d / cfg.d0_m) ** (-exponent)
    return float(out) if out.ndim == 0 else out


def exp_corr_matrix(r: float, dim: int) -> np.ndarray:
    """Exponential correlation matrix ``[Phi]_{ij} = r ** |j - i|``."""
    if not 0.0 <= r <= 1.0:
        raise ValueError("correlation coefficient must lie in [0, 1]")
    idx = np.arange(dim)
    return np.power(float(r), np.abs(idx[None, :] - idx[:, None])).astype(complex)


def steering_ula(theta, M: int, spacing: float, wavelength: float) -> np.ndarray:
    """``exp(j 2 pi m d sin(theta) / lambda)`` for m = 0..M-1; batched over theta."""
    theta = np.asarray(theta, dtype=float)
    m = np.arange(M)
    return np.exp(2j * np.pi * spacing * np.multiply.outer(np.sin(theta), m) / wavelength)


def steering_upa(phi, psi, N_y: int, N_z: int, spacing: float, wavelength: float) -> np.ndarray:
    """Planar array factor with horizontal index ``n % N_y`` running fastest."""
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    n = np.arange(N_y * N_z)
    h, v = n % N_y, n // N_y
    arg = (np.multiply.outer(np.sin(phi) * np.cos(psi), h)
           + np.multiply.outer(np.sin(phi) * np.sin(psi), v))
    return np.exp(2j * np.pi * spacing * arg / wavelength)


def reference_losses(cfg: SystemConfig) -> dict:
    """Path losses evaluated between reference points only.

    Returns per-user ``l_UB`` and ``l_UI`` arrays and the scalar ``l_IB``.
    """
    bs, irs, users = np.asarray(cfg.bs_ref), np.asarray(cfg.irs_ref), cfg.users()
    return {
        "l_UB": path_loss(np.linalg.norm(users - bs, axis=1), cfg.alpha_UB, cfg),
        "l_UI": path_loss(np.linalg.norm(users - irs, axis=1), cfg.alpha_UI, cfg),
        "l_IB": path_loss(np.linalg.norm(irs - bs), cfg.alpha_IB, cfg),
    }


@dataclass
class ChannelRealization:
    h_d: np.ndarray  # (K, M)
    h_r: np.ndarray  # (K, N)
    G: np.ndarray  # (M, N)
    H: np.ndarray = field(init=False)  # (K, M, N)
    mu: np.ndarray = field(init=False)  # (K-1, N)

    def __post_init__(self):
        self.H = self.G[None, :, :] * self.h_r[:, None, :]
        self.mu = self.h_r[1:] / self.h_r[0]

    @property
    def K(self) -> int:
        return self.h_d.shape[0]


class ChannelModel:
    """Deterministic parts of the channel (losses, LoS terms, correlation
    square roots) precomputed once per configuration."""

    def __init__(self, cfg: SystemConfig, geom: Geometry | None = None):
        self.cfg = cfg
        self.geom = geom if geom is not None else build_geometry(cfg)
        g = self.geom
        M, N, K = cfg.M, cfg.N, cfg.K

        if cfg.reference_loss:
            ref = reference_losses(cfg)
            self.l_UB = np.repeat(ref["l_UB"][:, None], M, axis=1)
            self.l_UI = np.repeat(ref["l_UI"][:, None], N, axis=1)
            self.l_IB = np.full((M, N), ref["l_IB"])
        else:
            dist = lambda a, b: np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
            self.l_UB = path_loss(dist(g.user_positions, g.bs_antenna_positions), cfg.alpha_UB, cfg)
            self.l_UI = path_loss(dist(g.user_positions, g.irs_element_positions), cfg.alpha_UI, cfg)
            self.l_IB = path_loss(dist(g.bs_antenna_positions, g.irs_element_positions), cfg.alpha_IB, cfg)

        d_B, d_I, lam = cfg.lambda_m / 2, cfg.lambda_m / 8, cfg.lambda_m
        self.z_d_los = np.sqrt(self.l_UB) * steering_ula(g.theta_UB, M, d_B, lam)
        self.z_r_los = np.sqrt(self.l_UI) * steering_upa(g.phi_UI, g.psi_UI, cfg.N_y, cfg.N_z, d_I, lam)
        self.F_los = (np.sqrt(self.l_IB)
                      * np.outer(steering_ula(g.theta_IB, M, d_B, lam),
                                 steering_upa(g.phi_IB, g.psi_IB, cfg.N_y, cfg.N_z, d_I, lam)))

        # element index n = v * N_y + h, so the vertical factor is the outer one
        self.Phi_d_sqrt = None if cfg.r_d == 0 else hermitian_sqrt(exp_corr_matrix(cfg.r_d, M))
        self.Phi_r_sqrt = None if cfg.r_r == 0 else hermitian_sqrt(
            kron(exp_corr_matrix(cfg.r_r, cfg.N_z), exp_corr_matrix(cfg.r_r, cfg.N_y)))
        self.Phi_rk_sqrt = None if cfg.r_rk == 0 else hermitian_sqrt(
            kron(exp_corr_matrix(cfg.r_rk, cfg.N_z), exp_corr_matrix(cfg.r_rk, cfg.N_y)))
        self._K = K

    @staticmethod
    def _weights(beta: float) -> tuple[float, float]:
        return np.sqrt(beta / (1 + beta)), np.sqrt(1 / (1 + beta))

    def _draw(self, rng: np.random.Generator) -> ChannelRealization:
        cfg = self.cfg
        M, N, K = cfg.M, cfg.N, cfg.K
        cn = lambda *shape: (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
        w_d, w_r, w_g = cn(K, M), cn(K, N), cn(M, N)

        z_d = np.sqrt(self.l_UB) * w_d
        if self.Phi_d_sqrt is not None:
            z_d = z_d @ self.Phi_d_sqrt.T
        z_r = np.sqrt(self.l_UI) * w_r
        if self.Phi_rk_sqrt is not None:
            z_r = z_r @ self.Phi_rk_sqrt.T
        F = np.sqrt(self.l_IB) * w_g
        if self.Phi_d_sqrt is not None:
            F = self.Phi_d_sqrt @ F
        if self.Phi_r_sqrt is not None:
            F = F @ self.Phi_r_sqrt

        a, b = self._weights(cfg.beta_UB)
        h_d = a * self.z_d_los + b * z_d
        a, b = self._weights(cfg.beta_UI)
        h_r = a * self.z_r_los + b * z_r
        a, b = self._weights(cfg.beta_IB)
        G = a * self.F_los + b * F
        return ChannelRealization(h_d, h_r, G)

    def sample(self, rng: np.random.Generator) -> ChannelRealization:
        """Draw one realization; retries once if ``h_r,1`` has a (near) zero entry."""
        for _ in range(2):
            real = self._draw(rng)
            if np.min(np.abs(real.h_r[0])) >= 1e-12:
                return real
        raise ValueError("user-1 IRS channel has a vanishing entry; scaling factors undefined")


def sample_realization(cfg: SystemConfig, geom: Geometry | None, rng: np.random.Generator) -> ChannelRealization:
    return ChannelModel(cfg, geom).sample(rng)
