"""Closed-form and large-M MSE expressions for 2PCE and 3PCE, the
2PCE-vs-3PCE comparison predicates, and empirical NMSE aggregation.

All formulas assume Rayleigh IRS links with scalar losses ``l_UI1`` (user 1
to IRS) and ``l_IB`` (IRS to BS). ``E_mu_sq[k-2, n]`` stands in for
``E{|mu_{k,n}|^2}``; the true moment is infinite for Rayleigh links, so
callers pass an empirical surrogate.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelRealization, SystemConfig, reference_losses
from .schedule import regime_constants

GROUPS = ("d", "r", "d1", "r1", "dk", "rk")


@dataclass(frozen=True)
class AsymptoticInputs:
    M: int
    N: int
    K: int
    p: float
    sigma2: float
    l_UI1: float
    l_IB: float
    E_mu_sq: np.ndarray | None = None  # (K-1, N)

    def __post_init__(self):
        if min(self.M, self.N, self.K) < 1:
            raise ValueError("M, N and K must be positive")
        if self.p <= 0 or self.sigma2 < 0 or self.l_UI1 <= 0 or self.l_IB <= 0:
            raise ValueError("powers and losses must be positive (sigma2 may be 0)")
        if self.E_mu_sq is not None:
            E = np.asarray(self.E_mu_sq, dtype=float)
            if E.shape != (self.K - 1, self.N):
                raise ValueError(f"E_mu_sq must have shape {(self.K - 1, self.N)}")
            object.__setattr__(self, "E_mu_sq", E)

    @property
    def gamma(self) -> int:
        return regime_constants(self.M, self.N)[0]

    @property
    def delta(self) -> int:
        return regime_constants(self.M, self.N)[1]

    @property
    def ll(self) -> float:
        return self.l_UI1 * self.l_IB

    def mu_sq(self) -> np.ndarray:
        if self.E_mu_sq is None:
            raise ValueError("the scaling-factor formulas need E_mu_sq")
        return self.E_mu_sq


def inputs_from_config(cfg: SystemConfig, E_mu_sq=None) -> AsymptoticInputs:
    """Scalar losses taken between reference points (user 1, IRS, BS)."""
    ref = reference_losses(cfg)
    return AsymptoticInputs(cfg.M, cfg.N, cfg.K, cfg.p_mw, cfg.noise_variance_mw,
                            float(ref["l_UI"][0]), float(ref["l_IB"]), E_mu_sq)


def mse_phase1_2pce(x: AsymptoticInputs) -> tuple[float, float]:
    """(eps_d1, eps_r1) = (M s2 / (p(N+1)), M N s2 / (p(N+1)))."""
    e = x.M * x.sigma2 / (x.p * (x.N + 1))
    return e, x.N * e


def mse_phase2_2pce_mgeN(x: AsymptoticInputs, with_mu: bool = True):
    """Per-user direct-channel MSE and large-M scaling-factor MSE (one entry per
    user 2..K) for the M >= N design."""
    M, N, K, p, s2, ll = x.M, x.N, x.K, x.p, x.sigma2, x.ll
    eps_d = M * s2 / (2 * p * (K - 1))
    if not with_mu:
        return eps_d, None
    t1 = s2 * (N + 1) * N / (2 * (K - 1) * M * (p * (N + 1) * ll + s2))
    t2 = M * s2 * x.mu_sq().sum(axis=1) / (N * ll * p * (N + 1) + M * s2)
    return eps_d, t1 + t2


def _require_delta(x: AsymptoticInputs):
    if x.M >= x.N:
        raise ValueError("formula defined for M < N only")
    if x.delta == 0:
        raise ValueError(f"delta = 0 for M={x.M}, N={x.N}: the M < N formulas divide by delta")


def mse_phase2_2pce_mltN(x: AsymptoticInputs, with_mu: bool = True):
    """Per-user direct-channel MSE and the three-term large-M scaling-factor MSE
    for the orthogonal M < N design."""
    if x.M >= x.N:
        raise ValueError("formula defined for M < N only")
    M, N, p, s2, ll = x.M, x.N, x.p, x.sigma2, x.ll
    g, d = x.gamma, x.delta
    eps_d = M * s2 / (p * (g + 1))
    if not with_mu:
        return eps_d, None
    _require_delta(x)
    E = x.mu_sq()
    split = (g - 1) * M
    s_lo, s_hi = E[:, :split].sum(axis=1), E[:, split:].sum(axis=1)
    c_lo = d * g ** 2 + 2 * g + 2 * d - M  # may be negative; kept verbatim
    c_hi = M * g ** 2 + (3 * M - 1) * g + d
    base = p * d * (g + 1) ** 2 * (N + 1) * ll
    t1 = s2 * N * (N + 1) / (2 * p * M * (N + 1) * ll + 2 * M * s2)
    t2 = c_lo * s2 * s_lo / (base + c_lo * s2)
    t3 = c_hi * s2 * s_hi / (base + c_hi * s2)
    return eps_d, t1 + t2 + t3


def mse_3pce_table(x: AsymptoticInputs, with_mu: bool = True) -> dict:
    """3PCE expressions: ``eps_d`` (all direct channels together), ``eps_r1``,
    and per-user ``eps_mu_a`` (M >= N) or ``eps_mu_b`` (M < N)."""
    M, N, K, p, s2, ll = x.M, x.N, x.K, x.p, x.sigma2, x.ll
    out = {"eps_d": M * s2 / p, "eps_r1": (1 + K) * M * s2 / (p * K),
           "eps_mu_a": None, "eps_mu_b": None}
    if not with_mu or K < 2:
        return out
    E = x.mu_sq()
    e1, rest = E[:, 0], E[:, 1:].sum(axis=1)
    common = (N * (N - 1) * (1 + K) * s2 / (K * M * s2 + p * K * M * N * ll)
              + K * (1 + K) * N * s2 / (K * (K + N) * M * s2 + p * M * N * K ** 2 * ll))
    if M >= N:
        out["eps_mu_a"] = (common
                           + (K + N) * M * s2 * e1 / (p * N ** 2 * K * ll + (K + N) * M * s2)
                           + M * s2 * rest / (p * N ** 2 * ll + M * s2))
    else:
        _require_delta(x)
        g, d = x.gamma, x.delta
        split = (g - 1) * M
        s_mid, s_hi = E[:, 1:split].sum(axis=1), E[:, split:].sum(axis=1)
        out["eps_mu_b"] = (common
                           + M * s2 * s_mid / (p * N * M * ll + M * s2)
                           + (K + N) * M * s2 * e1 / (p * K * N * M * ll + (K + N) * M * s2)
                           + M * s2 * s_hi / (p * N * d * ll + M * s2))
    return out


def _sign(a: float, b: float, rtol: float = 1e-12) -> int:
    """Sign of ``a - b`` with ties declared within ``rtol`` of the larger magnitude."""
    diff = a - b
    if abs(diff) <= rtol * max(abs(a), abs(b)):
        return 0
    return 1 if diff > 0 else -1


def theorem_predicates(x: AsymptoticInputs) -> dict:
    """Compare the 3PCE and 2PCE formulas (differences are 3PCE minus 2PCE).

    ``sign`` holds +1 where 2PCE is better, 0 for a tie and -1 otherwise.
    For M < N two conditions on the direct-channel sign are reported:
    ``gamma_lt_K_plus_2`` (``gamma < K + 2``) and ``K_lt_gamma_plus_2``
    (``K < gamma + 2``, the one that follows from the difference
    ``M s2/p (N/(N+1) - (K-1)/(gamma+1))``). Scaling-factor comparisons
    are skipped when ``E_mu_sq`` is missing or ``delta = 0``.
    """
    M, N, K = x.M, x.N, x.K
    # the M < N scaling-factor formulas divide by delta; only direct and r1 remain
    with_mu = x.E_mu_sq is not None and K >= 2 and (M >= N or x.delta > 0)
    e_d1, e_r1 = mse_phase1_2pce(x)
    tab = mse_3pce_table(x, with_mu)
    out = {"regime": "MgeN" if M >= N else "MltN", "diff": {}, "sign": {},
           "thm1_holds": None, "thm2_direct_holds": None, "thm2_reflected_holds": None,
           "gamma_lt_K_plus_2": None, "K_lt_gamma_plus_2": None}
    if M >= N:
        e_dk, e_mu = mse_phase2_2pce_mgeN(x, with_mu) if K >= 2 else (0.0, None)
        mu3 = tab["eps_mu_a"]
    else:
        e_dk, e_mu = mse_phase2_2pce_mltN(x, with_mu) if K >= 2 else (0.0, None)
        mu3 = tab["eps_mu_b"]
    d2 = e_d1 + (K - 1) * e_dk
    pairs = {"direct": (tab["eps_d"], d2), "r1": (tab["eps_r1"], e_r1)}
    if with_mu:
        for k in range(K - 1):
            pairs[f"mu_{k + 2}"] = (float(mu3[k]), float(e_mu[k]))
    for name, (a, b) in pairs.items():
        out["diff"][name] = a - b
        out["sign"][name] = _sign(a, b)
    reflected = [s for n, s in out["sign"].items() if n != "direct"]
    if M >= N:
        out["thm1_holds"] = out["sign"]["direct"] >= 0 and all(s > 0 for s in reflected)
    else:
        g = x.gamma
        out["thm2_direct_holds"] = out["sign"]["direct"] > 0
        out["thm2_reflected_holds"] = all(s > 0 for s in reflected)
        out["gamma_lt_K_plus_2"] = g < K + 2
        out["K_lt_gamma_plus_2"] = K < g + 2
    return out


# empirical metrics

def trial_errors(real: ChannelRealization, est) -> dict:
    """Per-trial squared error and squared norm for every NMSE group, plus the
    raw squared errors used against the MSE formulas."""
    dd = np.abs(est.hd_hat - real.h_d) ** 2
    nd = np.abs(real.h_d) ** 2
    dr = (np.abs(est.Hk_hat - real.H) ** 2).sum(axis=(1, 2))
    nr = (np.abs(real.H) ** 2).sum(axis=(1, 2))
    dd_u, nd_u = dd.sum(axis=1), nd.sum(axis=1)
    out = {
        "d": (dd_u.sum(), nd_u.sum()), "r": (dr.sum(), nr.sum()),
        "d1": (dd_u[0], nd_u[0]), "r1": (dr[0], nr[0]),
        "dk": (dd_u[1:].sum(), nd_u[1:].sum()), "rk": (dr[1:].sum(), nr[1:].sum()),
    }
    K = real.K
    dmu = (np.abs(est.mu_hat - real.mu) ** 2).sum(axis=1)
    out["mse"] = {
        "d": dd_u.sum(), "d1": dd_u[0], "r1": dr[0],
        "dk": dd_u[1:].mean() if K > 1 else np.nan,
        "mu": dmu.mean() if K > 1 else np.nan,
    }
    out["mu_sq"] = np.abs(real.mu) ** 2
    return out


def ratio_with_jackknife(num: np.ndarray, den: np.ndarray) -> tuple[float, float]:
    """``sum(num)/sum(den)`` and its leave-one-out jackknife standard error."""
    num, den = np.asarray(num, float), np.asarray(den, float)
    n = num.size
    if n == 0:
        raise ValueError("no trials")
    A, B = num.sum(), den.sum()
    if B == 0:
        return np.nan, np.nan
    est = A / B
    if n == 1:
        return est, np.nan
    loo = (A - num) / (B - den)
    se = np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2))
    return est, se


def mean_with_se(values: np.ndarray) -> tuple[float, float]:
    v = np.asarray(values, float)
    if v.size == 0:
        raise ValueError("no trials")
    se = v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else np.nan
    return v.mean(), se


@dataclass
class MseReport:
    """Empirical NMSE/MSE aggregates with the matching predictions."""

    strategy: str
    regime: str
    trials: int
    entries: list = field(default_factory=list)

    def add(self, quantity, group, empirical, stderr, predicted=None):
        self.entries.append({"quantity": quantity, "group": group, "empirical": float(empirical),
                             "stderr": float(stderr), "predicted": None if predicted is None else float(predicted),
                             "trials": self.trials})

    def get(self, quantity, group) -> dict:
        for e in self.entries:
            if e["quantity"] == quantity and e["group"] == group:
                return e
        raise KeyError((quantity, group))

    def to_json(self) -> str:
        return json.dumps({"strategy": self.strategy, "regime": self.regime, "trials": self.trials,
                           "entries": self.entries}, allow_nan=True)


def nmse(reals: list, ests: list, strategy: str = "", regime: str = "") -> MseReport:
    """NMSE per group over paired trial lists (sum of errors over sum of norms)."""
    if len(reals) == 0 or len(reals) != len(ests):
        raise ValueError("need equally long, nonempty lists of realizations and estimates")
    errs = [trial_errors(r, e) for r, e in zip(reals, ests)]
    rep = MseReport(strategy, regime, len(errs))
    for g in GROUPS:
        num = np.array([e[g][0] for e in errs])
        den = np.array([e[g][1] for e in errs])
        rep.add("nmse", g, *ratio_with_jackknife(num, den))
    for q in errs[0]["mse"]:
        rep.add("mse", q, *mean_with_se(np.array([e["mse"][q] for e in errs])))
    return rep
