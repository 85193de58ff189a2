"""Property and Monte Carlo checks, shared by the CLI ``validate`` command
and the test suite. Each check returns a :class:`Check` with a verdict and a
one-line detail string."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg as la
from .analysis import (inputs_from_config, mean_with_se, mse_3pce_table, mse_phase1_2pce,
                       mse_phase2_2pce_mgeN, mse_phase2_2pce_mltN, trial_errors)
from .channel import ChannelModel, ChannelRealization, SystemConfig
from .estimator import (phase1_estimate, phase2_estimate_mgeN,
                        phase2_estimate_stacked, run_2pce, run_3pce, simulate_rx)
from .schedule import phase1_schedule, schedule_2pce, schedule_3pce, training_overhead


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _rel(a, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / (nb if nb > 0 else 1.0)


# linear-algebra identities

def check_block_inverse(cases: int = 1000, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        n1, n2 = rng.integers(1, 7, size=2)
        A = _cn(rng, n1, n1) + 3 * np.eye(n1)
        D = _cn(rng, n2, n2) + 3 * np.eye(n2)
        M = la.BlockMatrix2x2(A, _cn(rng, n1, n2), _cn(rng, n2, n1), D)
        worst = max(worst, np.abs(la.block_inverse(M) @ M.assemble() - np.eye(n1 + n2)).max())
    return Check("block inverse via Schur complement", worst < 1e-8, f"max |M^-1 M - I| = {worst:.2e}")


def random_structured_block(rng, tol_rank=None) -> la.BlockMatrix2x2:
    """``[A, AX; YA, YAX]`` with rank-deficient ``A``: satisfies all three
    preconditions of the structured pseudo-inverse."""
    m, n = rng.integers(2, 7, size=2)
    r = int(rng.integers(1, min(m, n) + 1))
    A = _cn(rng, m, r) @ _cn(rng, r, n)
    X = _cn(rng, n, int(rng.integers(1, 5)))
    Y = _cn(rng, int(rng.integers(1, 5)), m)
    return la.BlockMatrix2x2(A, A @ X, Y @ A, Y @ A @ X)


def check_block_pinv(cases: int = 1000, seed: int = 1) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        M = random_structured_block(rng)
        got = la.block_pinv_rank1structured(M, tol=1e-10)
        ref = la.pinv(M.assemble(), tol=1e-10)
        worst = max(worst, _rel(got, ref))
    return Check("structured block pseudo-inverse vs SVD", worst < 1e-8, f"max relative diff = {worst:.2e}")


def check_trace_identities(cases: int = 1000, seed: int = 2) -> Check:
    rng = np.random.default_rng(seed)
    worst_cyc, worst_mean = 0.0, 0.0
    for _ in range(cases):
        a, b, c = rng.integers(1, 7, size=3)
        A, B, C = _cn(rng, a, b), _cn(rng, b, c), _cn(rng, c, a)
        t = np.trace(A @ B @ C)
        scale = max(1.0, abs(t))
        worst_cyc = max(worst_cyc, abs(t - np.trace(B @ C @ A)) / scale, abs(t - np.trace(C @ A @ B)) / scale)
        Xs = _cn(rng, 8, a, a)
        lhs = np.mean([np.trace(X) for X in Xs])
        rhs = np.trace(Xs.mean(axis=0))
        worst_mean = max(worst_mean, abs(lhs - rhs) / max(1.0, abs(lhs)))
    ok = worst_cyc < 1e-10 and worst_mean < 1e-12
    return Check("trace cyclicity and trace/mean commutation", ok,
                 f"cyclic {worst_cyc:.2e}, mean {worst_mean:.2e}")


def inverse_concentration_curve(p: int = 4, ns=(16, 64, 256), draws: int = 500, seed: int = 3):
    """Distance between the sample mean of ``(X X^H)^{-1}`` and ``C^{-1}`` where
    ``X`` has ``n`` independent columns scaled so ``E{X X^H} = C`` (diagonal)."""
    rng = np.random.default_rng(seed)
    C = np.diag(np.linspace(1.0, 4.0, p))
    C_sqrt = np.sqrt(C)
    out = []
    for n in ns:
        acc = np.zeros((p, p), dtype=complex)
        for _ in range(draws):
            X = C_sqrt @ _cn(rng, p, n) / np.sqrt(n)
            acc += np.linalg.inv(X @ X.conj().T)
        out.append(float(np.linalg.norm(acc / draws - np.linalg.inv(C))))
    return out


def check_inverse_concentration(seed: int = 3) -> Check:
    d = inverse_concentration_curve(seed=seed)
    ok = all(d[i + 1] < d[i] for i in range(len(d) - 1))
    return Check("inverse concentration as n grows (4p, 16p, 64p)", ok,
                 "distances " + ", ".join(f"{v:.3e}" for v in d))


def lemma_suite() -> list[Check]:
    return [check_block_inverse(), check_block_pinv(), check_trace_identities(), check_inverse_concentration()]


# protocol checks

NOISELESS_CASES = ((12, 8, 3, "shared"), (3, 7, 3, "shared"), (4, 10, 2, "orthogonal"))


def check_noiseless(M: int, N: int, K: int, regime: str, instances: int = 500, seed: int = 10) -> Check:
    cfg = SystemConfig(M=M, N_y=1, N_z=N, K=K)
    model = ChannelModel(cfg)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        real = model.sample(rng)
        for est in (run_2pce(real, cfg, rng, regime, noise_variance=0.0),
                    run_3pce(real, cfg, rng, noise_variance=0.0)):
            worst = max(worst, _rel(est.hd_hat, real.h_d), _rel(est.Hk_hat, real.H))
    return Check(f"noiseless recovery M={M} N={N} K={K} ({regime})", worst <= 1e-8,
                 f"worst relative error {worst:.2e} over {instances} instances")


def noiseless_suite(instances: int = 500) -> list[Check]:
    return [check_noiseless(*c, instances=instances) for c in NOISELESS_CASES]


def overhead_grid(count: int = 200, seed: int = 4):
    rng = np.random.default_rng(seed)
    grid = set()
    while len(grid) < count:
        grid.add((int(rng.integers(1, 41)), int(rng.integers(1, 41)), int(rng.integers(1, 7))))
    return sorted(grid)


def check_overhead(count: int = 200) -> Check:
    mismatches = []
    for M, N, K in overhead_grid(count):
        t2 = schedule_2pce(M, N, K, "shared").tau
        t3 = schedule_3pce(M, N, K).tau
        if t2 != training_overhead(M, N, K, "2PCE") or t3 != training_overhead(M, N, K, "3PCE"):
            mismatches.append((M, N, K))
    ref = (training_overhead(40, 32, 4, "2PCE"), training_overhead(40, 32, 4, "3PCE"))
    ok = not mismatches and ref == (39, 39)
    return Check("training overhead formula vs generated schedules", ok,
                 f"tau(40,32,4) = {ref}, {len(mismatches)} mismatches over {count} tuples")


def check_decomposition(instances: int = 100, seed: int = 5) -> Check:
    """Per-user decorrelated Phase-II solve vs the full stacked LS, noisy data."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        N = int(rng.integers(1, 9))
        M = int(rng.integers(N, 9))
        K = int(rng.integers(2, 5))
        real = ChannelRealization(_cn(rng, K, M), _cn(rng, K, N), _cn(rng, M, N))
        sched = schedule_2pce(M, N, K)
        block = simulate_rx(real, sched, 1.0, 0.1, rng)
        _, H1_hat = phase1_estimate(block.Y[:, :N + 1], phase1_schedule(N)[0], 1.0)
        Y_II = block.Y[:, N + 1:]
        a = phase2_estimate_mgeN(Y_II, H1_hat, sched.pilots[:, N + 1:], 1.0)
        b = phase2_estimate_stacked(Y_II, H1_hat, sched.pilots[:, N + 1:], sched.patterns[:, N + 1:], 1.0)
        worst = max(worst, _rel(a[0], b[0]), _rel(a[1], b[1]))
    return Check("decorrelated Phase-II solve equals stacked LS", worst <= 1e-9,
                 f"worst relative difference {worst:.2e} over {instances} instances")


# Monte Carlo MSE checks

def rayleigh_config(M: int, N: int, K: int, p_dBm: float = 20.0) -> SystemConfig:
    return SystemConfig(M=M, N_y=1, N_z=N, K=K, p_dBm=p_dBm, beta_UB=0.0, beta_UI=0.0, beta_IB=0.0,
                        reference_loss=True)


def collect_errors(cfg: SystemConfig, trials: int, seed: int, regime: str = "orthogonal",
                   strategies=("2PCE", "3PCE")) -> dict:
    model = ChannelModel(cfg)
    out = {s: [] for s in strategies}
    out["mu_sq"] = []
    for t in range(trials):
        rngs = [np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(t, s))))
                for s in range(3)]
        real = model.sample(rngs[0])
        out["mu_sq"].append(np.abs(real.mu) ** 2)
        if "2PCE" in strategies:
            out["2PCE"].append(trial_errors(real, run_2pce(real, cfg, rngs[1], regime)))
        if "3PCE" in strategies:
            out["3PCE"].append(trial_errors(real, run_3pce(real, cfg, rngs[2])))
    return out


def exact_mse_checks(M: int, N: int, K: int, trials: int = 2000, seed: int = 6) -> list[Check]:
    cfg = rayleigh_config(M, N, K)
    errs = collect_errors(cfg, trials, seed)
    x = inputs_from_config(cfg)
    e_d1, e_r1 = mse_phase1_2pce(x)
    if M >= N:
        e_dk, _ = mse_phase2_2pce_mgeN(x, with_mu=False)
        dk_name = "eps_dk (M>=N)"
    else:
        e_dk, _ = mse_phase2_2pce_mltN(x, with_mu=False)
        dk_name = "eps_dk (M<N)"
    tab = mse_3pce_table(x, with_mu=False)
    items = [("2PCE", "d1", "eps_d1", e_d1), ("2PCE", "r1", "eps_r1", e_r1), ("2PCE", "dk", dk_name, e_dk),
             ("3PCE", "d", "3PCE eps_d", tab["eps_d"]), ("3PCE", "r1", "3PCE eps_r1", tab["eps_r1"])]
    checks = []
    for strat, q, label, pred in items:
        m, se = mean_with_se([e["mse"][q] for e in errs[strat]])
        z = (m - pred) / se
        checks.append(Check(f"{label} at M={M} N={N} K={K}", abs(z) <= 3.0,
                            f"MC {m:.4e} +- {se:.1e}, formula {pred:.4e}, z = {z:+.2f}"))
    return checks


def mse_suite(trials: int = 2000) -> list[Check]:
    return exact_mse_checks(16, 8, 4, trials) + exact_mse_checks(8, 20, 3, trials)


def mu_gap_curve(Ms=(32, 64, 128), N: int = 8, K: int = 4, trials: int = 2000, seed: int = 7):
    """Relative gap between the Monte Carlo scaling-factor MSE of 2PCE and the
    large-M formula evaluated with the empirical ``E|mu|^2`` of the same trials."""
    gaps = []
    for M in Ms:
        cfg = rayleigh_config(M, N, K)
        errs = collect_errors(cfg, trials, seed, strategies=("2PCE",))
        E_mu_sq = np.mean(errs["mu_sq"], axis=0)
        _, e_mu = mse_phase2_2pce_mgeN(inputs_from_config(cfg, E_mu_sq))
        mc = np.mean([e["mse"]["mu"] for e in errs["2PCE"]])
        pred = float(np.mean(e_mu))
        gaps.append((M, mc, pred, abs(mc - pred) / pred))
    return gaps


def power_advantage_db(p_dbm, nmse_2p, nmse_3p) -> list[float]:
    """For each 2PCE point, the extra power 3PCE needs to reach the same NMSE,
    by linear interpolation of log NMSE against p (dB). Points outside the
    3PCE range are skipped."""
    p = np.asarray(p_dbm, float)
    l2, l3 = np.log10(nmse_2p), np.log10(nmse_3p)
    out = []
    for pi, target in zip(p, l2):
        for j in range(len(p) - 1):
            hi, lo = l3[j], l3[j + 1]
            if lo <= target <= hi and hi != lo:
                p_match = p[j] + (hi - target) / (hi - lo) * (p[j + 1] - p[j])
                out.append(float(p_match - pi))
                break
    return out
