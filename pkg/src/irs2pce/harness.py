"""Seeded Monte Carlo sweeps comparing 2PCE and 3PCE, with CSV/JSON output.

Every trial draws from its own counter-based stream keyed by
``(seed, sweep index, trial index, substream)``: substream 0 generates the
channel, 1 the 2PCE noise and 2 the 3PCE noise. Results are reduced in
trial order, so outputs do not depend on the number of workers.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .analysis import (GROUPS, inputs_from_config, mean_with_se, mse_3pce_table, mse_phase1_2pce,
                       mse_phase2_2pce_mgeN, mse_phase2_2pce_mltN, ratio_with_jackknife, trial_errors)
from .channel import ChannelModel, SystemConfig
from .estimator import run_2pce, run_3pce
from .linalg import LinAlgError

log = logging.getLogger(__name__)

STRATEGIES = ("2PCE", "3PCE")
CSV_GROUPS = ("d1", "r1", "dk", "rk")
PRED_KEYS = ("d1", "r1", "dk", "mu")


@dataclass
class ExperimentSpec:
    name: str = "custom"
    base: SystemConfig = field(default_factory=SystemConfig)
    sweep_param: str = "p_dBm"
    sweep_values: list = field(default_factory=lambda: [20.0])
    trials: int = 500
    seed: int = 42
    strategies: tuple = STRATEGIES
    mltN_regime: str = "shared"
    out: str | None = None
    emit_predictions: bool = False
    common_random_numbers: bool = False  # reuse the same streams at every sweep value
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.sweep_values:
            raise ValueError("sweep_values must be nonempty")
        bad = set(self.strategies) - set(STRATEGIES)
        if bad:
            raise ValueError(f"unknown strategies {sorted(bad)}")
        if self.mltN_regime not in ("shared", "orthogonal"):
            raise ValueError("mltN_regime must be 'shared' or 'orthogonal'")
        self.strategies = tuple(self.strategies)
        self.sweep_values = list(self.sweep_values)
        # fail early on an invalid sweep axis or value
        for v in self.sweep_values:
            self.config_at(v)

    def config_at(self, value) -> SystemConfig:
        v = int(value) if self.sweep_param in ("M", "N", "N_y", "N_z", "K") else float(value)
        return self.base.replace(**{self.sweep_param: v})

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        base = SystemConfig.from_dict(d.pop("system", {}) or {})
        sweep = d.pop("sweep", None)
        if sweep is not None:
            d["sweep_param"] = sweep["param"]
            d["sweep_values"] = list(sweep["values"])
        if "strategies" in d:
            d["strategies"] = tuple(d["strategies"])
        return cls(base=base, **d)


def load_config(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return ExperimentSpec.from_dict(yaml.safe_load(fh) or {})


@dataclass
class ResultRow:
    sweep: float
    strategy: str
    nmse: dict
    se: dict
    pred: dict
    mse_mu: float
    se_mu: float
    trials: int
    excluded: int
    wall_time_s: float = 0.0  # informational only, never written to files

    def to_dict(self) -> dict:
        return {"sweep": self.sweep, "strategy": self.strategy, "nmse": self.nmse, "se": self.se,
                "pred": self.pred, "mse_mu": self.mse_mu, "se_mu": self.se_mu,
                "trials": self.trials, "excluded": self.excluded}

    @classmethod
    def from_dict(cls, d: dict) -> "ResultRow":
        return cls(**d)


def trial_stream(seed: int, sweep_idx: int, trial_idx: int, sub: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(sweep_idx, trial_idx, sub))
    return np.random.Generator(np.random.Philox(ss))


_MODEL_CACHE: dict = {}


def _model(cfg: SystemConfig) -> ChannelModel:
    key = repr(cfg)
    if key not in _MODEL_CACHE:
        _MODEL_CACHE.clear()
        _MODEL_CACHE[key] = ChannelModel(cfg)
    return _MODEL_CACHE[key]


def run_trial(cfg: SystemConfig, seed: int, sweep_idx: int, trial_idx: int,
              strategies=STRATEGIES, mltN_regime: str = "shared") -> dict:
    """One realization shared by all strategies; returns per-strategy error
    summaries, or the error message of a failed (excluded) estimate."""
    real = _model(cfg).sample(trial_stream(seed, sweep_idx, trial_idx, 0))
    out = {"mu_sq": np.abs(real.mu) ** 2}
    for s in strategies:
        try:
            if s == "2PCE":
                est = run_2pce(real, cfg, trial_stream(seed, sweep_idx, trial_idx, 1), mltN_regime)
            else:
                est = run_3pce(real, cfg, trial_stream(seed, sweep_idx, trial_idx, 2))
            err = trial_errors(real, est)
            err.pop("mu_sq")
            out[s] = err
        except LinAlgError as exc:
            out[s] = str(exc)
    return out


def _run_chunk(args):
    cfg, seed, sweep_idx, start, stop, strategies, regime = args
    return [run_trial(cfg, seed, sweep_idx, t, strategies, regime) for t in range(start, stop)]


def predictions(cfg: SystemConfig, strategy: str, mltN_regime: str, E_mu_sq, den_mean: dict) -> dict:
    """Formula values expressed as NMSE (divided by the empirical mean channel
    energy of the group) plus the raw per-user scaling-factor MSE."""
    nan = float("nan")
    out = {k: nan for k in PRED_KEYS}
    x = inputs_from_config(cfg, E_mu_sq if cfg.K > 1 else None)
    K = cfg.K
    norm = lambda val, g: val / den_mean[g] if den_mean.get(g, 0) > 0 else nan
    try:
        if strategy == "2PCE":
            e_d1, e_r1 = mse_phase1_2pce(x)
            out["d1"], out["r1"] = norm(e_d1, "d1"), norm(e_r1, "r1")
            if K > 1:
                if cfg.M >= cfg.N:
                    e_dk, e_mu = mse_phase2_2pce_mgeN(x)
                elif mltN_regime == "orthogonal":
                    e_dk, e_mu = mse_phase2_2pce_mltN(x)
                else:
                    return out  # the shared M<N design has no closed form
                out["dk"] = norm((K - 1) * e_dk, "dk")
                out["mu"] = float(np.mean(e_mu))
        else:
            tab = mse_3pce_table(x, with_mu=K > 1)
            per_user = tab["eps_d"] / K
            out["d1"], out["r1"] = norm(per_user, "d1"), norm(tab["eps_r1"], "r1")
            if K > 1:
                out["dk"] = norm((K - 1) * per_user, "dk")
                mu = tab["eps_mu_a"] if cfg.M >= cfg.N else tab["eps_mu_b"]
                out["mu"] = float(np.mean(mu))
    except ValueError as exc:
        log.info("no prediction for %s: %s", strategy, exc)
    return out


def _aggregate(value, strategy, results, cfg, spec, wall) -> ResultRow:
    ok = [r[strategy] for r in results if isinstance(r[strategy], dict)]
    excluded = len(results) - len(ok)
    if excluded:
        log.warning("%s at %s=%s: %d of %d trials excluded", strategy, spec.sweep_param, value,
                    excluded, len(results))
    nmse, se = {}, {}
    den_mean = {}
    for g in GROUPS:
        num = np.array([e[g][0] for e in ok])
        den = np.array([e[g][1] for e in ok])
        nmse[g], se[g] = ratio_with_jackknife(num, den) if ok else (math.nan, math.nan)
        den_mean[g] = float(den.mean()) if ok else math.nan
    mu_vals = np.array([e["mse"]["mu"] for e in ok])
    mse_mu, se_mu = mean_with_se(mu_vals) if ok else (math.nan, math.nan)
    pred = {k: math.nan for k in PRED_KEYS}
    if spec.emit_predictions:
        E_mu_sq = np.mean([r["mu_sq"] for r in results], axis=0)
        pred = predictions(cfg, strategy, spec.mltN_regime, E_mu_sq, den_mean)
    return ResultRow(float(value), strategy, {g: float(v) for g, v in nmse.items()},
                     {g: float(v) for g, v in se.items()}, {k: float(v) for k, v in pred.items()},
                     float(mse_mu), float(se_mu), len(ok), excluded, wall)


def run_experiment(spec: ExperimentSpec) -> list[ResultRow]:
    rows = []
    pool = ProcessPoolExecutor(spec.workers) if spec.workers > 1 else None
    try:
        for si, value in enumerate(spec.sweep_values):
            cfg = spec.config_at(value)
            key = 0 if spec.common_random_numbers else si
            t0 = time.perf_counter()
            if pool is None:
                results = _run_chunk((cfg, spec.seed, key, 0, spec.trials, spec.strategies, spec.mltN_regime))
            else:
                step = math.ceil(spec.trials / (4 * spec.workers))
                jobs = [(cfg, spec.seed, key, a, min(a + step, spec.trials), spec.strategies, spec.mltN_regime)
                        for a in range(0, spec.trials, step)]
                results = [r for chunk in pool.map(_run_chunk, jobs) for r in chunk]
            wall = time.perf_counter() - t0
            for s in spec.strategies:
                rows.append(_aggregate(value, s, results, cfg, spec, wall))
            log.info("%s %s=%s done in %.1fs", spec.name, spec.sweep_param, value, wall)
    finally:
        if pool is not None:
            pool.shutdown()
    if spec.out:
        (emit_json if str(spec.out).endswith(".json") else emit_csv)(rows, spec.out)
    return rows


def csv_header() -> list[str]:
    return (["sweep", "strategy"] + [f"nmse_{g}" for g in CSV_GROUPS] + [f"se_{g}" for g in CSV_GROUPS]
            + [f"pred_{k}" for k in PRED_KEYS]
            + ["nmse_d", "nmse_r", "se_d", "se_r", "mse_mu", "se_mu", "trials", "excluded"])


def _fmt(x: float) -> str:
    return f"{x:.8e}"


def emit_csv(rows: list[ResultRow], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header())
        for r in rows:
            w.writerow([_fmt(r.sweep), r.strategy]
                       + [_fmt(r.nmse[g]) for g in CSV_GROUPS] + [_fmt(r.se[g]) for g in CSV_GROUPS]
                       + [_fmt(r.pred[k]) for k in PRED_KEYS]
                       + [_fmt(r.nmse["d"]), _fmt(r.nmse["r"]), _fmt(r.se["d"]), _fmt(r.se["r"]),
                          _fmt(r.mse_mu), _fmt(r.se_mu), r.trials, r.excluded])


def emit_json(rows: list[ResultRow], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    Path(path).write_text(json.dumps([r.to_dict() for r in rows], indent=1), encoding="utf-8")


def load_json(path) -> list[ResultRow]:
    return [ResultRow.from_dict(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


def figure_presets(name: str, trials: int = 500, seed: int = 42) -> list[ExperimentSpec]:
    """Sweeps behind each figure. Figures with two panels return two specs."""
    base = SystemConfig()
    mk = lambda tag, cfg, param, values: ExperimentSpec(tag, cfg, param, values, trials, seed)
    if name == "fig3":
        return [mk("fig3", base, "p_dBm", [10.0, 15.0, 20.0, 25.0, 30.0])]
    if name == "fig4":
        cfg = base.replace(p_dBm=16.0)
        return [mk("fig4a", cfg, "alpha_UB", [3.0, 3.5, 4.0, 4.5, 5.0]),
                mk("fig4b", cfg, "alpha_IB", [2.0, 2.2, 2.4, 2.6, 2.8])]
    if name == "fig5":
        cfg = base.replace(N_y=4, N_z=5, p_dBm=24.0, K=2)
        return [mk("fig5", cfg, "M", [8, 12, 16, 20, 24, 28, 32, 36, 40])]
    if name == "fig6":
        cfg = base.replace(M=20, p_dBm=24.0, K=2)
        return [mk("fig6", cfg, "N", [8, 12, 16, 20, 24, 28, 32, 36, 40])]
    if name == "fig7":
        cfg = base.replace(p_dBm=16.0)
        db = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
        return [mk("fig7a", cfg, "beta_IB_dB", db),
                mk("fig7b", cfg.replace(beta_IB=0.0), "beta_UI_dB", db)]
    if name == "fig8":
        cfg = base.replace(p_dBm=16.0, r_r=0.0, r_rk=0.0)
        return [mk("fig8", cfg, "r_d", [round(0.1 * i, 1) for i in range(10)])]
    raise ValueError(f"unknown preset {name!r}; expected one of fig3..fig8")
