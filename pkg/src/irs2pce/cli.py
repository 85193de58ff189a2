"""Command-line entry point: ``irs2pce run|predict|validate``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import validation
from .analysis import (inputs_from_config, mse_3pce_table, mse_phase1_2pce, mse_phase2_2pce_mgeN,
                       mse_phase2_2pce_mltN, theorem_predicates)
from .channel import ChannelModel
from .harness import ExperimentSpec, figure_presets, load_config, run_experiment


def _apply_overrides(spec: ExperimentSpec, args) -> ExperimentSpec:
    for name in ("trials", "seed", "workers"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(spec, name, v)
    if getattr(args, "regime", None):
        spec.mltN_regime = args.regime
    if getattr(args, "predictions", False):
        spec.emit_predictions = True
    if getattr(args, "crn", False):
        spec.common_random_numbers = True
    return spec


def _out_path(out: str | None, spec: ExperimentSpec, multi: bool) -> str:
    if out is None:
        return f"{spec.name}.csv"
    if not multi:
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}_{spec.name}{p.suffix or '.csv'}"))


def cmd_run(args) -> int:
    if args.preset:
        specs = figure_presets(args.preset)
    else:
        specs = [load_config(args.config)]
    for spec in specs:
        _apply_overrides(spec, args)
        spec.out = _out_path(args.out or (spec.out if not args.preset else None), spec, len(specs) > 1)
        rows = run_experiment(spec)
        excluded = sum(r.excluded for r in rows)
        print(f"{spec.name}: {len(rows)} rows -> {spec.out} ({excluded} excluded trials)")
    return 0


def _mu_surrogate(cfg, samples: int, seed: int):
    if samples <= 0 or cfg.K < 2:
        return None
    model = ChannelModel(cfg)
    rng = np.random.default_rng(seed)
    return np.mean([np.abs(model.sample(rng).mu) ** 2 for _ in range(samples)], axis=0)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def cmd_predict(args) -> int:
    spec = load_config(args.config)
    out = []
    for value in spec.sweep_values:
        cfg = spec.config_at(value)
        x = inputs_from_config(cfg, _mu_surrogate(cfg, args.mu_samples, spec.seed))
        with_mu = x.E_mu_sq is not None
        rec = {"sweep": value, "param": spec.sweep_param}
        rec["eps_d1_2P"], rec["eps_r1_2P"] = mse_phase1_2pce(x)
        try:
            if cfg.K > 1:
                f = mse_phase2_2pce_mgeN if cfg.M >= cfg.N else mse_phase2_2pce_mltN
                rec["eps_dk_2P"], rec["eps_mu_2P"] = f(x, with_mu)
            rec["table_3P"] = mse_3pce_table(x, with_mu)
            rec["theorems"] = theorem_predicates(x)
        except ValueError as exc:
            rec["error"] = str(exc)
        out.append(_clean(rec))
    print(json.dumps(out, indent=1))
    return 0


def cmd_validate(args) -> int:
    if args.suite == "lemmas":
        checks = validation.lemma_suite()
    elif args.suite == "noiseless":
        checks = validation.noiseless_suite(args.instances)
        checks.append(validation.check_overhead())
        checks.append(validation.check_decomposition())
    else:
        checks = validation.mse_suite(args.trials)
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irs2pce", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo sweep")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=[f"fig{i}" for i in range(3, 9)])
    src.add_argument("--config", help="YAML experiment file")
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--out", help="output .csv or .json path")
    run.add_argument("--regime", choices=["shared", "orthogonal"], help="2PCE design when M < N")
    run.add_argument("--predictions", action="store_true", help="attach formula predictions")
    run.add_argument("--crn", action="store_true", help="reuse random streams at every sweep value")
    run.set_defaults(func=cmd_run)

    pred = sub.add_parser("predict", help="evaluate the MSE formulas only")
    pred.add_argument("--config", required=True)
    pred.add_argument("--mu-samples", type=int, default=0,
                      help="channel draws used for the E|mu|^2 surrogate (0 skips those formulas)")
    pred.set_defaults(func=cmd_predict)

    val = sub.add_parser("validate", help="run a property suite")
    val.add_argument("--suite", choices=["lemmas", "noiseless", "mse"], required=True)
    val.add_argument("--instances", type=int, default=500)
    val.add_argument("--trials", type=int, default=2000)
    val.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
