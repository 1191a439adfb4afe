"""Command-line entry point: scenario verbs driven by JSON config files.

Every verb takes --config <file> plus optional --seed and --out overrides.
Exit code is 0 on success; failures print a machine-readable error JSON to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from chiptrain import harness
from chiptrain.serialize import dump_json


def _load_config(args) -> dict:
    with open(args.config) as fh:
        cfg = json.load(fh)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out_dir"] = args.out
    return cfg


def _out_dir(cfg) -> str | None:
    out = cfg.get("out_dir")
    if out is not None:
        os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(cfg):
    return harness.simulate(cfg, _out_dir(cfg))


def cmd_train(cfg):
    cfg = dict(cfg, runs=1)
    result = harness.run_cohort(cfg, _out_dir(cfg))
    return result.runs[0]


def cmd_cohort(cfg):
    result = harness.run_cohort(cfg, _out_dir(cfg))
    return {
        "mean_fidelity": result.mean_fidelity,
        "min_fidelity": result.min_fidelity,
        "discarded": result.discarded,
        "runs": len(result.runs),
    }


def cmd_landscape(cfg):
    curve = harness.loss_landscape(cfg, _out_dir(cfg))
    return {"points": len(curve), "min_loss": min(l for _, l in curve)}


def cmd_offdiag(cfg):
    table = harness.offdiag_experiment(cfg, _out_dir(cfg))
    return {k: v for k, v in table.items() if k != "rows"}


def cmd_geodesic(cfg):
    summary = harness.geodesic_cohort(cfg, _out_dir(cfg))
    return {k: v for k, v in summary.items() if k != "rows"}


def cmd_gen_dataset(cfg):
    path = harness.gen_dataset(cfg)
    return {"out_path": path, "count": cfg["count"]}


def cmd_eval_warmstart(cfg):
    refine = cfg if cfg.get("refine_runs") else None
    result = harness.eval_warmstart(cfg["predictions"], cfg["dataset"], refine)
    out = _out_dir(cfg)
    if out is not None:
        dump_json(result, os.path.join(out, "warmstart_eval.json"))
    return result


VERBS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "cohort": cmd_cohort,
    "landscape": cmd_landscape,
    "offdiag": cmd_offdiag,
    "geodesic": cmd_geodesic,
    "gen-dataset": cmd_gen_dataset,
    "eval-warmstart": cmd_eval_warmstart,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chiptrain",
        description="Simulate and train continuously-coupled waveguide interferometers.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="JSON scenario config")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="override the output directory")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        result = VERBS[args.verb](cfg)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(result, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
