"""Command-line entry point: train a warm-start model or run batch prediction."""

from __future__ import annotations

import argparse
import json
import sys

from warmstart.train import TrainRun, train_from_file
from warmstart.predict import predict_file


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="warmstart",
        description="Neural-network warm starts for interferometer training.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_train = sub.add_parser("train")
    p_train.add_argument("--dataset", required=True, help="JSON-lines dataset file")
    p_train.add_argument("--model", required=True, help="output model path")
    p_train.add_argument("--epochs", type=int, default=150)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--split-seed", type=int, default=0)

    p_pred = sub.add_parser("predict")
    p_pred.add_argument("--model", required=True, help="trained model path")
    p_pred.add_argument("--unitaries", required=True, help="JSON-lines dataset file")
    p_pred.add_argument("--out", required=True, help="predictions JSON-lines path")

    args = parser.parse_args(argv)
    try:
        if args.verb == "train":
            run = TrainRun(epochs=args.epochs, seed=args.seed)
            report = train_from_file(
                args.dataset, args.model, run=run, split_seed=args.split_seed
            )
            result = {
                "model": args.model,
                "epochs": report.epochs_run,
                "train_mse": report.train_mse,
                "test_mse": report.test_mse,
            }
        else:
            count = predict_file(args.model, args.unitaries, args.out)
            result = {"out": args.out, "predictions": count}
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    json.dump(result, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
