"""Batch inference: unitaries file in, predictions JSON-lines out."""

from __future__ import annotations

import json

import numpy as np

from warmstart.data import DatasetError, flatten_unitary
from warmstart.model import load_model


def predict_file(model_path: str, unitaries_path: str, out_path: str) -> int:
    """Emit {"id", "beta"} per record, betas in physical units, dataset order.

    The input file uses the simulator's dataset format (leading meta record);
    a dimension mismatch between the model and the records is an error.
    """
    model, _ = load_model(model_path)
    n = 0
    with open(unitaries_path) as fh, open(out_path, "w") as out:
        first = fh.readline()
        try:
            meta = json.loads(first)["meta"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise DatasetError(f"{unitaries_path} has no leading meta record") from exc
        if 2 * int(meta["m"]) ** 2 != model.spec.input_dim:
            raise DatasetError(
                f"model expects input_dim {model.spec.input_dim}, "
                f"dataset has m={meta['m']}"
            )
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            x = flatten_unitary(np.asarray(rec["re"]), np.asarray(rec["im"]))
            beta = model.predict_beta(x[None, :])[0]
            out.write(
                json.dumps({"id": rec["id"], "beta": [float(b) for b in beta]}) + "\n"
            )
            n += 1
    return n
