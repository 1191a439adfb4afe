"""Dataset loading for warm-start training.

Consumes the JSON-lines files produced by the interferometer simulator's
gen-dataset verb: one meta record, then {"id", "beta", "re", "im"} per line.
A unitary is flattened to 2m^2 reals (real parts, then imaginary parts); the
beta targets are mapped linearly from [0.7, 1.3] onto [0, 1] to match the
network's sigmoid output.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

BETA_RANGE = (0.7, 1.3)
TRAIN_FRACTION = 0.8


class DatasetError(ValueError):
    """Raised for missing, empty, or structurally broken dataset files."""


@dataclass
class Dataset:
    """Flattened unitaries with normalized beta targets and a fixed split."""

    meta: dict
    ids: np.ndarray  # (n,)
    inputs: np.ndarray  # (n, 2*m*m) float32
    targets: np.ndarray  # (n, m) float32, in [0, 1]
    train_idx: np.ndarray
    test_idx: np.ndarray
    skipped: int  # malformed records dropped on load

    @property
    def m(self) -> int:
        return int(self.meta["m"])

    @property
    def input_dim(self) -> int:
        return 2 * self.m * self.m


def flatten_unitary(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    """Concatenate real and imaginary parts row-major into a 2m^2 vector."""
    return np.concatenate([np.asarray(re, dtype=np.float32).ravel(),
                           np.asarray(im, dtype=np.float32).ravel()])


def unflatten_unitary(vec: np.ndarray, m: int) -> np.ndarray:
    """Inverse of flatten_unitary."""
    vec = np.asarray(vec)
    if vec.shape != (2 * m * m,):
        raise DatasetError(f"flat vector has shape {vec.shape}, expected ({2 * m * m},)")
    return vec[: m * m].reshape(m, m) + 1j * vec[m * m :].reshape(m, m)


def normalize_beta(beta: np.ndarray) -> np.ndarray:
    lo, hi = BETA_RANGE
    return (np.asarray(beta, dtype=np.float32) - lo) / (hi - lo)


def denormalize_beta(y: np.ndarray) -> np.ndarray:
    lo, hi = BETA_RANGE
    return lo + np.asarray(y, dtype=np.float64) * (hi - lo)


def _parse_record(line: str, m: int):
    rec = json.loads(line)
    beta = np.asarray(rec["beta"], dtype=np.float32)
    re = np.asarray(rec["re"], dtype=np.float32)
    im = np.asarray(rec["im"], dtype=np.float32)
    if beta.shape != (m,) or re.shape != (m, m) or im.shape != (m, m):
        raise DatasetError("record shape mismatch")
    return int(rec["id"]), flatten_unitary(re, im), normalize_beta(beta)


def load_dataset(path: str, split_seed: int = 0) -> Dataset:
    """Read a JSON-lines dataset and apply a seeded 0.8/0.2 train/test split.

    Malformed records are skipped and counted; an empty (or all-malformed)
    dataset is an error. The split is a permutation by split_seed, drawn before
    any training touches the data.
    """
    with open(path) as fh:
        first = fh.readline()
        try:
            meta = json.loads(first)["meta"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise DatasetError(f"{path} has no leading meta record") from exc
        m = int(meta["m"])
        ids, inputs, targets = [], [], []
        skipped = 0
        for line in fh:
            if not line.strip():
                continue
            try:
                rid, x, y = _parse_record(line, m)
            except (DatasetError, KeyError, ValueError, json.JSONDecodeError):
                skipped += 1
                continue
            ids.append(rid)
            inputs.append(x)
            targets.append(y)
    if skipped:
        logger.warning("skipped %d malformed records in %s", skipped, path)
    if not inputs:
        raise DatasetError(f"{path} contains no usable records")
    n = len(inputs)
    perm = np.random.default_rng(split_seed).permutation(n)
    n_train = int(round(TRAIN_FRACTION * n))
    return Dataset(
        meta=meta,
        ids=np.asarray(ids),
        inputs=np.stack(inputs),
        targets=np.stack(targets),
        train_idx=np.sort(perm[:n_train]),
        test_idx=np.sort(perm[n_train:]),
        skipped=skipped,
    )
