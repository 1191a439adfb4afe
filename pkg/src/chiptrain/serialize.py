"""JSON forms for geometries, parameters, unitaries, and measurement records.

All mode indices in serialized documents are 1-based.
"""

from __future__ import annotations

import json

import numpy as np

from chiptrain.chip import ChipGeometry, ChipParameters
from chiptrain.photonics import OutputDistribution, SampleCounts


def chip_to_json(geom: ChipGeometry, params: ChipParameters | None = None) -> dict:
    doc = {
        "layout": geom.layout,
        "m": geom.m,
        "edges": [[i, j] for i, j in geom.edges],
        "segments": [{"len_mm": s.length_mm, "active": s.active} for s in geom.segments],
    }
    if params is not None:
        doc["beta"] = [[float(b) for b in row] for row in params.beta]
        doc["couplings"] = [
            {"i": i, "j": j, "c": float(params.couplings[(i, j)])}
            for i, j in sorted(params.couplings)
        ]
    return doc


def unitary_to_json(u: np.ndarray) -> dict:
    return {
        "m": u.shape[0],
        "re": [[float(v) for v in row] for row in u.real],
        "im": [[float(v) for v in row] for row in u.imag],
    }


def unitary_from_json(doc: dict) -> np.ndarray:
    return np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)


def distribution_to_json(dist: OutputDistribution) -> dict:
    return {
        "input": list(dist.input),
        "outcomes": [{"out": list(k), "p": v} for k, v in sorted(dist.outcomes.items())],
    }


def counts_to_json(counts: SampleCounts) -> dict:
    return {
        "input": list(counts.input),
        "n_shots": counts.n_shots,
        "outcomes": [{"out": list(k), "n": v} for k, v in sorted(counts.counts.items())],
    }


def dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
