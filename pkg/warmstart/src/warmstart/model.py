"""The warm-start multilayer perceptron and its save/load format.

The model file is a torch state dict; a JSON sidecar (<model>.json) carries the
architecture, the target normalization constants, and the train/test split
manifest so evaluation is exactly reproducible from disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from warmstart.data import BETA_RANGE

DEFAULT_HIDDEN = (256, 128, 96, 64)
DEFAULT_DROPOUT = 0.1


@dataclass
class MLPSpec:
    """Architecture of the unitary-to-parameters regressor."""

    input_dim: int  # 2 m^2 flattened reals
    output_dim: int  # number of trainable chip parameters
    hidden: tuple = DEFAULT_HIDDEN
    dropout: float = DEFAULT_DROPOUT
    output_range: tuple = BETA_RANGE

    def to_json(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "hidden": list(self.hidden),
            "dropout": self.dropout,
            "output_range": list(self.output_range),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MLPSpec":
        return cls(
            input_dim=int(doc["input_dim"]),
            output_dim=int(doc["output_dim"]),
            hidden=tuple(doc["hidden"]),
            dropout=float(doc["dropout"]),
            output_range=tuple(doc["output_range"]),
        )


class WarmStartMLP(nn.Module):
    """ELU hidden layers with dropout; sigmoid output in [0, 1]."""

    def __init__(self, spec: MLPSpec):
        super().__init__()
        self.spec = spec
        layers = []
        prev = spec.input_dim
        for width in spec.hidden:
            layers += [nn.Linear(prev, width), nn.ELU(), nn.Dropout(spec.dropout)]
            prev = width
        layers += [nn.Linear(prev, spec.output_dim), nn.Sigmoid()]
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)

    @torch.no_grad()
    def predict_beta(self, inputs: np.ndarray) -> np.ndarray:
        """Physical-unit predictions: sigmoid output rescaled to the beta range."""
        self.eval()
        y = self(torch.as_tensor(inputs, dtype=torch.float32)).numpy()
        lo, hi = self.spec.output_range
        return lo + y.astype(np.float64) * (hi - lo)


def save_model(model: WarmStartMLP, path: str, extra: dict | None = None):
    """Write the weights plus a JSON sidecar with spec and provenance fields."""
    torch.save(model.state_dict(), path)
    sidecar = {"spec": model.spec.to_json()}
    if extra:
        sidecar.update(extra)
    with open(path + ".json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str) -> tuple[WarmStartMLP, dict]:
    with open(path + ".json") as fh:
        sidecar = json.load(fh)
    model = WarmStartMLP(MLPSpec.from_json(sidecar["spec"]))
    model.load_state_dict(torch.load(path, weights_only=True))
    model.eval()
    return model, sidecar
