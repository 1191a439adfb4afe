"""Training loop: MSE regression from flattened unitaries to normalized betas.

Schedule: start with small batches; on a training-loss plateau double the batch
size (up to a cap) instead of decaying the learning rate, then once the batch
is capped decay the learning rate on each further plateau.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from warmstart.data import Dataset, load_dataset
from warmstart.model import MLPSpec, WarmStartMLP, save_model

logger = logging.getLogger(__name__)


@dataclass
class TrainRun:
    epochs: int = 150
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_batch_size: int = 512
    lr_decay: float = 0.5
    min_lr: float = 1e-5
    plateau_patience: int = 8  # epochs without improvement before acting
    plateau_rel_tol: float = 1e-3
    seed: int = 0


@dataclass
class TrainReport:
    epochs_run: int
    train_mse: float
    test_mse: float
    final_batch_size: int
    final_lr: float
    history: list  # per-epoch mean train MSE


def _epoch_passes(model, opt, loss_fn, x, y, batch_size, generator):
    model.train()
    n = x.shape[0]
    perm = torch.randperm(n, generator=generator)
    total = 0.0
    for start in range(0, n, batch_size):
        idx = perm[start : start + batch_size]
        opt.zero_grad()
        loss = loss_fn(model(x[idx]), y[idx])
        loss.backward()
        opt.step()
        total += float(loss.detach()) * len(idx)
    return total / n


@torch.no_grad()
def _mse(model, x, y) -> float:
    model.eval()
    return float(nn.functional.mse_loss(model(x), y))


def train_mlp(dataset: Dataset, spec: MLPSpec | None = None,
              run: TrainRun | None = None) -> tuple[WarmStartMLP, TrainReport]:
    """Train on the dataset's train split; the test split is never touched
    until the final report."""
    run = run or TrainRun()
    if spec is None:
        spec = MLPSpec(input_dim=dataset.input_dim, output_dim=dataset.m)
    torch.manual_seed(run.seed)
    generator = torch.Generator().manual_seed(run.seed)

    x_train = torch.as_tensor(dataset.inputs[dataset.train_idx])
    y_train = torch.as_tensor(dataset.targets[dataset.train_idx])
    x_test = torch.as_tensor(dataset.inputs[dataset.test_idx])
    y_test = torch.as_tensor(dataset.targets[dataset.test_idx])

    model = WarmStartMLP(spec)
    opt = torch.optim.Adam(model.parameters(), lr=run.learning_rate)
    loss_fn = nn.MSELoss()

    batch_size = run.batch_size
    lr = run.learning_rate
    best = np.inf
    since_best = 0
    history = []
    for epoch in range(run.epochs):
        mean_loss = _epoch_passes(model, opt, loss_fn, x_train, y_train, batch_size, generator)
        history.append(mean_loss)
        if mean_loss < best * (1.0 - run.plateau_rel_tol):
            best = mean_loss
            since_best = 0
        else:
            since_best += 1
        if since_best >= run.plateau_patience:
            since_best = 0
            if batch_size < run.max_batch_size:
                batch_size = min(2 * batch_size, run.max_batch_size)
                logger.info("epoch %d: plateau, batch size -> %d", epoch, batch_size)
            elif lr > run.min_lr:
                lr = max(lr * run.lr_decay, run.min_lr)
                for group in opt.param_groups:
                    group["lr"] = lr
                logger.info("epoch %d: plateau, learning rate -> %g", epoch, lr)
    report = TrainReport(
        epochs_run=run.epochs,
        train_mse=_mse(model, x_train, y_train),
        test_mse=_mse(model, x_test, y_test) if len(dataset.test_idx) else float("nan"),
        final_batch_size=batch_size,
        final_lr=lr,
        history=history,
    )
    return model, report


def train_from_file(dataset_path: str, model_path: str,
                    run: TrainRun | None = None, split_seed: int = 0) -> TrainReport:
    """File-to-file training entry: loads, trains, saves model + sidecar."""
    dataset = load_dataset(dataset_path, split_seed=split_seed)
    model, report = train_mlp(dataset, run=run)
    save_model(
        model,
        model_path,
        extra={
            "dataset": dataset_path,
            "split_seed": split_seed,
            "split": {
                "train_ids": [int(dataset.ids[i]) for i in dataset.train_idx],
                "test_ids": [int(dataset.ids[i]) for i in dataset.test_idx],
            },
            "skipped_records": dataset.skipped,
            "train_mse": report.train_mse,
            "test_mse": report.test_mse,
        },
    )
    return report
