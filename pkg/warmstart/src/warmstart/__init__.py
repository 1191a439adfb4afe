"""Neural-network warm starts for continuously-coupled interferometer training."""

from warmstart.data import (
    Dataset,
    DatasetError,
    denormalize_beta,
    flatten_unitary,
    load_dataset,
    normalize_beta,
    unflatten_unitary,
)
from warmstart.model import MLPSpec, WarmStartMLP, load_model, save_model
from warmstart.predict import predict_file
from warmstart.train import TrainReport, TrainRun, train_from_file, train_mlp

__version__ = "0.1.0"
