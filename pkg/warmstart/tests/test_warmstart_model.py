"""Network architecture, prediction range, and the save/load round trip."""

import numpy as np
import torch

from warmstart.model import MLPSpec, WarmStartMLP, load_model, save_model


def _spec(m=4):
    return MLPSpec(input_dim=2 * m * m, output_dim=m)


def test_architecture_layers():
    model = WarmStartMLP(_spec())
    linears = [l for l in model.net if isinstance(l, torch.nn.Linear)]
    assert [l.out_features for l in linears] == [256, 128, 96, 64, 4]
    assert linears[0].in_features == 32
    assert any(isinstance(l, torch.nn.ELU) for l in model.net)
    assert any(isinstance(l, torch.nn.Dropout) for l in model.net)
    assert isinstance(model.net[-1], torch.nn.Sigmoid)


def test_predictions_in_physical_range():
    torch.manual_seed(0)
    model = WarmStartMLP(_spec())
    x = np.random.default_rng(1).standard_normal((50, 32)).astype(np.float32)
    beta = model.predict_beta(x)
    assert beta.shape == (50, 4)
    assert np.all(beta >= 0.7) and np.all(beta <= 1.3)


def test_inference_deterministic():
    # dropout is disabled in eval mode, so repeated calls agree exactly
    torch.manual_seed(2)
    model = WarmStartMLP(_spec())
    x = np.random.default_rng(3).standard_normal((8, 32)).astype(np.float32)
    assert np.array_equal(model.predict_beta(x), model.predict_beta(x))


def test_save_load_round_trip(tmp_path):
    torch.manual_seed(4)
    model = WarmStartMLP(_spec(m=3))
    path = str(tmp_path / "model.pt")
    save_model(model, path, extra={"split_seed": 7})
    loaded, sidecar = load_model(path)
    assert sidecar["spec"]["input_dim"] == 18
    assert sidecar["split_seed"] == 7
    assert loaded.spec == model.spec
    x = np.random.default_rng(5).standard_normal((4, 18)).astype(np.float32)
    assert np.array_equal(loaded.predict_beta(x), model.predict_beta(x))


def test_spec_json_round_trip():
    spec = _spec(m=5)
    assert MLPSpec.from_json(spec.to_json()) == spec
