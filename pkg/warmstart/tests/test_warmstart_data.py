"""Dataset parsing, flattening, normalization, and the train/test split."""

import json

import numpy as np
import pytest

from warmstart.data import (
    DatasetError,
    denormalize_beta,
    flatten_unitary,
    load_dataset,
    normalize_beta,
    unflatten_unitary,
)


def test_flatten_round_trip():
    rng = np.random.default_rng(0)
    m = 5
    u = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    flat = flatten_unitary(u.real, u.imag)
    assert flat.shape == (2 * m * m,)
    back = unflatten_unitary(flat.astype(np.float64), m)
    assert np.allclose(back, u, atol=1e-6)  # float32 staging
    with pytest.raises(DatasetError):
        unflatten_unitary(flat[:-1], m)


def test_beta_normalization_inverse():
    beta = np.array([0.7, 1.0, 1.3])
    y = normalize_beta(beta)
    assert np.allclose(y, [0.0, 0.5, 1.0])
    assert np.allclose(denormalize_beta(y), beta, atol=1e-6)


def test_load_dataset_shapes_and_split(small_dataset):
    ds = load_dataset(small_dataset, split_seed=3)
    assert ds.m == 6
    assert ds.inputs.shape == (300, 72)
    assert ds.targets.shape == (300, 6)
    assert np.all(ds.targets >= 0.0) and np.all(ds.targets <= 1.0)
    assert len(ds.train_idx) == 240 and len(ds.test_idx) == 60
    assert set(ds.train_idx).isdisjoint(ds.test_idx)
    assert ds.skipped == 0


def test_split_is_seeded(small_dataset):
    a = load_dataset(small_dataset, split_seed=1)
    b = load_dataset(small_dataset, split_seed=1)
    c = load_dataset(small_dataset, split_seed=2)
    assert np.array_equal(a.train_idx, b.train_idx)
    assert not np.array_equal(a.train_idx, c.train_idx)


def test_malformed_records_skipped(small_dataset, tmp_path):
    with open(small_dataset) as fh:
        lines = fh.readlines()
    lines.insert(3, '{"id": 9999, "beta": [1.0]}\n')  # wrong shapes
    lines.insert(5, "not json at all\n")
    path = tmp_path / "dirty.jsonl"
    path.write_text("".join(lines))
    ds = load_dataset(str(path))
    assert ds.skipped == 2
    assert len(ds.ids) == 300


def test_missing_meta_rejected(tmp_path):
    path = tmp_path / "no_meta.jsonl"
    path.write_text('{"id": 0, "beta": [1.0]}\n')
    with pytest.raises(DatasetError):
        load_dataset(str(path))


def test_empty_dataset_rejected(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text(json.dumps({"meta": {"m": 4}}) + "\n")
    with pytest.raises(DatasetError):
        load_dataset(str(path))
