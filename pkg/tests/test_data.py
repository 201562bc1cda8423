import json

import numpy as np
import pytest

from rulegrad.data import (SyntheticSpec, ZslDataset, add_feature_noise, binarize_attributes,
                           generate_synthetic, load_dataset, save_dataset)
from rulegrad.errors import ContractError, DataError


def test_synthetic_counts():
    ds = generate_synthetic(SyntheticSpec(n_hypernyms=5, classes_per_hypernym=4,
                                          unseen_per_hypernym=1))
    assert ds.n_classes == 20
    assert len(ds.seen) == 15 and len(ds.unseen) == 5
    assert set(ds.train_y.tolist()) == set(ds.seen)
    assert set(ds.test_y.tolist()) == set(range(20))
    for h, members in ds.rules.hypernyms.items():
        assert len(members) == 4
        assert len(set(members) & set(ds.unseen)) == 1


def test_synthetic_is_deterministic():
    a = generate_synthetic(SyntheticSpec(seed=3))
    b = generate_synthetic(SyntheticSpec(seed=3))
    assert a == b
    assert a.train_x.tobytes() == b.train_x.tobytes()
    assert not generate_synthetic(SyntheticSpec(seed=4)) == a


def test_synthetic_noise_free_nearest_prototype_oracle():
    ds = generate_synthetic(SyntheticSpec(sigma=0.0, seed=1))
    protos = np.stack([ds.train_x[ds.train_y == c].mean(axis=0) for c in ds.seen])
    d = ((ds.train_x[:, None, :] - protos[None]) ** 2).sum(-1)
    pred = np.array(ds.seen)[d.argmin(axis=1)]
    assert np.mean(pred == ds.train_y) == 1.0


def test_synthetic_spec_validation():
    with pytest.raises(ContractError):
        generate_synthetic(SyntheticSpec(classes_per_hypernym=3, unseen_per_hypernym=3))
    with pytest.raises(ContractError):
        generate_synthetic(SyntheticSpec(sigma=-1.0))


def test_roundtrip(tmp_path, small_dataset):
    save_dataset(small_dataset, tmp_path / "d")
    assert load_dataset(tmp_path / "d") == small_dataset


def test_roundtrip_with_attribute_embeddings(tmp_path, small_dataset):
    ds = small_dataset
    with_attr = ZslDataset(ds.train_x, ds.train_y, ds.test_x, ds.test_y, ds.class_emb,
                           ds.hypernym_emb, ds.seen, ds.unseen, ds.rules, ds.class_names,
                           np.ones((len(ds.rules.attributes), ds.class_emb.shape[1])), "x")
    save_dataset(with_attr, tmp_path / "d")
    back = load_dataset(tmp_path / "d")
    assert back == with_attr and back.attribute_emb is not None


def test_f64_files_are_little_endian_row_major(tmp_path, small_dataset):
    save_dataset(small_dataset, tmp_path / "d")
    raw = (tmp_path / "d" / "class_embeddings.f64").read_bytes()
    assert raw == small_dataset.class_emb.astype("<f8").tobytes(order="C")


def _edit_manifest(path, fn):
    m = json.loads((path / "manifest.json").read_text())
    fn(m)
    (path / "manifest.json").write_text(json.dumps(m))


def test_overlapping_partitions_rejected(tmp_path, small_dataset):
    d = save_dataset(small_dataset, tmp_path / "d")
    u = small_dataset.unseen[0]
    _edit_manifest(d, lambda m: m["seen"].append(u))
    with pytest.raises(DataError, match=rf"overlap.*\[{u}\]"):
        load_dataset(d)


def test_label_count_mismatch_rejected(tmp_path, small_dataset):
    d = save_dataset(small_dataset, tmp_path / "d")
    lines = (d / "train.labels").read_text().splitlines()
    (d / "train.labels").write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(DataError, match=rf"{len(lines) - 1}.*{len(lines)}"):
        load_dataset(d)


def test_feature_shape_mismatch_rejected(tmp_path, small_dataset):
    d = save_dataset(small_dataset, tmp_path / "d")
    raw = (d / "test_features.f64").read_bytes()
    (d / "test_features.f64").write_bytes(raw[:-8])
    with pytest.raises(DataError, match="test_features.f64"):
        load_dataset(d)


def test_missing_file_rejected(tmp_path, small_dataset):
    d = save_dataset(small_dataset, tmp_path / "d")
    (d / "hypernym_embeddings.f64").unlink()
    with pytest.raises(DataError, match="missing file"):
        load_dataset(d)
    with pytest.raises(DataError, match="missing file"):
        load_dataset(tmp_path / "nowhere")


def test_dangling_rule_index_rejected(tmp_path, small_dataset):
    d = save_dataset(small_dataset, tmp_path / "d")
    _edit_manifest(d, lambda m: m["hypernym_map"]["h0"].append(999))
    with pytest.raises(DataError, match="999"):
        load_dataset(d)


def test_degenerate_attributes_dropped_on_load(tmp_path, small_dataset):
    d = save_dataset(small_dataset, tmp_path / "d")
    n = small_dataset.n_classes

    def add(m):
        m["attribute_map"]["everyone"] = list(range(n))
        m["counts"]["attributes"] += 1

    _edit_manifest(d, add)
    with pytest.warns(UserWarning, match="everyone"):
        ds = load_dataset(d)
    assert "everyone" not in ds.rules.attributes


def test_binarize_attributes():
    m = np.array([[0.75, 0.1, 0.9], [0.2, 0.0, 0.8], [0.9, 0.3, 0.76]])
    with pytest.warns(UserWarning):
        out = binarize_attributes(m, names=["a", "b", "c"])
    # "b" is empty and "c" is universal
    assert out == {"a": [0, 2]}
    with pytest.raises(ContractError):
        binarize_attributes(m + 1.0)
    with pytest.raises(ContractError):
        binarize_attributes(m, threshold=1.0)


def test_binarize_all_zero_drops_everything():
    with pytest.warns(UserWarning):
        assert binarize_attributes(np.zeros((4, 3))) == {}


def test_feature_noise():
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert add_feature_noise(x, 0.0).tobytes() == x.tobytes()
    a, b = add_feature_noise(x, 0.5, seed=1), add_feature_noise(x, 0.5, seed=1)
    assert a.tobytes() == b.tobytes() and not np.array_equal(a, x)
    with pytest.raises(ContractError):
        add_feature_noise(x, -0.1)


def test_feature_noise_statistics():
    n = add_feature_noise(np.zeros(10**6), 0.5, seed=2)
    assert abs(n.mean()) < 3 * 0.5 / 1e3
    assert n.std() == pytest.approx(0.5, rel=1e-2)


def test_in_memory_validation(small_dataset):
    ds = small_dataset
    with pytest.raises(DataError, match="non-seen"):
        ZslDataset(ds.train_x, np.full_like(ds.train_y, ds.unseen[0]), ds.test_x, ds.test_y,
                   ds.class_emb, ds.hypernym_emb, ds.seen, ds.unseen, ds.rules)
    with pytest.raises(DataError, match="width"):
        ZslDataset(ds.train_x, ds.train_y, ds.test_x[:, :-1], ds.test_y, ds.class_emb,
                   ds.hypernym_emb, ds.seen, ds.unseen, ds.rules)
