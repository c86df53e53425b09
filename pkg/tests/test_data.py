"""Synthetic data generation, JSONL persistence, and the batch sampler."""

import numpy as np
import pytest

from attrid.data import (Dataset, DatasetFormatError, GenConfig, LabelAccessError,
                         Sample, batch_stream, generate_pair, load_dataset,
                         save_dataset)


def tiny_cfg(**overrides):
    base = dict(n_identities=10, images_per_id_per_camera=2, n_cameras=2,
                m=4, input_dim=8, seed=0)
    base.update(overrides)
    return GenConfig(**base)


# ---------------------------------------------------------------------------
# generation

def test_default_config_counts():
    source, target = generate_pair(GenConfig())
    for d in (source, target):
        assert len(d) == 100 * 2 * 4 == 800
        assert d.n_identities() == 100
        assert d.m == 12
        assert d.input_dim == 48


def test_identity_pools_are_disjoint():
    source, target = generate_pair(tiny_cfg())
    assert not (set(source.identities) & set(target.identities))
    assert np.all(source.identities > 0) and np.all(target.identities > 0)


def test_generation_deterministic():
    a = generate_pair(tiny_cfg(seed=5))
    b = generate_pair(tiny_cfg(seed=5))
    assert a[0] == b[0] and a[1] == b[1]
    c = generate_pair(tiny_cfg(seed=6))
    assert a[0] != c[0]


def test_sample_bookkeeping():
    source, target = generate_pair(tiny_cfg())
    assert all(s.domain == "source" for s in source.samples)
    assert all(s.domain == "target" for s in target.samples)
    assert set(source.cameras) == {0, 1}
    per_id_cam = {}
    for s in source.samples:
        per_id_cam[(s.identity, s.camera)] = per_id_cam.get((s.identity, s.camera), 0) + 1
    assert set(per_id_cam.values()) == {2}


def test_attributes_consistent_within_identity():
    source, target = generate_pair(tiny_cfg(seed=3))
    for d in (source, target):
        by_id = {}
        for s in d.samples:
            if s.identity in by_id:
                np.testing.assert_array_equal(s.attributes, by_id[s.identity])
            else:
                by_id[s.identity] = s.attributes
        assert set(np.unique(d.attributes)) <= {0.0, 1.0}


def test_attribute_profiles_limit_distinct_rows():
    _, target = generate_pair(tiny_cfg(n_identities=40, n_attribute_profiles=3, seed=2))
    distinct = {tuple(s.attributes) for s in target.samples}
    assert len(distinct) <= 3


def test_sigma_d_zero_means_no_extra_gap():
    # with sigma_d = 0 both domains follow the identical generative law
    cfg0 = GenConfig(sigma_d=0.0, seed=1)
    source, target = generate_pair(cfg0)
    src_norm = np.linalg.norm(source.feature_matrix(), axis=1).mean()
    tgt_norm = np.linalg.norm(target.feature_matrix(), axis=1).mean()
    assert abs(src_norm - tgt_norm) / src_norm < 0.2


def test_domain_gap_grows_with_sigma_d():
    # mean feature displacement of the target relative to the sigma_d = 0 draw
    # is monotone in sigma_d
    gaps = []
    for sd in (0.0, 0.5, 1.5, 3.0):
        _, target = generate_pair(tiny_cfg(sigma_d=sd, seed=4))
        gaps.append(np.linalg.norm(target.feature_matrix()))
    base = gaps[0]
    deltas = [abs(g - base) for g in gaps]
    assert deltas[1] < deltas[2] < deltas[3]


def test_gen_config_validation():
    with pytest.raises(ValueError):
        tiny_cfg(n_cameras=1)
    with pytest.raises(ValueError):
        tiny_cfg(sigma_d=-1.0)
    with pytest.raises(ValueError):
        tiny_cfg(shift_noise=-0.5)
    with pytest.raises(ValueError):
        tiny_cfg(n_identities=0)
    with pytest.raises(ValueError):
        tiny_cfg(input_dim=2)  # below m


# ---------------------------------------------------------------------------
# label stripping

def test_unlabelled_view_blocks_label_access():
    source, _ = generate_pair(tiny_cfg())
    view = source.unlabelled_view()
    assert not view.labelled
    np.testing.assert_array_equal(view.feature_matrix(), source.feature_matrix())
    with pytest.raises(LabelAccessError):
        view.identities
    with pytest.raises(LabelAccessError):
        view.attributes
    # cameras stay readable: the evaluation protocol needs them
    assert len(view.cameras) == len(source)


# ---------------------------------------------------------------------------
# persistence

def test_jsonl_round_trip(tmp_path):
    source, _ = generate_pair(tiny_cfg(seed=7))
    path = tmp_path / "source.jsonl"
    save_dataset(source, path)
    assert load_dataset(path) == source


def test_gzip_round_trip(tmp_path):
    _, target = generate_pair(tiny_cfg(seed=8))
    path = tmp_path / "target.jsonl.gz"
    save_dataset(target, path)
    assert load_dataset(path) == target


def test_empty_file_loads_empty_dataset(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    d = load_dataset(path)
    assert len(d) == 0 and d.n_identities() == 0


def test_malformed_line_reports_line_number(tmp_path):
    source, _ = generate_pair(tiny_cfg())
    path = tmp_path / "bad.jsonl"
    save_dataset(source, path)
    lines = path.read_text().splitlines()
    lines[4] = "{not json"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(path)
    assert "line 5" in str(exc.value)


def test_inconsistent_attr_width_rejected(tmp_path):
    source, _ = generate_pair(tiny_cfg())
    path = tmp_path / "bad.jsonl"
    save_dataset(source, path)
    lines = path.read_text().splitlines()
    import json
    rec = json.loads(lines[2])
    rec["attrs"] = rec["attrs"][:-1]
    lines[2] = json.dumps(rec)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(path)
    assert "line 3" in str(exc.value)


def test_unknown_domain_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": 1, "cam": 0, "domain": "other", "attrs": [1], "feat": [0.0]}\n')
    with pytest.raises(DatasetFormatError):
        load_dataset(path)


# ---------------------------------------------------------------------------
# batch sampler

def test_batch_stream_epoch_covers_all_samples():
    stream = batch_stream(800, 8, seed=1)
    seen = np.concatenate([next(stream) for _ in range(100)])
    assert len(seen) == 800
    np.testing.assert_array_equal(np.sort(seen), np.arange(800))


def test_batch_stream_short_final_batch():
    stream = batch_stream(10, 4, seed=2)
    sizes = [len(next(stream)) for _ in range(3)]
    assert sizes == [4, 4, 2]


def test_batch_stream_deterministic():
    a = batch_stream(50, 8, seed=9)
    b = batch_stream(50, 8, seed=9)
    for _ in range(20):
        np.testing.assert_array_equal(next(a), next(b))


def test_batch_stream_fresh_shuffle_each_epoch():
    stream = batch_stream(64, 64, seed=3)
    assert not np.array_equal(next(stream), next(stream))


def test_batch_stream_validation():
    with pytest.raises(ValueError):
        batch_stream(0, 4, seed=0)
    with pytest.raises(ValueError):
        batch_stream(4, 8, seed=0)
