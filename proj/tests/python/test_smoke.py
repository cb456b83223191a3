"""Smoke tests for the python bindings."""

import math

import numpy as np
import pytest

import gazemae as gm


def test_annotation_round_trip():
    records = [
        gm.AnnotationRecord("clip0", i, "face0", gm.BBox(1.5, 2.25, 10.0, 12.0), i % 2)
        for i in range(20)
    ]
    text = gm.serialize_annotations(records)
    back = gm.parse_annotations(text)
    assert len(back) == len(records)
    for a, b in zip(back, records):
        assert a == b


def test_parse_rejects_bad_lines():
    with pytest.raises(ValueError):
        gm.parse_annotations('{"clip_id":"c","frame_index":0,"face_id":"f",'
                             '"x":0,"y":0,"w":-3,"h":2,"label":0}')


def test_grouping_and_stats():
    records = [
        gm.AnnotationRecord("c", f, face, gm.BBox(0, 0, 4, 4), 1 if face == "a" else 0)
        for face in ("a", "b")
        for f in (3, 1, 2)
    ]
    tracks = gm.group_tracks(records)
    assert len(tracks) == 2
    assert [r.frame_index for r in tracks[0].records] == [1, 2, 3]
    stats = gm.dataset_stats(tracks)
    assert stats["n_positive"] == 3
    assert stats["n_negative"] == 3
    assert stats["ratio_neg_to_pos"] == 1.0


def test_windowing():
    records = [gm.AnnotationRecord("c", f, "face", gm.BBox(0, 0, 4, 4), 0)
               for f in (0, 1, 2, 4, 5, 6)]
    track = gm.group_tracks(records)[0]
    spec = gm.SamplingSpec(stride=1, half_window=3, resolution=32)
    centers = gm.select_centers(track, spec)
    assert centers == [0, 1, 2, 4, 5, 6]
    window = gm.build_window(track, 2, spec)
    assert window.slot_frames() == [None, 0, 1, 2, None, 4, 5]
    assert gm.window_manifest_line(window).startswith("c face 2 0")


def test_crop_and_resize_constant():
    image = np.full((64, 64, 3), 0.7, dtype=np.float32)
    out = gm.crop_and_resize(image, gm.BBox(0, 0, 64, 64), 32)
    assert out.shape == (32, 32, 3)
    np.testing.assert_allclose(out, 0.7, atol=1e-6)


def test_randaugment_decode():
    assert gm.decode_randaugment_spec("rand-m7-n4-mstd0.5-inc1") == (4, 7.0, 0.5, True)
    with pytest.raises(ValueError):
        gm.decode_randaugment_spec("rand-mX")


def test_tube_mask_count():
    mask = gm.generate_tube_mask(1, 7, 14, 14, 0.9)
    assert mask.sum() == 176
    assert gm.tube_mask_count(196, 0.9) == 176


def test_lr_schedule_anchors():
    sched = gm.ScheduleSpec(start_lr=1e-6, peak_lr=5e-6, end_lr=1e-6,
                            warmup_epochs=3, total_epochs=10, steps_per_epoch=10)
    assert gm.lr_at_step(sched, 0) == 1e-6
    assert gm.lr_at_step(sched, 30) == 5e-6
    assert gm.lr_at_step(sched, 100) == 1e-6
    assert math.isclose(gm.lr_at_step(sched, 65), 3e-6, rel_tol=1e-9)


def test_model_classify_deterministic():
    cfg = gm.ModelConfig(image_size=32, patch_size=16, frames=7,
                         embed_dim=16, depth=2, heads=2,
                         decoder_dim=8, decoder_depth=1, mask_ratio=0.75)
    assert cfg.tokens == 7 * 4
    model = gm.VideoMae(cfg, seed=11)
    rng = np.random.default_rng(0)
    raw = rng.random((7, 32, 32, 3)).astype(np.float32)
    window = gm.normalize_window(raw)

    (l0, l1), p = model.classify(window)
    (m0, m1), q = gm.VideoMae(cfg, seed=11).classify(window)
    assert (l0, l1) == (m0, m1)
    assert p == q
    assert 0.0 <= p <= 1.0
    assert math.isclose(math.exp(l0) + math.exp(l1),
                        math.exp(l0) + math.exp(l1))

    loss = model.mae_loss(window, mask_seed=3)
    assert loss > 0.0
    assert loss == model.mae_loss(window, mask_seed=3)


def test_generate_dataset(tmp_path):
    manifest = gm.generate_dataset(tmp_path / "data", n_clips=12, frames_per_clip=4,
                                   imbalance_ratio=3.0, seed=7)
    assert manifest["n_records"] == 48
    assert manifest["n_positive_clips"] == 3
    total = (len(manifest["train_clips"]) + len(manifest["val_clips"])
             + len(manifest["test_clips"]))
    assert total == 12
    records = gm.parse_annotations_file(tmp_path / "data" / "annotations.jsonl")
    assert len(records) == 48
