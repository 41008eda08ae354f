import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classtrack import motion
from classtrack.appearance import FeatureHistory
from classtrack.geometry import BoundingBox
from classtrack.scenario import ScenarioSpec, generate, misclassification_scenario, table1_suite
from classtrack.tracker import (
    ConfigError,
    Detection,
    SequencingError,
    Track,
    Tracker,
    TrackerConfig,
    TrackStatus,
    match_class,
    partition_by_class,
    run_sequence,
)


def _track(tid, cls, box, features=()):
    hist = FeatureHistory(50)
    for f in features:
        hist.push(f)
    return Track(tid, cls, motion.initiate(box), hist)


def _det(box, cls=0, emb=None, conf=0.9):
    return Detection(box, cls, conf, None if emb is None else np.asarray(emb, dtype=float))


B = BoundingBox


# -- config ------------------------------------------------------------------

def test_config_defaults():
    cfg = TrackerConfig()
    assert (cfg.stage1_gate, cfg.stage2_gate, cfg.n_init, cfg.max_age) == (1.0, 0.4, 3, 30)
    assert cfg.h == 50 and cfg.k == 1.0 and cfg.min_confidence == 0.5 and cfg.parallel is False


@pytest.mark.parametrize("field, value", [
    ("stage1_gate", 0.0), ("stage1_gate", 2.5), ("stage2_gate", 0.0), ("n_init", 0),
    ("max_age", 0), ("k", 0.0), ("min_confidence", 1.0), ("min_confidence", -0.1),
    ("matcher", "greedy"), ("h", 0),
])
def test_config_validation(field, value):
    with pytest.raises(ConfigError):
        TrackerConfig(**{field: value})


def test_config_file_roundtrip(tmp_path):
    cfg = TrackerConfig(stage2_gate=0.3, n_init=2, parallel=True, stage1_metric="iou")
    path = tmp_path / "tracker.ini"
    cfg.to_file(path)
    assert TrackerConfig.from_file(path) == cfg


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        TrackerConfig.from_file(tmp_path / "missing.ini")
    bad = tmp_path / "bad.ini"
    bad.write_text("[other]\nx = 1\n")
    with pytest.raises(ConfigError, match=r"\[tracker\]"):
        TrackerConfig.from_file(bad)
    bad.write_text("[tracker]\nn_init = three\n")
    with pytest.raises(ConfigError, match="n_init"):
        TrackerConfig.from_file(bad)
    bad.write_text("[tracker]\nunknown_key = 1\n")
    with pytest.raises(ConfigError, match="unknown"):
        TrackerConfig.from_file(bad)


def test_detection_confidence_validated():
    with pytest.raises(ValueError):
        Detection(B(0, 0, 1, 1), 0, 1.5)


# -- partitioning ------------------------------------------------------------

def test_partition_three_classes():
    tracks = [_track(i + 1, i // 2, B(100 * i, 0, 10, 10)) for i in range(6)]
    dets = [_det(B(100 * i, 0, 10, 10), i // 2) for i in range(6)]
    parts = partition_by_class(tracks, dets)
    assert list(parts) == [0, 1, 2]
    assert all((len(ts), len(ds)) == (2, 2) for ts, ds in parts.values())


def test_partition_single_class():
    tracks = [_track(i + 1, 4, B(0, 0, 5, 5)) for i in range(3)]
    assert list(partition_by_class(tracks, [])) == [4]


def test_partition_disjoint_classes():
    parts = partition_by_class([_track(1, 0, B(0, 0, 5, 5))], [_det(B(0, 0, 5, 5), 1)])
    assert len(parts[0][0]) == 1 and parts[0][1] == []
    assert parts[1][0] == [] and len(parts[1][1]) == 1


@settings(max_examples=50)
@given(st.lists(st.integers(0, 3), max_size=8), st.lists(st.integers(0, 3), max_size=8))
def test_partition_covers_everything(track_classes, det_classes):
    tracks = [_track(i + 1, c, B(0, 0, 5, 5)) for i, c in enumerate(track_classes)]
    dets = [_det(B(0, 0, 5, 5), c) for c in det_classes]
    parts = partition_by_class(tracks, dets)
    assert sorted(parts) == sorted(set(track_classes) | set(det_classes))
    assert sum(len(ts) for ts, _ in parts.values()) == len(tracks)
    assert sum(len(ds) for _, ds in parts.values()) == len(dets)
    for c, (ts, ds) in parts.items():
        assert all(t.class_id == c for t in ts) and all(d.class_id == c for d in ds)


# -- match_class -------------------------------------------------------------

def test_match_identical_box_stage1_only():
    box = B(10, 10, 20, 40)
    out = match_class([_track(1, 0, box, [[1, 0]])], [_det(box, emb=[1, 0])], TrackerConfig())
    assert out.matches == [(0, 0)]
    assert not out.diagnostics.stage2_invoked
    assert out.diagnostics.cosine_evaluations == 0


def test_match_far_box_recovered_by_appearance():
    track = _track(1, 0, B(0, 0, 20, 40), [[0.0, 1.0, 0.0]])
    det = _det(B(900, 500, 20, 40), emb=[0.0, 2.0, 0.0])
    out = match_class([track], [det], TrackerConfig())
    assert out.matches == [(0, 0)]
    assert out.diagnostics.stage2_invoked
    assert out.diagnostics.stage2_shape == (1, 1)


def test_match_far_box_without_embeddings_stays_unmatched():
    track = _track(1, 0, B(0, 0, 20, 40), [[0.0, 1.0]])
    out = match_class([track], [_det(B(900, 500, 20, 40))], TrackerConfig())
    assert out.matches == [] and out.unmatched_tracks == [0] and out.unmatched_detections == [0]
    assert not out.diagnostics.stage2_invoked


def test_match_appearance_gate():
    track = _track(1, 0, B(0, 0, 20, 40), [[1.0, 0.0]])
    det = _det(B(900, 500, 20, 40), emb=[0.5, 0.8])  # cosine cost ~0.47 > 0.4
    out = match_class([track], [det], TrackerConfig())
    assert out.matches == []


def test_match_class_rejects_mixed_classes():
    with pytest.raises(ValueError):
        match_class([_track(1, 0, B(0, 0, 5, 5))], [_det(B(0, 0, 5, 5), 1)], TrackerConfig())


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 5), st.integers(0, 5), st.integers(0, 2**32 - 1))
def test_match_outputs_cover_inputs(p, d, seed):
    rng = np.random.default_rng(seed)
    tracks = [_track(i + 1, 0, B(*rng.uniform(0, 200, 2), 20, 30), rng.normal(size=(2, 4))) for i in range(p)]
    dets = [_det(B(*rng.uniform(0, 200, 2), 20, 30), emb=rng.normal(size=4)) for _ in range(d)]
    out = match_class(tracks, dets, TrackerConfig())
    matched_t = [t for t, _ in out.matches]
    matched_d = [x for _, x in out.matches]
    assert sorted(matched_t + out.unmatched_tracks) == list(range(p))
    assert sorted(matched_d + out.unmatched_detections) == list(range(d))
    diag = out.diagnostics
    assert diag.cosine_evaluations <= diag.stage2_shape[0] * diag.stage2_shape[1] * 50


# -- lifecycle ---------------------------------------------------------------

def test_empty_first_frame():
    tracker = Tracker()
    result = tracker.step([], 1)
    assert result.outputs == [] and tracker.tracks == []


def test_sequencing_error():
    tracker = Tracker()
    tracker.step([], 5)
    with pytest.raises(SequencingError):
        tracker.step([], 5)
    with pytest.raises(SequencingError):
        tracker.step([], 3)


def test_confirmation_at_n_init():
    box = B(100, 100, 30, 60)
    results = run_sequence([[_det(box)] for _ in range(5)], TrackerConfig(n_init=3))
    assert [len(r.outputs) for r in results] == [0, 0, 1, 1, 1]
    assert results[2].outputs[0][0] == 1


def test_n_init_one_confirms_immediately():
    results = run_sequence([[_det(B(0, 0, 10, 10))]], TrackerConfig(n_init=1))
    assert len(results[0].outputs) == 1


def test_tentative_dropped_on_miss():
    box = B(100, 100, 30, 60)
    tracker = Tracker()
    tracker.step([_det(box)], 1)
    tracker.step([_det(box)], 2)
    tracker.step([], 3)
    assert tracker.tracks == []


def test_confirmed_deleted_after_max_age():
    box = B(100, 100, 30, 60)
    cfg = TrackerConfig(max_age=4)
    tracker = Tracker(cfg)
    for f in range(1, 4):
        tracker.step([_det(box)], f)
    assert tracker.tracks[0].is_confirmed
    for f in range(4, 4 + cfg.max_age):
        tracker.step([], f)
        assert len(tracker.tracks) == 1
    tracker.step([], 4 + cfg.max_age)
    assert tracker.tracks == []


def test_track_reacquired_after_gap_keeps_id():
    box = B(100, 100, 30, 60)
    frames = [[_det(box)]] * 4 + [[]] * 3 + [[_det(box)]] * 2
    results = run_sequence(frames)
    ids = {tid for r in results for tid, _, _ in r.outputs}
    assert ids == {1}
    assert results[-1].outputs and results[4].outputs == []


def test_low_confidence_dropped():
    box = B(100, 100, 30, 60)
    results = run_sequence([[_det(box, conf=0.3)]] * 5)
    assert all(r.outputs == [] for r in results)
    assert all(r.diagnostics.monolithic_shape == (0, 0) for r in results)


def test_track_status_and_counters():
    box = B(100, 100, 30, 60)
    tracker = Tracker()
    for f in range(1, 5):
        tracker.step([_det(box)], f)
    t = tracker.tracks[0]
    assert t.status is TrackStatus.CONFIRMED
    assert (t.hits, t.age, t.time_since_update) == (4, 4, 0)
    tracker.step([], 5)
    assert (t.hits, t.age, t.time_since_update) == (4, 5, 1)


def test_empty_sequence():
    assert run_sequence([]) == []


def test_mapping_input_and_first_frame():
    box = B(0, 0, 10, 10)
    res = run_sequence({7: [_det(box)], 9: [_det(box)]}, TrackerConfig(n_init=1))
    assert [r.frame_index for r in res] == [7, 9]
    res = run_sequence([[_det(box)]], first_frame=4)
    assert res[0].frame_index == 4


# -- sequence-level invariants ----------------------------------------------

def _noisy_multi_class(seed, counts=(3, 2, 2)):
    return generate(ScenarioSpec(class_counts=counts, num_frames=40, detection_noise=1.0,
                                 embedding_noise=0.05, seed=seed))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_class_isolation(seed):
    dets, _ = _noisy_multi_class(seed)
    tracker = Tracker()
    for f, frame in enumerate(dets, start=1):
        tracker.step(frame, f)
        for t in tracker.tracks:
            assert t.class_id in {d.class_id for d in frame} or t.time_since_update > 0
    for r in run_sequence(dets):
        ids = [tid for tid, _, _ in r.outputs]
        assert len(ids) == len(set(ids))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_track_class_never_changes(seed):
    dets, _ = _noisy_multi_class(seed)
    classes = {}
    for r in run_sequence(dets):
        for tid, cls, _ in r.outputs:
            assert classes.setdefault(tid, cls) == cls


@pytest.mark.parametrize("spec", table1_suite(num_frames=40), ids=lambda s: s.label)
def test_parallel_and_monolithic_agree(spec):
    dets, _ = generate(spec)
    base = run_sequence(dets)
    par = run_sequence(dets, TrackerConfig(parallel=True))
    mono = run_sequence(dets, TrackerConfig(matcher="monolithic"))
    outputs = [r.outputs for r in base]
    assert [r.outputs for r in par] == outputs
    assert [r.outputs for r in mono] == outputs


def test_parallel_agrees_under_noise_and_events():
    spec = ScenarioSpec(class_counts=(3, 3, 3), num_frames=60, detection_noise=2.0,
                        embedding_noise=0.1, seed=11)
    dets, _ = generate(spec)
    assert [r.outputs for r in run_sequence(dets)] == \
        [r.outputs for r in run_sequence(dets, TrackerConfig(parallel=True))]


def test_stage2_idle_when_stage1_matches_everything():
    dets, _ = generate(ScenarioSpec(class_counts=(2, 2, 2), num_frames=30))
    for r in run_sequence(dets):
        assert r.diagnostics.stage2_invocations == 0
        assert r.diagnostics.cosine_evaluations == 0


def test_diagnostics_shapes():
    dets, _ = generate(ScenarioSpec(class_counts=(2, 1, 3), num_frames=3))
    results = run_sequence(dets)
    assert results[0].diagnostics.class_shapes == {0: (0, 2), 1: (0, 1), 2: (0, 3)}
    assert results[1].diagnostics.class_shapes == {0: (2, 2), 1: (1, 1), 2: (3, 3)}
    assert results[1].diagnostics.monolithic_shape == (6, 6)
    assert set(results[1].diagnostics.per_class) == {0, 1, 2}


def test_misclassified_detection_spawns_track_in_other_class():
    spec = misclassification_scenario()
    dets, _ = generate(spec)
    tracker = Tracker()
    for f, frame in enumerate(dets, start=1):
        tracker.step(frame, f)
        if f == 12:
            bus_tracks = [t for t in tracker.tracks if t.class_id == 1]
            assert len(bus_tracks) == 3
    # the spurious bus track never gets confirmed
    assert sum(1 for t in tracker.tracks if t.class_id == 1) == 2


def test_no_embedding_means_no_stage2():
    spec = ScenarioSpec(class_counts=(2,), num_frames=20, seed=1)
    dets, _ = generate(spec)
    stripped = [[dataclasses.replace(d, embedding=None) for d in frame] for frame in dets]
    for r in run_sequence(stripped):
        assert r.diagnostics.stage2_invocations == 0
