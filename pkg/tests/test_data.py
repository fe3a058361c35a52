import numpy as np
import pytest

from emopipe import data
from emopipe import features as F
from emopipe.data import DatasetRecord, build_tensors, load_legend, stratified_split, synth_generate
from emopipe.errors import DuplicateImageId, InsufficientClassCount, ParseError


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def _lm_row(image_id, label="x", value=100.0):
    return ",".join([image_id, label] + [str(value)] * 136)


def _header():
    return "image_id,label," + ",".join(f"{a}{i}" for i in range(68) for a in "xy")


@pytest.fixture
def fixture_files(tmp_path):
    legend = _write(tmp_path / "legend.csv", "\n".join([
        "user.id,image,emotion",
        "jhamski,a.jpg,happiness",
        "bob,b.jpg,ANGER",
        "bob,c.jpg,neutral",
        "ann,d.jpg,happiness",
        "ann,e.jpg,Neutral",
    ]) + "\n")
    lm = _write(tmp_path / "lm.csv", "\n".join(
        [_header()] + [_lm_row(i) for i in ("a.jpg", "b.jpg", "d.jpg", "e.jpg")]) + "\n")
    return legend, lm


def test_load_legend_filters(fixture_files):
    ds = load_legend(*fixture_files)
    assert [r.image_id for r in ds.records] == ["d.jpg", "e.jpg"]
    assert ds.dropped.as_tuple() == (1, 1, 1)
    assert ds.class_labels == ["happiness", "neutral"]
    assert [r.label for r in ds.records] == ["happiness", "neutral"]


def test_empty_kept_labels(fixture_files):
    ds = load_legend(*fixture_files, kept_labels=[])
    assert len(ds) == 0


def test_filter_monotonicity(fixture_files):
    base = len(load_legend(*fixture_files, excluded_submitters=[]))
    more = len(load_legend(*fixture_files, excluded_submitters=["ann"]))
    assert more <= base


def test_parse_errors(tmp_path, fixture_files):
    legend, good = fixture_files
    bad = _write(tmp_path / "bad.csv", _header() + "\n" + "a.jpg,x,1,2\n")
    with pytest.raises(ParseError):
        load_legend(legend, bad)
    dup = _write(tmp_path / "dup.csv", "\n".join([_header(), _lm_row("a.jpg"), _lm_row("a.jpg")]))
    with pytest.raises(DuplicateImageId):
        load_legend(legend, dup)
    with pytest.raises(ParseError):
        load_legend(tmp_path / "missing.csv", good)


def _balanced(n_per_class):
    recs = [DatasetRecord(f"{label}{i}", label, np.zeros((68, 2)))
            for label in ("happiness", "neutral") for i in range(n_per_class)]
    return data.from_records(recs)


def test_stratified_split_counts():
    tr, va = stratified_split(_balanced(10), 2, seed=42)
    assert va.class_counts() == {"happiness": 2, "neutral": 2}
    assert tr.class_counts() == {"happiness": 8, "neutral": 8}
    ids_tr, ids_va = {r.image_id for r in tr.records}, {r.image_id for r in va.records}
    assert not ids_tr & ids_va
    assert ids_tr | ids_va == {r.image_id for r in _balanced(10).records}


def test_stratified_split_deterministic():
    a = stratified_split(_balanced(10), 3, seed=1)[1]
    b = stratified_split(_balanced(10), 3, seed=1)[1]
    assert [r.image_id for r in a.records] == [r.image_id for r in b.records]


def test_stratified_split_insufficient():
    with pytest.raises(InsufficientClassCount):
        stratified_split(_balanced(10), 11, seed=42)


def test_full_scale_split_shape():
    # 4961 + 191 happiness and 6267 + 191 neutral images, 191 per class held out
    recs = [DatasetRecord(f"h{i}", "happiness", np.zeros((68, 2))) for i in range(4961 + 191)]
    recs += [DatasetRecord(f"n{i}", "neutral", np.zeros((68, 2))) for i in range(6267 + 191)]
    tr, va = stratified_split(data.from_records(recs), 191, seed=0)
    assert tr.class_counts() == {"happiness": 4961, "neutral": 6267}
    assert va.class_counts() == {"happiness": 191, "neutral": 191}
    assert len(tr) == 11228 and len(va) == 382


def test_synth_zero_noise():
    ds = synth_generate(5, seed=0, jitter_sigma=0)
    happy = [r.landmarks for r in ds.records if r.label == "happiness"]
    neutral = [r.landmarks for r in ds.records if r.label == "neutral"]
    assert all(np.array_equal(h, happy[0]) for h in happy)
    diff = np.any(happy[0] != neutral[0], axis=1)
    assert set(np.flatnonzero(diff)) <= set(range(48, 68))
    assert diff[48] and diff[54]


def _corner_height(pts):
    # mouth corner height above the mouth centroid (pixels, y grows downward)
    return pts[list(range(48, 68)), 1].mean() - (pts[48, 1] + pts[54, 1]) / 2


def test_synth_separable_by_threshold():
    ds = synth_generate(200, seed=3, jitter_sigma=2)
    h = [_corner_height(r.landmarks) for r in ds.records if r.label == "happiness"]
    n = [_corner_height(r.landmarks) for r in ds.records if r.label == "neutral"]
    threshold = (_corner_height(data.prototype_face("happiness"))
                 + _corner_height(data.prototype_face("neutral"))) / 2
    assert min(h) > threshold > max(n)


def test_synth_deterministic_and_in_frame():
    a, b = synth_generate(20, seed=9), synth_generate(20, seed=9)
    assert all(x.landmarks.tobytes() == y.landmarks.tobytes() for x, y in zip(a.records, b.records))
    assert all(r.landmarks.min() >= 0 and r.landmarks.max() <= 350 for r in a.records)
    assert a.class_counts() == {"happiness": 20, "neutral": 20}


def test_build_tensors_raster_flip():
    ds = synth_generate(5, seed=0)
    x, y = build_tensors(ds, "raster", augment_flip=True)
    assert x.shape == (20, 350, 350)
    assert y.tolist() == [0] * 5 + [1] * 5 + [0] * 5 + [1] * 5
    assert np.array_equal(x[10], F.hflip(x[0]))


def test_build_tensors_modified_and_absolute():
    ds = synth_generate(3, seed=0)
    x, _ = build_tensors(ds, "modified")
    assert x.shape == (6, 114)
    corner = data.from_records([DatasetRecord("z", "neutral", np.full((68, 2), 350.0))])
    xa, ya = build_tensors(corner, "absolute")
    assert np.array_equal(xa[0], np.ones(136)) and ya.tolist() == [0]


def test_csv_roundtrip(tmp_path):
    ds = synth_generate(4, seed=2)
    data.write_landmarks_csv(tmp_path / "l.csv", ds.records)
    data.write_legend_csv(tmp_path / "g.csv", ds.records)
    back = load_legend(tmp_path / "g.csv", tmp_path / "l.csv")
    assert len(back) == 8
    for a, b in zip(ds.records, back.records):
        assert a.image_id == b.image_id and np.array_equal(a.landmarks, b.landmarks)
