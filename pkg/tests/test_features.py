import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emopipe import features as F
from emopipe.errors import EmptyPart


def seeded_face(seed=0):
    return np.random.default_rng(seed).uniform(20, 330, (68, 2))


coords = arrays(np.float64, (68, 2), elements=st.floats(0, 350, allow_nan=False))


def test_absolute_boundary():
    assert np.array_equal(F.absolute_features(np.full((68, 2), 350.0)), np.ones(136))


def test_absolute_midpoint():
    pts = np.zeros((68, 2))
    pts[0] = (175, 175)
    v = F.absolute_features(pts)
    assert v[0] == 0.5 and v[1] == 0.5


def test_absolute_matches_elementwise_oracle():
    pts = seeded_face(3)
    expected = []
    for x, y in pts.tolist():
        expected += [x / 350.0, y / 350.0]
    assert F.absolute_features(pts).tolist() == expected


@given(coords)
def test_absolute_range(pts):
    v = F.absolute_features(pts)
    assert v.shape == (136,)
    assert np.all((v >= 0) & (v <= 1))


def test_part_center():
    assert F.part_center([(0, 0), (2, 2)]).tolist() == [1, 1]
    assert F.part_center([(5, 7)]).tolist() == [5, 7]
    with pytest.raises(EmptyPart):
        F.part_center([])


def test_part_center_summation_oracle():
    mouth = seeded_face(1)[48:68]
    sx = sy = 0.0
    for x, y in mouth.tolist():
        sx += x
        sy += y
    np.testing.assert_allclose(F.part_center(mouth), [sx / 20, sy / 20], rtol=1e-14)


def test_modified_length_from_layout():
    # 4 outline values + (center + 20 mouth pts) + (center + 9 nose pts)
    # + 2 x (center + 6 eye pts + 5 brow pts), two values each
    assert 4 + 2 * (1 + 20) + 2 * (1 + 9) + 2 * 2 * (1 + 6 + 5) == 114
    assert F.modified_features(seeded_face()).shape == (114,)
    assert F.MODIFIED_DIM == 114


def test_modified_degenerate_face():
    v = F.modified_features(np.full((68, 2), 100.0))
    centers = [0, 1, 4, 5, 46, 47, 66, 67, 90, 91]
    assert np.allclose(v[centers], 100 / 350)
    assert np.all(np.delete(v, centers) == 0)


def _modified_oracle(pts):
    """Straight-line rebuild of the modified layout."""
    def rel(idx, c):
        out = []
        for i in idx:
            out += [pts[i][0] - c[0], pts[i][1] - c[1]]
        return out

    def mean(idx):
        return [sum(pts[i][0] for i in idx) / len(idx), sum(pts[i][1] for i in idx) / len(idx)]

    jx = [pts[i][0] for i in range(17)]
    jy = [pts[i][1] for i in range(17)]
    out = [(min(jx) + max(jx)) / 2, (min(jy) + max(jy)) / 2, max(jx) - min(jx), max(jy) - min(jy)]
    mouth, nose = range(48, 68), range(27, 36)
    reye, leye = range(36, 42), range(42, 48)
    for part in (mouth, nose):
        c = mean(part)
        out += c + rel(part, c)
    for eye, brow in ((reye, range(17, 22)), (leye, range(22, 27))):
        c = mean(eye)
        out += c + rel(eye, c) + rel(brow, c)
    return [v / 350 for v in out]


def test_modified_matches_oracle():
    pts = seeded_face(5)
    np.testing.assert_allclose(F.modified_features(pts), _modified_oracle(pts.tolist()),
                               rtol=0, atol=1e-14)


CENTER_X = [0, 4, 46, 66, 90]
CENTER_Y = [1, 5, 47, 67, 91]


def test_modified_translation_by_ten():
    pts = seeded_face(2)
    a, b = F.modified_features(pts), F.modified_features(pts + 10)
    centers = CENTER_X + CENTER_Y
    np.testing.assert_allclose(np.delete(b, centers), np.delete(a, centers), atol=1e-12)
    np.testing.assert_allclose(b[centers] - a[centers], 10 / 350, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(coords, st.floats(-200, 200), st.floats(-200, 200))
def test_modified_translation_invariance(pts, dx, dy):
    a = F.modified_features(pts)
    b = F.modified_features(pts + [dx, dy])
    fixed = np.delete(np.arange(114), CENTER_X + CENTER_Y)
    assert np.max(np.abs(a[fixed] - b[fixed])) < 1e-9
    assert np.max(np.abs(b[CENTER_X] - a[CENTER_X] - dx / 350)) < 1e-9
    assert np.max(np.abs(b[CENTER_Y] - a[CENTER_Y] - dy / 350)) < 1e-9


def test_rasterize_coincident_points():
    g = F.rasterize(np.tile([10.0, 20.0], (68, 1)))
    assert g.shape == (350, 350)
    assert g.sum() == 1 and g[20, 10] == 1


def test_rasterize_round_then_clamp():
    pts = np.full((68, 2), 100.0)
    pts[0] = (350.4, -2.0)
    g = F.rasterize(pts)
    assert g[0, 349] == 1
    assert g.sum() == 2


def test_rasterize_rounds_half_away_from_zero():
    pts = np.full((68, 2), 100.0)
    pts[0] = (10.5, 20.5)
    assert F.rasterize(pts)[21, 11] == 1


def test_rasterize_distinct_integer_points():
    flat = np.random.default_rng(4).choice(350 * 350, 68, replace=False)
    pts = np.stack([flat % 350, flat // 350], axis=1).astype(float)
    g = F.rasterize(pts)
    assert g.sum() == 68
    assert all(g[int(y), int(x)] == 1 for x, y in pts)


@given(arrays(np.float64, (68, 2), elements=st.floats(-50, 400, allow_nan=False)))
def test_rasterize_cell_count(pts):
    assert 1 <= F.rasterize(pts).sum() <= 68


def test_rasterize_smaller_grid_scales_coordinates():
    g = F.rasterize(np.full((68, 2), 175.0), grid_size=16)
    assert g.shape == (16, 16)
    assert g[8, 8] == 1


def test_hflip_boundary():
    g = np.zeros((350, 350), np.uint8)
    g[5, 0] = 1
    f = F.hflip(g)
    assert f[5, 349] == 1 and f.sum() == 1


def test_hflip_involution_and_histogram():
    g = F.rasterize(seeded_face(8))
    assert np.array_equal(F.hflip(F.hflip(g)), g)
    hist = [int(g[:, c].sum()) for c in range(350)]
    assert [int(v) for v in F.hflip(g).sum(axis=0)] == hist[::-1]
    assert F.hflip(g).sum() == g.sum()


def test_rejects_wrong_point_count():
    with pytest.raises(ValueError):
        F.absolute_features(np.zeros((67, 2)))
    with pytest.raises(ValueError):
        F.modified_features(np.full((68, 2), np.nan))
