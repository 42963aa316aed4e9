import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from skimage.draw import circle_perimeter

from medial_salience import synthetic
from medial_salience.aof import Skeleton
from medial_salience.graph import (END, ISOLATED, JUNCTION, REGULAR, MedialBranch,
                                   branch_tangents, classify_points, partition_branches,
                                   resample_branch, skeleton_tangents, smooth_branch)
from medial_salience.ingest import BinaryContourImage, thin_to_unit_width
from medial_salience.pipeline import skeletonize

from oracles import brute_degree


def skeleton_from_mask(mask, radius=None, labels=None):
    ys, xs = np.nonzero(mask)
    n = ys.size
    r = np.full(n, 3.0) if radius is None else np.asarray(radius, dtype=np.float64)[ys, xs]
    lab = np.ones(n, dtype=np.int32) if labels is None else labels[ys, xs].astype(np.int32)
    return Skeleton(xs.astype(np.int64), ys.astype(np.int64), r, np.full(n, -0.5),
                    np.full(n, 0.5), lab, mask.shape)


def y_mask():
    m = np.zeros((30, 30), dtype=bool)
    m[15, 3:16] = True
    for k in range(1, 11):
        m[15 - k, 15 + k] = True
        m[15 + k, 15 + k] = True
    return m


def test_straight_line_has_two_ends():
    m = np.zeros((10, 20), dtype=bool)
    m[5, 2:18] = True
    lab = classify_points(skeleton_from_mask(m))
    assert (lab == END).sum() == 2
    assert (lab == REGULAR).sum() == 14


def test_y_has_three_ends_one_junction_three_branches():
    sk = skeleton_from_mask(y_mask())
    lab = classify_points(sk)
    assert (lab == END).sum() == 3
    g = partition_branches(sk)
    assert len(g.branches) == 3
    assert len(g.junctions) == 1 and len(g.endpoints) == 3
    jx, jy = g.junctions[0]
    assert abs(jx - 15) <= 1 and abs(jy - 15) <= 1


def test_lone_pixel_is_isolated():
    m = np.zeros((5, 5), dtype=bool)
    m[2, 2] = True
    sk = skeleton_from_mask(m)
    assert classify_points(sk).tolist() == [ISOLATED]
    g = partition_branches(sk)
    assert len(g.branches) == 1 and len(g.branches[0]) == 1


@st.composite
def thin_masks(draw):
    h = draw(st.integers(8, 24))
    w = draw(st.integers(8, 24))
    bits = draw(st.lists(st.booleans(), min_size=h * w, max_size=h * w))
    m = np.array(bits, dtype=bool).reshape(h, w)
    return thin_to_unit_width(BinaryContourImage(m)).mask


@given(thin_masks())
def test_classes_match_ring_run_oracle(mask):
    if not mask.any():
        return
    sk = skeleton_from_mask(mask)
    deg = brute_degree(mask)[sk.y, sk.x]
    want = np.where(deg == 0, ISOLATED, np.where(deg == 1, END,
                                                 np.where(deg == 2, REGULAR, JUNCTION)))
    assert np.array_equal(classify_points(sk), want)


def _check_partition(sk):
    g = partition_branches(sk)
    lab = classify_points(sk)
    covered = np.zeros(len(sk), dtype=np.int64)
    interior = np.zeros(len(sk), dtype=np.int64)
    for b in g.branches:
        idx = b.index
        covered[idx] += 1
        inner = idx if b.cyclic else idx[1:-1]
        interior[inner] += 1
        assert np.all(lab[inner] == REGULAR)
        if len(b) > 1:
            # consecutive points are 8-neighbours
            step = np.maximum(np.abs(np.diff(b.x)), np.abs(np.diff(b.y)))
            assert np.all(step == 1)
            assert np.all(np.diff(b.arc_length) >= 1.0 - 1e-9)
            assert np.all(np.diff(b.arc_length) <= np.sqrt(2) + 1e-12)
    assert np.all(covered >= 1)
    regular = lab == REGULAR
    assert np.all(interior[regular] <= 1)
    return g, interior, regular


@given(thin_masks())
def test_partition_covers_every_point(mask):
    if not mask.any():
        return
    _check_partition(skeleton_from_mask(mask))


@pytest.mark.parametrize("make", [synthetic.rectangle, synthetic.dumbbell,
                                  synthetic.linear_flare, synthetic.annulus])
def test_partition_property_on_skeletons(make):
    res = skeletonize(make()[0])
    g, interior, regular = _check_partition(res.skeleton)
    # every regular point sits inside exactly one branch
    assert interior[regular].sum() == regular.sum()


def test_rectangle_topology():
    res = skeletonize(synthetic.rectangle()[0])
    inner = [b for b in res.graph.branches if b.region == res.regions.labels[20, 20]]
    assert len(inner) == 5


def test_annulus_is_one_cyclic_branch_cut_at_min_radius():
    img, c = synthetic.annulus()
    res = skeletonize(img)
    ring = res.regions.labels[c[1], c[0] + 18]
    loops = [b for b in res.graph.branches if b.region == ring]
    assert len(loops) == 1 and loops[0].cyclic
    r = loops[0].radius
    assert r[0] == r.min()


def test_regions_are_not_linked():
    m = np.zeros((12, 12), dtype=bool)
    m[5, 1:11] = True
    labels = np.zeros((12, 12), dtype=np.int32)
    labels[:, :6] = 1
    labels[:, 6:] = 2
    g = partition_branches(skeleton_from_mask(m, labels=labels))
    assert len(g.branches) == 2
    assert sorted(b.region for b in g.branches) == [1, 2]


def test_json_dump(tmp_path):
    g = partition_branches(skeleton_from_mask(y_mask()))
    g.to_json(tmp_path / "g.json")
    doc = json.loads((tmp_path / "g.json").read_text())
    assert len(doc["branches"]) == 3 and len(doc["junctions"]) == 1
    assert set(doc["branches"][0]) >= {"x", "y", "radius", "object_angle"}


def _branch(x, y, r=None):
    x = np.asarray(x, dtype=np.float64)
    r = np.full(x.size, 4.0) if r is None else r
    return MedialBranch(x, np.asarray(y, dtype=np.float64), r, np.zeros(x.size))


def test_resample_uniform_straight_branch_is_identity():
    b = _branch(np.arange(20), np.full(20, 3.0), 2.0 + 0.1 * np.arange(20))
    rb = resample_branch(b)
    for a in ("x", "y", "radius"):
        assert np.allclose(getattr(rb, a), getattr(b, a), atol=1e-9)


def test_resample_staircase_is_uniform():
    k = 25
    b = _branch(np.arange(k + 1), np.arange(k + 1))
    rb = resample_branch(b)
    steps = rb.steps
    n = len(steps)
    assert np.allclose(steps, steps[0], atol=1e-12)
    assert abs(steps[0] - 1.0) <= 0.5 / n + 1e-12
    assert rb.length == pytest.approx(b.length, rel=1e-12)


def test_quarter_circle_length():
    rr, cc = circle_perimeter(30, 30, 20)
    sel = (rr <= 30) & (cc >= 30)
    y, x = rr[sel], cc[sel]
    o = np.argsort(np.arctan2(30 - y, x - 30))
    b = _branch(x[o], y[o])
    rb = resample_branch(smooth_branch(b, 1.0))
    assert rb.length == pytest.approx(10 * np.pi, rel=0.02)


@given(st.lists(st.floats(-0.4, 0.4), min_size=4, max_size=40),
       st.floats(0.3, 3.0))
def test_resample_keeps_length_of_smooth_curves(turns, spacing):
    ang = np.cumsum(turns)
    x = np.concatenate([[0.0], np.cumsum(3.0 * np.cos(ang))])
    y = np.concatenate([[0.0], np.cumsum(3.0 * np.sin(ang))])
    b = _branch(x, y)
    rb = resample_branch(b, spacing)
    assert rb.length == pytest.approx(b.length, rel=0.01)
    assert np.allclose(rb.steps, rb.steps[0], rtol=0.05)
    assert np.allclose([rb.x[0], rb.y[0], rb.x[-1], rb.y[-1]], [x[0], y[0], x[-1], y[-1]])


@given(st.lists(st.floats(-0.4, 0.4), min_size=4, max_size=40))
def test_resample_reversal(turns):
    ang = np.cumsum(turns)
    x = np.concatenate([[0.0], np.cumsum(2.0 * np.cos(ang))])
    y = np.concatenate([[0.0], np.cumsum(2.0 * np.sin(ang))])
    b = _branch(x, y, 3.0 + np.arange(x.size) * 0.2)
    fwd = resample_branch(b)
    back = resample_branch(b.reversed()).reversed()
    assert fwd.length == pytest.approx(b.reversed().length)
    for a in ("x", "y", "radius"):
        assert np.allclose(getattr(fwd, a), getattr(back, a), atol=1e-9)


def test_smoothing_keeps_straight_branches_and_linear_radius():
    b = _branch(np.arange(15), 2.0 * np.arange(15), 1.0 + 0.5 * np.arange(15))
    sb = smooth_branch(b, 1.0, 3.0)
    assert np.allclose(sb.x, b.x) and np.allclose(sb.y, b.y)
    assert np.allclose(sb.radius, b.radius)


def test_tangents_point_toward_decreasing_radius():
    b = _branch(np.arange(10), np.zeros(10), 10.0 - np.arange(10))
    t = branch_tangents(b)
    assert np.allclose(t, [[1.0, 0.0]] * 10)
    t = branch_tangents(b.reversed())
    assert np.allclose(t, [[1.0, 0.0]] * 10)


def test_skeleton_tangents_cover_branch_points():
    res = skeletonize(synthetic.parallel_ribbon()[0])
    t = skeleton_tangents(res.skeleton, res.graph)
    assert t.shape == (len(res.skeleton), 2)
    ok = np.all(np.isfinite(t), axis=1)
    assert ok.mean() > 0.9
    assert np.allclose(np.hypot(t[ok, 0], t[ok, 1]), 1.0)
