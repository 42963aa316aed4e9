import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage as ndi

from medial_salience import synthetic
from medial_salience.exceptions import ParameterError
from medial_salience.graph import MedialBranch
from medial_salience.ingest import BinaryContourImage, trace_fragments
from medial_salience.pipeline import run
from medial_salience.salience import (MEASURES, BranchSalience, SalienceConfig,
                                      project_to_contours, ribbon_salience,
                                      separation_salience, taper_salience, windowed_salience,
                                      windowed_values, write_branch_csv)

from oracles import ribbon_quadrature, separation_quadrature, taper_quadrature


def straight(radius, s):
    """Window on the x axis sampled at arc lengths ``s``."""
    s = np.asarray(s, dtype=np.float64)
    return np.stack([s, np.zeros_like(s), radius(s)], axis=1)


def test_separation_constant_radius():
    s = np.arange(11.0)
    ten = separation_salience(straight(lambda t: np.full_like(t, 10.0), s))
    one = separation_salience(straight(lambda t: np.ones_like(t), s))
    assert ten == pytest.approx(0.9, abs=1e-12)
    assert one == pytest.approx(0.0, abs=1e-12)


def test_separation_linear_radius_matches_integral():
    s = np.arange(11.0)
    got = separation_salience(straight(lambda t: 5.0 + t, s))
    assert got == pytest.approx(1 - np.log(3) / 10, abs=0.01)
    assert got == pytest.approx(separation_quadrature(lambda t: 5.0 + t, 0, 10), abs=0.01)


@pytest.mark.parametrize("b", [0.5, 1.0, 3.0])
def test_ribbon_constant_slope(b):
    s = np.arange(11.0)
    got = ribbon_salience(straight(lambda t: 2.0 + b * t, s))
    assert got == pytest.approx(1 / np.sqrt(1 + b * b), abs=0.01)
    assert got == pytest.approx(ribbon_quadrature(lambda t: b, 0, 10), abs=0.01)


def test_ribbon_and_taper_of_constant_radius():
    w = straight(lambda t: np.full_like(t, 4.0), np.arange(11.0))
    assert ribbon_salience(w) == 1.0
    assert taper_salience(w) == 1.0


def test_taper_linear_radius():
    w = straight(lambda t: 2.0 + 0.5 * t, np.arange(11.0))
    assert taper_salience(w) == pytest.approx(1.0, abs=0.02)


def test_taper_quadratic_matches_quadrature():
    r = lambda t: 10.0 + t * t / 8.0
    want = taper_quadrature(r, lambda t: t / 4.0, lambda t: 0.25, -5.0, 5.0)
    got = taper_salience(straight(r, np.arange(-5.0, 5.5, 1.0)))
    assert got == pytest.approx(want, abs=0.02)
    # a finer grid converges on the same value
    fine = taper_salience(straight(r, np.linspace(-5.0, 5.0, 201)))
    assert fine == pytest.approx(want, abs=0.005)


def test_degenerate_windows():
    one = np.array([[0.0, 0.0, 4.0]])
    assert separation_salience(one) == pytest.approx(0.75)
    assert ribbon_salience(one) == 1.0
    assert taper_salience(one) == 1.0
    two = np.array([[0.0, 0.0, 4.0], [1.0, 0.0, 5.0]])
    assert taper_salience(two) == 1.0
    same = np.array([[0.0, 0.0, 4.0], [0.0, 0.0, 5.0]])
    assert ribbon_salience(same) == 1.0
    with pytest.raises(ParameterError):
        ribbon_salience(np.zeros((0, 3)))


@st.composite
def branches(draw, min_size=1):
    n = draw(st.integers(min_size, 40))
    turns = np.array(draw(st.lists(st.floats(-0.5, 0.5), min_size=n, max_size=n)))
    ang = np.cumsum(turns)
    x = np.concatenate([[0.0], np.cumsum(np.cos(ang))])[:n]
    y = np.concatenate([[0.0], np.cumsum(np.sin(ang))])[:n]
    r = np.array(draw(st.lists(st.floats(1.0, 50.0), min_size=n, max_size=n)))
    return MedialBranch(x, y, r, np.zeros(n))


@given(branches(), st.integers(1, 7))
def test_values_in_unit_interval(b, k):
    for m in MEASURES:
        v = windowed_salience(b, k, m)
        assert v.shape == (len(b),)
        assert np.all((v >= 0) & (v <= 1))


@given(branches(), st.integers(1, 7))
def test_reversal_invariance(b, k):
    for m in MEASURES:
        fwd = windowed_salience(b, k, m)
        back = windowed_salience(b.reversed(), k, m)[::-1]
        assert np.allclose(fwd, back, atol=1e-9)


@given(branches(), st.floats(0.1, 10.0))
def test_separation_grows_with_radius(b, c):
    k = 3
    lo = windowed_salience(b, k, "separation")
    hi = windowed_salience(MedialBranch(b.x, b.y, b.radius + c, b.angle), k, "separation")
    assert np.all(hi > lo)


@given(st.lists(branches(), min_size=1, max_size=5), st.integers(1, 6))
def test_batched_windows_match_one_window_at_a_time(bs, k):
    fn = {"separation": separation_salience, "ribbon": ribbon_salience,
          "taper": taper_salience}
    got = windowed_values(bs, k, MEASURES)
    for b, vals in zip(bs, got):
        pts = np.stack([b.x, b.y, b.radius], axis=1)
        for i in range(len(b)):
            win = pts[max(i - k, 0):i + k + 1]
            for m in MEASURES:
                assert vals[m][i] == pytest.approx(fn[m](win), abs=1e-12)


def test_window_is_clamped_at_ends():
    b = MedialBranch(np.arange(6.0), np.zeros(6), np.array([2.0, 2, 2, 2, 4, 8]), np.zeros(6))
    v = windowed_salience(b, 2, "separation")
    assert v[0] == pytest.approx(separation_salience(np.stack([b.x, b.y, b.radius], 1)[:3]))


def test_config_validation():
    SalienceConfig(measures="ribbon")
    for bad in ({"window": 0}, {"measures": ()}, {"measures": ("curvature",)},
                {"tau": 0.0}, {"tau": 0.7}, {"sigma": -1}, {"projection": "x"},
                {"connectivity": 6}, {"sample_count": 4}):
        with pytest.raises(ParameterError):
            SalienceConfig(**bad)
    assert SalienceConfig(measures=("taper", "separation")).measures == ("separation", "taper")


def _axial(res, row):
    best = None
    for bs in res.branch_values:
        b = bs.branch
        if len(b) > 3 and np.all(np.abs(b.y - row) < 1.5):
            if best is None or len(b) > len(best.branch):
                best = bs
    return best


def test_parallel_ribbon_is_constant():
    img, row, _ = synthetic.parallel_ribbon()
    bs = _axial(run(img), row)
    assert np.allclose(bs.values["ribbon"], 1.0)
    assert np.allclose(bs.values["taper"], 1.0)
    assert np.var(bs.values["separation"]) < 1e-3


def test_flare_taper_high_ribbon_lower_separation_rising():
    img, row, _ = synthetic.linear_flare()
    bs = _axial(run(img), row)
    o = np.argsort(bs.branch.x)
    v = {m: bs.values[m][o] for m in MEASURES}
    assert v["taper"].min() >= 0.98
    assert np.all(v["ribbon"] < v["taper"])
    assert np.all(np.diff(v["separation"]) > 0)


def test_dumbbell_varies():
    img, row, _ = synthetic.dumbbell()
    bs = _axial(run(img), row)
    for m in MEASURES:
        assert np.ptp(bs.values[m]) > 0.05


def test_slab_boundary_gets_centerline_separation():
    img, _ = synthetic.slab(20, 120)
    res = run(img)
    v = res.salience.contour_values["separation"][res.contours.mask]
    assert np.allclose(v, 0.9, atol=1e-9)
    assert res.salience.coverage["coverage"] == 1.0


def _flat_branch(row, value, n=30, radius=5.0):
    x = np.arange(5.0, 5.0 + n)
    b = MedialBranch(x, np.full(n, row), np.full(n, radius), np.full(n, np.pi / 2))
    return BranchSalience(b, {m: np.full(n, value) for m in MEASURES}, 0)


def test_contour_between_two_branches_keeps_max():
    m = np.zeros((21, 40), dtype=bool)
    m[10, :] = True
    img = BinaryContourImage(m)
    cfg = SalienceConfig()
    vals, report = project_to_contours([_flat_branch(5.0, 0.3), _flat_branch(15.0, 0.7)],
                                       img, cfg)
    line = vals["ribbon"][10]
    cast = slice(5, 35)
    assert np.allclose(line[cast], 0.7)
    # pixels past the branch ends take the nearest cast value along the line
    assert np.allclose(line, 0.7)
    assert report["unfilled"] == 0 and report["cast"] == 30
    vals, _ = project_to_contours([_flat_branch(15.0, 0.7), _flat_branch(5.0, 0.3)], img, cfg)
    assert np.allclose(vals["ribbon"][10], 0.7)


def test_uncast_fragment_defaults_to_zero():
    m = np.zeros((21, 60), dtype=bool)
    m[10, :30] = True
    m[3, 45:55] = True
    img = BinaryContourImage(m)
    vals, report = project_to_contours([_flat_branch(15.0, 0.6, n=20)], img, SalienceConfig())
    assert np.allclose(vals["separation"][10, :30], 0.6)
    assert np.all(vals["separation"][3, 45:55] == 0.0)
    assert report["unfilled"] == 10
    assert report["coverage"] == pytest.approx(30 / 40)
    assert np.all(np.isnan(vals["separation"][~m]))


@pytest.mark.parametrize("projection", ["spoke", "nearest"])
def test_every_contour_pixel_valued(projection):
    img = synthetic.multi_region_drawing(3)
    res = run(img, SalienceConfig(projection=projection))
    mask = res.contours.mask
    for m in MEASURES:
        v = res.salience.contour_values[m]
        assert np.all(np.isfinite(v[mask])) and np.all(np.isnan(v[~mask]))
        assert np.all((v[mask] >= 0) & (v[mask] <= 1))
    sk = res.salience.skeleton_values
    assert all(len(sk[m]) == len(res.skeleton) for m in MEASURES)


def test_road_borders_rank_high_on_ribbon():
    img, road = synthetic.road_scene()
    res = run(img)
    mask = res.contours.mask
    rib = res.salience.contour_values["ribbon"]
    near = ndi.binary_dilation(road) & mask
    median = np.median(rib[mask])
    assert np.mean(rib[near] >= median) > 0.85


def test_fill_follows_fragments():
    m = np.zeros((21, 40), dtype=bool)
    m[10, :] = True
    img = BinaryContourImage(m)
    frags = trace_fragments(img)
    a = _flat_branch(15.0, 0.2, n=10)
    bx = MedialBranch(np.arange(24.0, 34.0), np.full(10, 15.0), np.full(10, 5.0),
                      np.full(10, np.pi / 2))
    b = BranchSalience(bx, {m_: np.full(10, 0.8) for m_ in MEASURES}, 1)
    vals, _ = project_to_contours([a, b], img, SalienceConfig(), fragments=frags)
    line = vals["taper"][10]
    assert np.allclose(line[:15], 0.2) and np.allclose(line[24:], 0.8)
    # the gap splits by distance along the fragment; pixel 19 is 5 from
    # both cast runs and takes the larger value
    assert np.allclose(line[15:19], 0.2)
    assert np.allclose(line[19:24], 0.8)


def test_branch_csv(tmp_path):
    res = run(synthetic.parallel_ribbon()[0])
    write_branch_csv(res.branch_values, tmp_path / "b.csv", MEASURES)
    rows = list(csv.reader(open(tmp_path / "b.csv")))
    assert rows[0] == ["branch", "point", "x", "y", "radius", *MEASURES]
    assert len(rows) - 1 == sum(len(bs.branch) for bs in res.branch_values)
