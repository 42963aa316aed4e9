"""Separation, ribbon and taper salience along medial branches, and their
transfer onto the contour pixels.

All three measures are ratios of weighted sums over a window of branch
points; the weights are trapezoid arc-length weights, derivatives are taken
with respect to arc length.

* separation: ``1 - mean(1/R)``
* ribbon: ``L / L_psi`` with ``L_psi = sum w sqrt(|C'|^2 + R'^2)``
* taper: ``L / L_psi'`` with ``L_psi' = sum w sqrt(|C'|^2 + (R R'')^2)``
"""

import csv
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage as ndi
from scipy.spatial import cKDTree

from ._validation import MAX_AOF, check_scalar, check_tau
from .exceptions import ParameterError
from .graph import (MedialBranch, branch_tangents, resample_branch, smooth_branch,
                    smooth_radius)
from .ingest import trace_fragments

MEASURES = ("separation", "ribbon", "taper")
PROJECTIONS = ("spoke", "nearest")


@dataclass(frozen=True)
class SalienceConfig:
    """Algorithm parameters.

    ``window`` is the half-window K (windows hold ``2K + 1`` points);
    ``sigma`` smooths contour fragments and branch positions, and
    ``radius_sigma`` the branch radius before derivatives are taken. The
    radius smoothing of a branch grows to ``radius_scale`` times its median
    radius, so that it scales with the shape.
    ``frame`` makes the image border act as a contour.
    """

    window: int = 5
    measures: tuple = MEASURES
    tau: float = 0.25
    sigma: float = 1.0
    radius_sigma: float = 3.0
    radius_scale: float = 0.4
    disk_radius: float = 1.0
    sample_count: int = 60
    projection: str = "spoke"
    touch_distance: float = 2.0
    connectivity: int = 4
    frame: bool = False

    def __post_init__(self):
        check_scalar(self.window, "window", low=1, integer=True)
        measures = (self.measures,) if isinstance(self.measures, str) else tuple(self.measures)
        if not measures:
            raise ParameterError("at least one measure is required")
        for m in measures:
            if m not in MEASURES:
                raise ParameterError(f"unknown measure {m!r}")
        # canonical order, no duplicates
        object.__setattr__(self, "measures", tuple(m for m in MEASURES if m in measures))
        check_tau(self.tau)
        check_scalar(self.sigma, "sigma", low=0.0)
        check_scalar(self.radius_sigma, "radius_sigma", low=0.0)
        check_scalar(self.radius_scale, "radius_scale", low=0.0)
        check_scalar(self.disk_radius, "disk_radius", low=0.5)
        check_scalar(self.sample_count, "sample_count", low=8, integer=True)
        check_scalar(self.touch_distance, "touch_distance", low=0.0, include_low=False)
        if self.projection not in PROJECTIONS:
            raise ParameterError(f"unknown projection {self.projection!r}")
        if self.connectivity not in (4, 8):
            raise ParameterError(f"connectivity must be 4 or 8, got {self.connectivity!r}")
        object.__setattr__(self, "frame", bool(self.frame))

    def to_dict(self):
        d = asdict(self)
        d["measures"] = list(self.measures)
        return d


# ---------------------------------------------------------------- windows

def _columns(window):
    if isinstance(window, MedialBranch):
        return window.x, window.y, window.radius
    arr = np.asarray(window, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 3:
        raise ParameterError("a window is a branch or an (n, 3) array of x, y, R")
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _derivatives(x, y, r):
    """Arc-length derivatives of stacked windows (rows)."""
    s = np.concatenate([np.zeros((x.shape[0], 1)),
                        np.cumsum(np.hypot(np.diff(x, axis=1), np.diff(y, axis=1)), axis=1)],
                       axis=1)
    h = np.maximum(np.diff(s, axis=1), 1e-12)
    m = x.shape[1]
    w = np.zeros_like(s)
    w[:, :-1] += 0.5 * h
    w[:, 1:] += 0.5 * h

    def first(f):
        d = np.empty_like(f)
        d[:, 0] = (f[:, 1] - f[:, 0]) / h[:, 0]
        d[:, -1] = (f[:, -1] - f[:, -2]) / h[:, -1]
        if m > 2:
            a, b = h[:, :-1], h[:, 1:]
            d[:, 1:-1] = (a * a * f[:, 2:] - b * b * f[:, :-2] + (b * b - a * a) * f[:, 1:-1]) \
                / (a * b * (a + b))
        return d

    dx, dy, dr = first(x), first(y), first(r)
    d2 = np.zeros_like(r)
    if m > 2:
        a, b = h[:, :-1], h[:, 1:]
        d2[:, 1:-1] = 2.0 * (a * r[:, 2:] - (a + b) * r[:, 1:-1] + b * r[:, :-2]) / (a * b * (a + b))
        d2[:, 0] = d2[:, 1]
        d2[:, -1] = d2[:, -2]
    return w, np.hypot(dx, dy), dr, d2


def _window_values(x, y, r, measures):
    """Each measure over every row of stacked equal-length windows."""
    n, m = x.shape
    out = {}
    deriv = _derivatives(x, y, r) if m > 1 else None
    for measure in measures:
        if measure not in MEASURES:
            raise ParameterError(f"unknown measure {measure!r}")
        if measure == "separation":
            if m == 1:
                out[measure] = 1.0 - 1.0 / r[:, 0]
                continue
            w = deriv[0]
            tot = w.sum(axis=1)
            val = 1.0 - np.sum(w / r, axis=1) / np.where(tot > 0, tot, 1.0)
            out[measure] = np.where(tot > 0, val, 1.0 - 1.0 / r[:, m // 2])
            continue
        if m == 1 or (measure == "taper" and m < 3):
            out[measure] = np.ones(n)
            continue
        w, speed, dr, d2 = deriv
        plain = np.sum(w * speed, axis=1)
        extra = dr if measure == "ribbon" else r * d2
        lifted = np.sum(w * np.sqrt(speed ** 2 + extra ** 2), axis=1)
        val = np.ones(n)
        # a window of coincident points has no length to compare
        ok = (lifted > 0) & (np.sum(w, axis=1) > 1e-9)
        val[ok] = plain[ok] / lifted[ok]
        out[measure] = val
    return {k: np.clip(v, 0.0, 1.0) for k, v in out.items()}


def _measure_rows(x, y, r, measure):
    return _window_values(x, y, r, (measure,))[measure]


def _single(window, measure):
    x, y, r = _columns(window)
    if x.size == 0:
        raise ParameterError("empty window")
    return float(np.clip(_measure_rows(x[None], y[None], r[None], measure)[0], 0.0, 1.0))


def separation_salience(window):
    """One minus the arc-length mean of ``1/R``; ``1 - 1/R`` for one point."""
    return _single(window, "separation")


def ribbon_salience(window):
    """Planar over lifted ``(x, y, R)`` arc length; 1 for a zero-length window."""
    return _single(window, "ribbon")


def taper_salience(window):
    """Planar arc length over the ``R R''``-lifted length; 1 below 3 points."""
    return _single(window, "taper")


MEASURE_FUNCTIONS = {
    "separation": separation_salience,
    "ribbon": ribbon_salience,
    "taper": taper_salience,
}


def windowed_values(branches, k, measures):
    """Windowed measures for many branches at once.

    Windows of equal length are stacked across all branches, so the work is
    a handful of array operations regardless of the branch count.
    """
    sizes = np.array([len(b) for b in branches], dtype=np.int64)
    out = [{m: np.empty(n) for m in measures} for n in sizes]
    if sizes.sum() == 0:
        return out
    x = np.concatenate([b.x for b in branches])
    y = np.concatenate([b.y for b in branches])
    r = np.concatenate([b.radius for b in branches])
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    owner = np.repeat(np.arange(len(branches)), sizes)
    local = np.arange(x.size) - starts[owner]
    lo = starts[owner] + np.maximum(local - k, 0)
    hi = starts[owner] + np.minimum(local + k + 1, sizes[owner])
    length = hi - lo
    flat = {m: np.empty(x.size) for m in measures}
    for m_len in np.unique(length):
        sel = np.nonzero(length == m_len)[0]
        idx = lo[sel, None] + np.arange(m_len)[None, :]
        vals = _window_values(x[idx], y[idx], r[idx], measures)
        for m in measures:
            flat[m][sel] = vals[m]
    for i, (s0, n) in enumerate(zip(starts, sizes)):
        for m in measures:
            out[i][m] = flat[m][s0:s0 + n]
    return out


def windowed_salience(branch, cfg, measure):
    """Measure over ``[i - K, i + K]`` at every point, shrunk at branch ends."""
    if measure not in MEASURES:
        raise ParameterError(f"unknown measure {measure!r}")
    k = cfg.window if isinstance(cfg, SalienceConfig) else int(cfg)
    return windowed_values([branch], k, (measure,))[0][measure]


# ---------------------------------------------------------------- maps

@dataclass(frozen=True, eq=False)
class BranchSalience:
    """A smoothed, unit-spaced branch and its per-point measure values."""

    branch: MedialBranch
    values: dict
    source: int


@dataclass(frozen=True, eq=False)
class SalienceMap:
    """Per-skeleton-point and per-contour-pixel values for each measure.

    ``contour_values[m]`` is an image-sized array, ``nan`` off the contours.
    ``coverage`` reports how the contour pixels got their values.
    """

    measures: tuple
    skeleton_values: dict
    contour_values: dict
    branches: list = field(default_factory=list)
    coverage: dict = field(default_factory=dict)

    def contour_vector(self, measure, mask):
        return self.contour_values[measure][mask]


def prepare_branch(branch, cfg):
    """Smooth positions, resample to unit arc length, then smooth the radius.

    Smoothing R after resampling makes its kernel act over arc length; on a
    staircase path the pixel steps alternate between 1 and sqrt(2), which
    would otherwise leave a ripple in R(s).
    """
    rb = resample_branch(smooth_branch(branch, cfg.sigma, 0.0))
    rs = max(cfg.radius_sigma, cfg.radius_scale * float(np.median(branch.radius)))
    return MedialBranch(rb.x, rb.y, smooth_radius(rb.radius, rs), rb.angle, rb.region, None,
                        rb.cyclic)


def branch_salience(graph, cfg):
    """Smooth, resample and evaluate every branch of ``graph``."""
    prepared = []
    for b in graph.branches:
        if len(b) >= 2:
            prepared.append(prepare_branch(b, cfg))
        else:
            prepared.append(MedialBranch(b.x, b.y, b.radius, b.angle, b.region, None, b.cyclic))
    values = windowed_values(prepared, cfg.window, cfg.measures)
    return [BranchSalience(rb, v, i) for i, (rb, v) in enumerate(zip(prepared, values))]


def skeleton_salience(skeleton, graph, branch_values, measures):
    """Values at the skeleton pixels, interpolated by arc length.

    Pixels shared by several branches (junctions) keep the maximum.
    """
    res = {m: np.full(len(skeleton), np.nan) for m in measures}
    for bs in branch_values:
        b = graph.branches[bs.source]
        if len(b) >= 2:
            s = b.arc_length
            t = bs.branch.arc_length
            # smoothing shortens a branch slightly; match by relative position
            if s[-1] > 0:
                s = s * (t[-1] / s[-1])
        for m in measures:
            v = bs.values[m]
            at = np.interp(s, t, v) if len(b) >= 2 else v
            cur = res[m][b.index]
            res[m][b.index] = np.fmax(cur, at)
    return res


def _fill_fragments(values, cast, fragments):
    """Give uncast contour pixels the value of the nearest cast pixel along
    their fragment; returns the number left without a value."""
    missing = 0
    for frag in fragments:
        rows, cols = frag.pixels()
        have = cast[rows, cols]
        n = rows.size
        if have.all():
            continue
        if not have.any():
            missing += n
            for v in values.values():
                v[rows, cols] = 0.0
            continue
        pos = np.nonzero(have)[0]
        idx = np.arange(n)
        k = np.searchsorted(pos, idx)
        before = pos[np.clip(k - 1, 0, pos.size - 1)]
        after = pos[np.clip(k, 0, pos.size - 1)]
        if frag.closed:
            before = np.where(k == 0, pos[-1], before)
            after = np.where(k == pos.size, pos[0], after)
            db = (idx - before) % n
            da = (after - idx) % n
        else:
            db = np.where(k == 0, n + 1, idx - before)
            da = np.where(k == pos.size, n + 1, after - idx)
        sel = ~have
        for v in values.values():
            vb = v[rows[before], cols[before]]
            va = v[rows[after], cols[after]]
            # equidistant neighbours: keep the larger value
            filled = np.where(db < da, vb, np.where(da < db, va, np.maximum(va, vb)))
            v[rows[sel], cols[sel]] = filled[sel]
    return missing


def _spoke_casts(branch_values, contour, measures, touch, shape):
    h, w = shape
    dist, (iy, ix) = ndi.distance_transform_edt(~contour, return_indices=True)
    vals = {m: np.full(shape, -np.inf) for m in measures}
    for bs in branch_values:
        b = bs.branch
        if len(b) < 2:
            continue
        t = branch_tangents(b)
        ok = np.all(np.isfinite(t), axis=1)
        if not ok.any():
            continue
        c, s = np.cos(b.angle[ok]), np.sin(b.angle[ok])
        tx, ty = t[ok, 0], t[ok, 1]
        for sign in (1.0, -1.0):
            px = b.x[ok] + b.radius[ok] * (c * tx - sign * s * ty)
            py = b.y[ok] + b.radius[ok] * (sign * s * tx + c * ty)
            rx = np.floor(px + 0.5).astype(np.int64)
            ry = np.floor(py + 0.5).astype(np.int64)
            inside = (rx >= 0) & (rx < w) & (ry >= 0) & (ry < h)
            ryc, rxc = np.clip(ry, 0, h - 1), np.clip(rx, 0, w - 1)
            cy, cx = iy[ryc, rxc], ix[ryc, rxc]
            near = inside & (np.hypot(px - cx, py - cy) <= touch)
            for m in measures:
                np.maximum.at(vals[m], (cy[near], cx[near]), bs.values[m][ok][near])
    return vals


def _nearest_casts(branch_values, contour, regions, measures, shape):
    vals = {m: np.full(shape, -np.inf) for m in measures}
    by_region = {}
    for bs in branch_values:
        by_region.setdefault(bs.branch.region, []).append(bs)
    labels = regions.labels
    for region, items in sorted(by_region.items()):
        x0, y0, x1, y1 = regions.bounding_boxes[region - 1]
        sl = (slice(max(y0 - 1, 0), y1 + 2), slice(max(x0 - 1, 0), x1 + 2))
        own = labels[sl] == region
        touch = ndi.binary_dilation(own, structure=np.ones((3, 3), bool)) & contour[sl]
        ys, xs = np.nonzero(touch)
        if ys.size == 0:
            continue
        pts = np.concatenate([np.stack([b.branch.x, b.branch.y], axis=1) for b in items])
        tree = cKDTree(pts)
        _, j = tree.query(np.stack([xs + sl[1].start, ys + sl[0].start], axis=1))
        for m in measures:
            v = np.concatenate([b.values[m] for b in items])[j]
            tgt = (ys + sl[0].start, xs + sl[1].start)
            vals[m][tgt] = np.maximum(vals[m][tgt], v)
    return vals


def project_to_contours(branch_values, img, cfg, regions=None, fragments=None):
    """Transfer branch values to contour pixels, keeping the maximum cast.

    Each medial point casts onto the contour pixels nearest its two spoke
    tips (within ``cfg.touch_distance``). Contour pixels with no cast take
    the value of the nearest cast pixel along their fragment; fragments with
    no cast at all get 0.
    """
    contour = img.mask
    shape = contour.shape
    measures = cfg.measures
    total = int(contour.sum())
    if total == 0:
        empty = {m: np.full(shape, np.nan) for m in measures}
        return empty, {"contour_pixels": 0, "cast": 0, "filled": 0, "unfilled": 0,
                       "cast_fraction": 1.0, "coverage": 1.0}
    if cfg.projection == "nearest":
        if regions is None:
            raise ParameterError("nearest projection needs the region map")
        vals = _nearest_casts(branch_values, contour, regions, measures, shape)
    else:
        vals = _spoke_casts(branch_values, contour, measures, cfg.touch_distance, shape)
    first = vals[measures[0]]
    cast = contour & np.isfinite(first)
    if fragments is None:
        fragments = trace_fragments(img)
    missing = _fill_fragments(vals, cast, fragments)
    out = {}
    for m in measures:
        v = np.where(contour, vals[m], np.nan)
        v[contour & ~np.isfinite(v)] = 0.0
        out[m] = np.clip(v, 0.0, 1.0)
    n_cast = int(cast.sum())
    report = {
        "contour_pixels": total,
        "cast": n_cast,
        "filled": total - n_cast - missing,
        "unfilled": missing,
        "cast_fraction": n_cast / total,
        "coverage": (total - missing) / total,
    }
    return out, report


def write_branch_csv(branch_values, path, measures):
    """One row per resampled branch point: id, index, x, y, R, measures."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["branch", "point", "x", "y", "radius", *measures])
        for bid, bs in enumerate(branch_values):
            b = bs.branch
            for i in range(len(b)):
                wr.writerow([bid, i, f"{b.x[i]:.6f}", f"{b.y[i]:.6f}", f"{b.radius[i]:.6f}",
                             *[f"{bs.values[m][i]:.6f}" for m in measures]])


__all__ = [
    "MEASURES", "SalienceConfig", "SalienceMap", "BranchSalience", "separation_salience",
    "ribbon_salience", "taper_salience", "windowed_salience", "branch_salience",
    "skeleton_salience", "project_to_contours", "write_branch_csv", "MAX_AOF",
]
