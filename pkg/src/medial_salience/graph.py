"""Skeleton topology: point classes, branches, smoothing and resampling."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage as ndi

from . import _chains
from ._validation import check_scalar
from .ingest import gaussian_kernel, smooth_sequence

END, REGULAR, JUNCTION, ISOLATED = _chains.END, _chains.REGULAR, _chains.JUNCTION, _chains.ISOLATED
LABEL_NAMES = {END: "end", REGULAR: "regular", JUNCTION: "junction", ISOLATED: "end"}


@dataclass(frozen=True, eq=False)
class MedialBranch:
    """Ordered medial points with radius and object angle.

    ``index`` maps each point to its skeleton point (``-1`` once resampled).
    ``cyclic`` marks a branch cut open from a closed loop.
    """

    x: np.ndarray
    y: np.ndarray
    radius: np.ndarray
    angle: np.ndarray
    region: int = 0
    index: np.ndarray = None
    cyclic: bool = False

    def __post_init__(self):
        for name in ("x", "y", "radius", "angle"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if self.index is None:
            object.__setattr__(self, "index", np.full(self.x.size, -1, dtype=np.int64))

    def __len__(self):
        return int(self.x.size)

    @property
    def points(self):
        return np.stack([self.x, self.y, self.radius, self.angle], axis=1)

    @property
    def steps(self):
        return np.hypot(np.diff(self.x), np.diff(self.y))

    @property
    def arc_length(self):
        """Cumulative arc length from the first point."""
        return np.concatenate([[0.0], np.cumsum(self.steps)])

    @property
    def length(self):
        return float(self.steps.sum())

    def reversed(self):
        return MedialBranch(self.x[::-1], self.y[::-1], self.radius[::-1], self.angle[::-1],
                            self.region, self.index[::-1], self.cyclic)


@dataclass(frozen=True, eq=False)
class SkeletonGraph:
    branches: list
    junctions: list = field(default_factory=list)
    endpoints: list = field(default_factory=list)
    labels: np.ndarray = None

    def to_json(self, path=None):
        doc = {
            "branches": [
                {"region": int(b.region), "cyclic": bool(b.cyclic),
                 "x": b.x.tolist(), "y": b.y.tolist(), "radius": b.radius.tolist(),
                 "object_angle": b.angle.tolist()}
                for b in self.branches
            ],
            "junctions": [[float(a), float(b)] for a, b in self.junctions],
            "endpoints": [[float(a), float(b)] for a, b in self.endpoints],
        }
        text = json.dumps(doc, indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _rasters(skeleton):
    mask = skeleton.mask()
    groups = skeleton.label_image()
    index = np.full(skeleton.shape, -1, dtype=np.int64)
    index[skeleton.y, skeleton.x] = np.arange(len(skeleton))
    return mask, groups, index


def classify_points(skeleton):
    """Per-point class: END, REGULAR or JUNCTION (ISOLATED for lone pixels).

    The degree of a point is the number of separate neighbour runs around it,
    counting only points of the same region.
    """
    mask, groups, _ = _rasters(skeleton)
    lab = _chains.classify(mask, groups)
    return lab[skeleton.y, skeleton.x].astype(np.int8)


def _branch(skeleton, idx, region, cyclic=False):
    idx = np.asarray(idx, dtype=np.int64)
    return MedialBranch(skeleton.x[idx], skeleton.y[idx], skeleton.radius[idx],
                        skeleton.object_angle[idx], region, idx, cyclic)


def partition_branches(skeleton, labels=None):
    """Split the skeleton into chains between junction and end points.

    Each branch keeps its terminal junction/end pixels, so junction pixels
    can appear in several branches while regular points appear in exactly
    one. A loop with no junction is cut at its smallest radius.
    """
    mask, groups, index = _rasters(skeleton)
    paths, closed, lab = _chains.chains(mask, groups)
    if labels is None:
        labels = lab[skeleton.y, skeleton.x].astype(np.int8)
    branches = []
    for path, is_closed in zip(paths, closed):
        idx = np.array([index[p] for p in path], dtype=np.int64)
        region = int(skeleton.labels[idx[0]])
        if is_closed:
            r = skeleton.radius[idx]
            k = int(np.argmin(r))
            idx = np.roll(idx, -k)
        branches.append(_branch(skeleton, idx, region, cyclic=bool(is_closed)))

    jmask = mask & (lab == JUNCTION)
    clusters, n = ndi.label(jmask, structure=np.ones((3, 3), bool))
    ys, xs = np.nonzero(clusters)
    ks = clusters[ys, xs]
    cnt = np.bincount(ks, minlength=n + 1)[1:]
    cx = np.bincount(ks, weights=xs, minlength=n + 1)[1:] / np.maximum(cnt, 1)
    cy = np.bincount(ks, weights=ys, minlength=n + 1)[1:] / np.maximum(cnt, 1)
    junctions = [(float(a), float(b)) for a, b in zip(cx, cy)]
    ys, xs = np.nonzero(mask & ((lab == END) | (lab == ISOLATED)))
    endpoints = [(float(a), float(b)) for a, b in zip(xs, ys)]
    return SkeletonGraph(branches, junctions, endpoints, labels)


def smooth_radius(r, sigma):
    """Gaussian smoothing of a radius profile.

    Each end is padded with the least-squares line through the nearby
    samples, so linear profiles pass unchanged and a single off value at a
    junction pixel does not bend the end of the profile.
    """
    r = np.asarray(r, dtype=np.float64)
    n = r.size
    if sigma == 0 or n < 3:
        return r.copy()
    k = gaussian_kernel(sigma)
    h = len(k) // 2
    m = min(n, 2 * h + 1)
    t = np.arange(m, dtype=np.float64)
    head = np.polyfit(t, r[:m], 1)
    tail = np.polyfit(t, r[n - m:], 1)
    left = np.polyval(head, np.arange(-h, 0, dtype=np.float64))
    right = np.polyval(tail, np.arange(m, m + h, dtype=np.float64))
    ext = np.concatenate([left, r, right])
    return np.convolve(ext, k[::-1], mode="valid")


def smooth_branch(branch, sigma=1.0, radius_sigma=None):
    """Gaussian smoothing of positions (``sigma``) and radius (``radius_sigma``).

    Positions are padded by point reflection, so straight runs pass through
    unchanged and end points stay put; see :func:`smooth_radius` for R.
    """
    check_scalar(sigma, "sigma", low=0.0)
    rs = sigma if radius_sigma is None else radius_sigma
    check_scalar(rs, "radius_sigma", low=0.0)
    if len(branch) < 3:
        return branch
    return MedialBranch(smooth_sequence(branch.x, sigma), smooth_sequence(branch.y, sigma),
                        smooth_radius(branch.radius, rs), branch.angle,
                        branch.region, branch.index, branch.cyclic)


def resample_branch(branch, spacing=1.0):
    """Points at uniform arc-length steps along the branch polyline.

    The step is the branch length over ``round(length / spacing)``, so it is
    within a factor of two of ``spacing`` (and close to it on long branches),
    both ends are kept, and a reversed branch resamples to the same points in
    reverse. Radius and object angle are interpolated linearly.
    """
    check_scalar(spacing, "spacing", low=0.0, include_low=False)
    if len(branch) < 2:
        return MedialBranch(branch.x, branch.y, branch.radius, branch.angle,
                            branch.region, None, branch.cyclic)
    s = branch.arc_length
    total = s[-1]
    n = max(1, int(np.floor(total / spacing + 0.5)))
    t = np.linspace(0.0, total, n + 1)
    # drop repeated pixels, which would stall the interpolation
    keep = np.concatenate([[True], np.diff(s) > 0])
    s_u = s[keep]
    vals = [np.interp(t, s_u, v[keep]) for v in (branch.x, branch.y, branch.radius, branch.angle)]
    return MedialBranch(*vals, region=branch.region, index=None, cyclic=branch.cyclic)


def branch_tangents(branch):
    """Unit tangents by central differences, turned toward decreasing radius.

    Where the radius is flat the tangent keeps the branch direction.
    """
    n = len(branch)
    if n < 2:
        return np.full((n, 2), np.nan)
    tx, ty = np.gradient(branch.x), np.gradient(branch.y)
    norm = np.hypot(tx, ty)
    norm[norm == 0] = np.nan
    tx, ty = tx / norm, ty / norm
    dr = np.gradient(branch.radius)
    flip = dr > 0
    tx[flip], ty[flip] = -tx[flip], -ty[flip]
    return np.stack([tx, ty], axis=1)


def skeleton_tangents(skeleton, graph, sigma=1.0):
    """Tangent per skeleton point from the branch it lies on.

    Positions are smoothed with ``sigma`` first; junction points take the
    tangent of the first branch that reaches them, isolated points get
    ``nan``.
    """
    out = np.full((len(skeleton), 2), np.nan)
    for b in graph.branches:
        if len(b) < 2:
            continue
        t = branch_tangents(smooth_branch(b, sigma))
        for i, k in enumerate(b.index):
            if k >= 0 and not np.isfinite(out[k, 0]):
                out[k] = t[i]
    return out
