"""End-to-end processing of one line drawing, with per-stage timings."""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .aof import compute_aof, extract_skeleton, spoke_tips
from .distance import compute_edt
from .graph import branch_tangents, partition_branches, resample_branch
from .ingest import BinaryContourImage, label_regions, prepare_line_drawing
from .salience import (SalienceConfig, SalienceMap, branch_salience, project_to_contours,
                       skeleton_salience)


@dataclass(eq=False)
class PipelineResult:
    config: SalienceConfig
    source: BinaryContourImage
    contours: BinaryContourImage
    fragments: list
    regions: object
    field: object
    aof: object
    skeleton: object
    graph: object
    branch_values: list
    salience: SalienceMap
    timings: dict = field(default_factory=dict)


class _Clock:
    def __init__(self):
        self.timings = {}
        self._t = time.perf_counter()

    def lap(self, name):
        now = time.perf_counter()
        self.timings[name] = now - self._t
        self._t = now


def skeletonize(img, cfg=None):
    """Contour preparation through branch partitioning.

    Returns a :class:`PipelineResult` with ``branch_values`` and ``salience``
    left empty.
    """
    cfg = cfg or SalienceConfig()
    clock = _Clock()
    contours, fragments = prepare_line_drawing(img, cfg.sigma)
    clock.lap("prepare")
    regions = label_regions(contours, cfg.connectivity)
    clock.lap("regions")
    fld = compute_edt(regions, contours, None, frame=cfg.frame)
    clock.lap("distance")
    amap = compute_aof(fld, cfg.disk_radius, cfg.sample_count)
    clock.lap("aof")
    skel = extract_skeleton(amap, fld, cfg.tau)
    clock.lap("skeleton")
    graph = partition_branches(skel)
    clock.lap("graph")
    empty = SalienceMap(cfg.measures, {}, {})
    return PipelineResult(cfg, img, contours, fragments, regions, fld, amap, skel, graph,
                          [], empty, clock.timings)


def run(img, cfg=None):
    """Full pipeline: skeleton, branch salience and contour projection."""
    cfg = cfg or SalienceConfig()
    res = skeletonize(img, cfg)
    clock = _Clock()
    bvals = branch_salience(res.graph, cfg)
    sk_vals = skeleton_salience(res.skeleton, res.graph, bvals, cfg.measures)
    clock.lap("salience")
    contour_vals, report = project_to_contours(bvals, res.contours, cfg, res.regions,
                                               res.fragments)
    clock.lap("projection")
    res.branch_values = bvals
    res.salience = SalienceMap(cfg.measures, sk_vals, contour_vals, bvals, report)
    res.timings.update(clock.timings)
    return res


def _branch_tips(b):
    t = branch_tangents(b)
    ok = np.all(np.isfinite(t), axis=1)
    return spoke_tips(b.x[ok], b.y[ok], b.radius[ok], b.angle[ok], t[ok])


def reconstruction_tips(result, max_refine=8):
    """Spoke tips along every smoothed branch, as ``(m, 2)``.

    Branches are unit spaced, then resampled finer where the tips spread
    further apart than a pixel (a tight medial curve facing a wide boundary),
    up to ``max_refine`` times. The radius gets only the fixed
    ``radius_sigma`` smoothing here: the scale-relative smoothing suits
    derivatives, not touch distances.
    """
    cfg = SalienceConfig(**{**result.config.to_dict(), "measures": ("separation",),
                            "radius_scale": 0.0})
    bvals = branch_salience(result.graph, cfg)
    out = []
    for bs in bvals:
        b = bs.branch
        if len(b) < 2:
            continue
        tips = _branch_tips(b)
        gap = max((np.hypot(*np.diff(t, axis=0).T).max(initial=0.0) for t in tips),
                  default=0.0)
        refine = min(int(np.ceil(gap)), max_refine)
        if refine > 1:
            tips = _branch_tips(resample_branch(b, 1.0 / refine))
        out.extend(tips)
    if not out:
        return np.zeros((0, 2))
    return np.concatenate(out, axis=0)


def reconstruction_fidelity(contour_mask, tips, tolerance=2.0):
    """Fraction of contour pixels within ``tolerance`` of some tip."""
    total = int(np.count_nonzero(contour_mask))
    if total == 0:
        return 1.0
    if len(tips) == 0:
        return 0.0
    ys, xs = np.nonzero(contour_mask)
    d, _ = cKDTree(tips).query(np.stack([xs, ys], axis=1), distance_upper_bound=tolerance + 1e-9)
    return float(np.count_nonzero(d <= tolerance) / total)
