"""Exact Euclidean distance to the contours, its gradient, and contour normals.

A :class:`DistanceField` covers either one region (cropped to the region's
bounding box plus a margin) or the whole image. The nearest contour pixel of
every region pixel is one of the contour pixels bounding that region, so the
cropped field is exactly the restriction of the whole-image field.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage as ndi

from ._validation import check_scalar
from .exceptions import RegionError, SampleError

# margin around a region crop; must exceed the normal estimator's radius
MARGIN = 10
NORMAL_SIGMA = 2.5
NORMAL_RADIUS = 7
# structure-tensor anisotropy above which a contour site counts as a corner
RADIAL_ANISOTROPY = 0.3


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Distances in pixels, ``nan`` where the field is not defined.

    All arrays share the crop grid; ``origin`` is the image ``(row, col)`` of
    the crop's top-left pixel. ``site_x``/``site_y`` hold the crop coordinates
    of each pixel's nearest contour pixel (``-1`` or the crop size when it is
    the virtual image frame). ``normal_x``/``normal_y``/``radial`` live on the
    crop grid padded by one pixel and describe the contour at each site.
    """

    region: int | None
    origin: tuple
    labels: np.ndarray
    dist: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray
    site_x: np.ndarray
    site_y: np.ndarray
    normal_x: np.ndarray
    normal_y: np.ndarray
    radial: np.ndarray
    frame: bool = True

    @property
    def shape(self):
        return self.dist.shape

    @property
    def valid(self):
        return ~np.isnan(self.dist)

    @property
    def interior(self):
        """Region pixels proper (contour pixels excluded)."""
        if self.region is None:
            return self.labels > 0
        return self.labels == self.region

    def to_local(self, x, y):
        return x - self.origin[1], y - self.origin[0]

    def to_image(self, x, y):
        return x + self.origin[1], y + self.origin[0]

    def distance_at(self, x, y):
        """Distance at integer image coordinates."""
        lx, ly = self.to_local(int(x), int(y))
        h, w = self.shape
        if not (0 <= lx < w and 0 <= ly < h) or np.isnan(self.dist[ly, lx]):
            raise SampleError(f"pixel ({x}, {y}) outside the field")
        return float(self.dist[ly, lx])


def contour_normals(mask):
    """Unit normals and corner flags of a contour mask.

    The orientation at each pixel is the dominant axis of the Gaussian
    weighted second-moment tensor of nearby contour pixels. Where the tensor
    is nearly isotropic (corners, junctions, curve ends) the pixel is flagged
    as radial: the distance gradient there points away from the pixel itself.
    """
    d = np.arange(-NORMAL_RADIUS, NORMAL_RADIUS + 1, dtype=np.float64)
    g = np.exp(-0.5 * (d / NORMAL_SIGMA) ** 2)
    m = mask.astype(np.float64)

    def sep(kx, ky):
        t = ndi.correlate1d(m, kx, axis=1, mode="constant")
        return ndi.correlate1d(t, ky, axis=0, mode="constant")

    cxx = sep(g * d * d, g)
    cyy = sep(g, g * d * d)
    cxy = sep(g * d, g * d)
    angle = 0.5 * np.arctan2(2.0 * cxy, cxx - cyy)
    half_tr = 0.5 * (cxx + cyy)
    disc = np.sqrt(np.maximum(half_tr ** 2 - (cxx * cyy - cxy ** 2), 0.0))
    big, small = half_tr + disc, half_tr - disc
    aniso = np.where(big > 0, small / np.maximum(big, 1e-12), 1.0)
    return -np.sin(angle), np.cos(angle), aniso >= RADIAL_ANISOTROPY


def central_gradient(dist):
    """Central differences of ``dist``, one-sided next to undefined pixels."""
    valid = np.isfinite(dist)
    d = np.where(valid, dist, 0.0)
    grads = []
    for axis in (1, 0):
        fwd = np.roll(d, -1, axis=axis)
        bwd = np.roll(d, 1, axis=axis)
        ok_f = np.roll(valid, -1, axis=axis)
        ok_b = np.roll(valid, 1, axis=axis)
        last = [slice(None)] * 2
        last[axis] = -1
        ok_f[tuple(last)] = False
        first = [slice(None)] * 2
        first[axis] = 0
        ok_b[tuple(first)] = False
        g = np.where(ok_f & ok_b, 0.5 * (fwd - bwd),
                     np.where(ok_f, fwd - d, np.where(ok_b, d - bwd, 0.0)))
        grads.append(np.where(valid, g, np.nan))
    return grads[0], grads[1]


def _build(mask, labels, region, origin, frame_sides):
    """Field over a crop; ``frame_sides`` = (top, bottom, left, right) flags."""
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    top, bottom, left, right = frame_sides
    if top:
        padded[0, :] = True
    if bottom:
        padded[-1, :] = True
    if left:
        padded[:, 0] = True
    if right:
        padded[:, -1] = True
    if padded.any():
        dist, (iy, ix) = ndi.distance_transform_edt(~padded, return_indices=True)
    else:
        dist = np.full(padded.shape, np.inf)
        iy = ix = np.zeros(padded.shape, dtype=np.int64)
    dist = dist[1:-1, 1:-1]
    site_y = (iy[1:-1, 1:-1] - 1).astype(np.int32)
    site_x = (ix[1:-1, 1:-1] - 1).astype(np.int32)
    nx, ny, radial = contour_normals(padded)

    if region is None:
        valid = np.ones_like(mask)
    else:
        own = labels == region
        valid = own | (ndi.binary_dilation(own, structure=np.ones((3, 3), bool)) & mask)
    dist = np.where(valid, dist, np.nan)
    gx, gy = central_gradient(dist)
    return DistanceField(region, origin, labels, dist, gx, gy, site_x, site_y,
                         nx, ny, radial, any(frame_sides))


def compute_edt(regions, img, region_id=None, frame=True):
    """Exact Euclidean distance field of one region, or of all of them.

    With ``frame`` set, the ring of pixels just outside the image acts as an
    extra contour, so regions touching the border are closed. Pixels outside
    the region are ``nan``.
    """
    mask = img.mask
    labels = regions.labels
    h, w = mask.shape
    if region_id is None:
        return _build(mask, labels.astype(np.int32), None, (0, 0), (frame,) * 4)
    if isinstance(region_id, (bool, np.bool_)) or not 1 <= int(region_id) <= regions.region_count:
        raise RegionError(f"unknown region id {region_id!r}")
    region_id = int(region_id)
    x0, y0, x1, y1 = regions.bounding_boxes[region_id - 1]
    r0, r1 = max(y0 - MARGIN, 0), min(y1 + MARGIN + 1, h)
    c0, c1 = max(x0 - MARGIN, 0), min(x1 + MARGIN + 1, w)
    sides = (frame and r0 == 0, frame and r1 == h, frame and c0 == 0, frame and c1 == w)
    return _build(np.ascontiguousarray(mask[r0:r1, c0:c1]),
                  np.ascontiguousarray(labels[r0:r1, c0:c1]).astype(np.int32),
                  region_id, (r0, c0), sides)


def region_fields(regions, img, frame=True):
    """Per-region fields for every region, in id order."""
    return [compute_edt(regions, img, r, frame) for r in regions.region_ids()]


def sample_gradient(field, x, y):
    """Bilinearly interpolated central-difference gradient at image ``(x, y)``.

    Raises :class:`SampleError` when any of the four surrounding grid points
    is outside the field.
    """
    lx, ly = field.to_local(float(x), float(y))
    h, w = field.shape
    x0, y0 = int(np.floor(lx)), int(np.floor(ly))
    fx, fy = lx - x0, ly - y0
    if not (0 <= x0 < w and 0 <= y0 < h) or (fx > 0 and x0 + 1 >= w) or (fy > 0 and y0 + 1 >= h):
        raise SampleError(f"sample ({x}, {y}) outside the field")
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    corners = [(y0, x0, (1 - fx) * (1 - fy)), (y0, x1, fx * (1 - fy)),
               (y1, x0, (1 - fx) * fy), (y1, x1, fx * fy)]
    gx = gy = 0.0
    for cy, cx, wt in corners:
        if wt == 0.0:
            continue
        if np.isnan(field.dist[cy, cx]):
            raise SampleError(f"sample ({x}, {y}) outside the field")
        gx += wt * field.grad_x[cy, cx]
        gy += wt * field.grad_y[cy, cx]
    return gx, gy


def save_distance_png(field, path, scale=256.0):
    """16-bit PNG of ``dist * scale`` (undefined pixels 0)."""
    check_scalar(scale, "scale", low=0.0, include_low=False)
    d = np.nan_to_num(field.dist, nan=0.0, posinf=0.0)
    arr = np.clip(np.floor(d * scale + 0.5), 0, 65535).astype(np.uint16)
    Image.fromarray(arr).save(path, format="PNG")
