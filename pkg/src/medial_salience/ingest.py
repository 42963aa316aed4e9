"""Loading, binarizing, thinning and smoothing of line-drawing rasters.

The working representation is a :class:`BinaryContourImage`, a boolean grid
in which ``True`` marks a contour pixel. Coordinates follow the image
convention: ``x`` is the column, ``y`` the row, and arrays are indexed
``[y, x]``.
"""

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage as ndi
from skimage.draw import line as draw_line

from . import _chains
from . import _morphology as morph
from ._validation import check_mask, check_scalar
from .exceptions import ImageFormatError, ParameterError

ADAPTIVE = "adaptive"


@dataclass(frozen=True, eq=False)
class BinaryContourImage:
    mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mask", check_mask(self.mask))

    @property
    def width(self):
        return self.mask.shape[1]

    @property
    def height(self):
        return self.mask.shape[0]

    @property
    def shape(self):
        return self.mask.shape

    @property
    def contour_count(self):
        return int(self.mask.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryContourImage):
            return NotImplemented
        return self.mask.shape == other.mask.shape and bool(np.array_equal(self.mask, other.mask))

    __hash__ = None


@dataclass(frozen=True)
class ContourFragment:
    """Ordered contour points as an ``(n, 2)`` array of ``(x, y)``."""

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def pixels(self):
        """Integer ``(row, col)`` pairs of the points, rounded half up."""
        p = np.floor(self.points + 0.5).astype(np.int64)
        return p[:, 1], p[:, 0]


@dataclass(frozen=True)
class RegionMap:
    labels: np.ndarray
    region_count: int
    bounding_boxes: list = field(default_factory=list)
    connectivity: int = 4

    def region_ids(self):
        return range(1, self.region_count + 1)

    def pixel_counts(self):
        """Pixel count per region id, index 0 holding the contour pixels."""
        return np.bincount(self.labels.ravel(), minlength=self.region_count + 1)


def decode_raster(data):
    """Decode PNG/PGM (or anything Pillow reads) bytes to an 8-bit gray array."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64)
                top = 65535.0 if arr.max() > 255 else 255.0
                return np.clip(np.floor(arr * 255.0 / top + 0.5), 0, 255).astype(np.uint8)
            if im.mode != "L":
                im = im.convert("L")
            return np.asarray(im, dtype=np.uint8).copy()
    except UnidentifiedImageError as exc:
        raise ImageFormatError("cannot decode raster: unrecognized image data") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageFormatError(f"cannot decode raster: {exc}") from exc


def otsu_threshold(gray):
    """Otsu's threshold on 8-bit data: contour pixels are ``gray <= t``.

    Returns -1 when the image holds a single gray level (no contour).
    """
    hist = np.bincount(np.asarray(gray, dtype=np.uint8).ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    if total == 0 or np.count_nonzero(hist) < 2:
        return -1
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)
    s0 = np.cumsum(hist * levels)
    w1 = total - w0
    mu0 = np.divide(s0, w0, out=np.zeros(256), where=w0 > 0)
    mu1 = np.divide(s0[-1] - s0, w1, out=np.zeros(256), where=w1 > 0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    between[(w0 == 0) | (w1 == 0)] = -1.0
    return int(np.argmax(between))


def binarize(gray, policy=ADAPTIVE, dark_contours=True):
    """Threshold a gray raster into a contour mask.

    ``policy`` is ``"adaptive"`` (Otsu) or an integer gray level; with a fixed
    level, pixels strictly darker than it are contours. Set
    ``dark_contours=False`` for bright-on-dark edge-strength maps.
    """
    gray = np.asarray(gray)
    if gray.ndim == 3:
        gray = np.asarray(Image.fromarray(gray.astype(np.uint8)).convert("L"))
    g = gray.astype(np.uint8) if dark_contours else (255 - gray.astype(np.int64)).astype(np.uint8)
    if isinstance(policy, str):
        if policy != ADAPTIVE:
            raise ParameterError(f"unknown binarize policy {policy!r}")
        mask = g <= otsu_threshold(g)
    else:
        check_scalar(policy, "threshold", low=0, high=256, integer=True)
        mask = g < policy
    return BinaryContourImage(mask)


def load_line_drawing(source, binarize_policy=ADAPTIVE, dark_contours=True):
    """Read a raster (path, bytes or array) and binarize it."""
    if isinstance(source, (str, Path)):
        source = Path(source).read_bytes()
    if isinstance(source, (bytes, bytearray, memoryview)):
        gray = decode_raster(bytes(source))
    else:
        gray = np.asarray(source)
    check_mask(gray[..., 0] if gray.ndim == 3 else gray, "image")
    return binarize(gray, binarize_policy, dark_contours)


def thin_to_unit_width(img):
    """Topology-preserving reduction of contour strokes to 1-pixel width."""
    mask = img.mask
    if not mask.any():
        return BinaryContourImage(mask.copy())
    depth = ndi.distance_transform_edt(mask)
    # blurred depth breaks ties toward the stroke centre
    priority = depth + 1e-3 * ndi.gaussian_filter(depth, 1.0)
    thin = morph.thin_by_priority(mask, priority, keep_ends=True)
    thin = morph.extend_endpoints(thin, mask)
    return BinaryContourImage(thin)


def trace_fragments(img):
    """Split a 1-pixel-wide contour image into ordered pixel chains.

    Chains run between end and junction pixels; closed loops without either
    become a single closed fragment. Each contour pixel lands in exactly one
    fragment, so a junction pixel is owned by the first chain reaching it.
    """
    mask = img.mask
    paths, closed, label = _chains.chains(mask)
    owner = np.full(mask.shape, -1, dtype=np.int64)

    fragments = []
    for path, is_closed in zip(paths, closed):
        if len(path) == 1 and label[path[0]] == _chains.JUNCTION:
            continue
        if len(path) > 1 and path[-1] == path[0]:
            # a loop back to its own junction holds that pixel once
            path = path[:-1]
        lo, hi = 0, len(path)
        while lo < hi and owner[path[lo]] >= 0:
            lo += 1
        while hi > lo and owner[path[hi - 1]] >= 0:
            hi -= 1
        kept = path[lo:hi]
        if not kept:
            continue
        for p in kept:
            owner[p] = len(fragments)
        fragments.append([list(kept), is_closed and lo == 0 and hi == len(path)])

    # isolated pixels and junction pixels not reached by any chain
    for y, x in zip(*np.nonzero(mask & (owner < 0))):
        p = (int(y), int(x))
        if owner[p] >= 0:
            continue
        attached = False
        for i, (pts, is_closed) in enumerate(fragments):
            if is_closed:
                continue
            for end, pos in ((pts[-1], len(pts)), (pts[0], 0)):
                if max(abs(end[0] - p[0]), abs(end[1] - p[1])) == 1:
                    pts.insert(pos, p)
                    owner[p] = i
                    attached = True
                    break
            if attached:
                break
        if not attached:
            owner[p] = len(fragments)
            fragments.append([[p], False])

    return [
        ContourFragment(np.array([(x, y) for y, x in pts], dtype=np.float64), closed=c)
        for pts, c in fragments
    ]


def gaussian_kernel(sigma):
    radius = int(np.ceil(3.0 * sigma))
    k = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    return k / k.sum()


def smooth_sequence(values, sigma, closed=False):
    """Gaussian-smooth a 1-D sequence (or each column of a 2-D one).

    Open sequences are padded by point reflection about their end samples,
    which keeps the ends fixed and leaves affine sequences untouched.
    """
    values = np.asarray(values, dtype=np.float64)
    if sigma == 0 or len(values) < 3:
        return values.copy()
    k = gaussian_kernel(sigma)
    r = len(k) // 2
    mode = {"mode": "wrap"} if closed else {"mode": "reflect", "reflect_type": "odd"}
    pad = [(r, r)] + [(0, 0)] * (values.ndim - 1)
    ext = np.pad(values, pad, **mode)
    out = ndi.correlate1d(ext, k, axis=0, mode="nearest")[r:-r]
    if not closed:
        out[0], out[-1] = values[0], values[-1]
    return out


def smooth_fragment(frag, sigma=1.0):
    """Convolve the x and y coordinate sequences with a Gaussian of ``sigma``."""
    check_scalar(sigma, "sigma", low=0.0)
    return ContourFragment(smooth_sequence(frag.points, sigma, frag.closed), closed=frag.closed)


def rasterize_fragments(fragments, shape):
    """Round fragment points and join consecutive ones with 8-connected segments."""
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    for frag in fragments:
        rows, cols = frag.pixels()
        rows = np.clip(rows, 0, h - 1)
        cols = np.clip(cols, 0, w - 1)
        mask[rows, cols] = True
        n = len(rows)
        stop = n if frag.closed and n > 2 else n - 1
        for i in range(stop):
            j = (i + 1) % n
            rr, cc = draw_line(rows[i], cols[i], rows[j], cols[j])
            mask[rr, cc] = True
    return BinaryContourImage(mask)


def prepare_line_drawing(img, sigma=1.0):
    """Thin, trace, smooth and re-rasterize a binarized drawing.

    The result is the working contour image every downstream field is
    computed on; its fragments are returned alongside.
    """
    thin = thin_to_unit_width(img)
    if sigma > 0:
        smoothed = [smooth_fragment(f, sigma) for f in trace_fragments(thin)]
        thin = thin_to_unit_width(rasterize_fragments(smoothed, thin.shape))
    return thin, trace_fragments(thin)


def label_regions(img, connectivity=4):
    """Label the connected components of the non-contour pixels."""
    if connectivity not in (4, 8):
        raise ParameterError(f"connectivity must be 4 or 8, got {connectivity!r}")
    structure = ndi.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, count = ndi.label(~img.mask, structure=structure)
    boxes = []
    for sl in ndi.find_objects(labels):
        boxes.append((sl[1].start, sl[0].start, sl[1].stop - 1, sl[0].stop - 1))
    return RegionMap(labels.astype(np.int32), int(count), boxes, connectivity)
