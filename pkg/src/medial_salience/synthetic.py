"""Synthetic line drawings with known medial geometry.

Every generator returns a :class:`BinaryContourImage`; the geometric ones also
return the facts a test needs (axis row, apex, expected radius). Curves are
rasterized as 8-connected polylines through rounded sample points.
"""

import numpy as np
from scipy import ndimage as ndi
from skimage.draw import disk, ellipse_perimeter, line, polygon_perimeter

from .ingest import BinaryContourImage


def _polyline(mask, xs, ys, closed=False):
    h, w = mask.shape
    px = np.floor(np.asarray(xs, dtype=np.float64) + 0.5).astype(np.int64)
    py = np.floor(np.asarray(ys, dtype=np.float64) + 0.5).astype(np.int64)
    n = len(px)
    stop = n if closed else n - 1
    for i in range(stop):
        j = (i + 1) % n
        rr, cc = line(py[i], px[i], py[j], px[j])
        ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        mask[rr[ok], cc[ok]] = True
    if n == 1 and 0 <= py[0] < h and 0 <= px[0] < w:
        mask[py[0], px[0]] = True
    return mask


def slab(gap=20, width=120, height=None):
    """Two full-width horizontal lines ``gap`` pixels apart.

    Returns ``(img, axis_row)``; the axis row is fractional for odd gaps.
    """
    height = height or gap + 21
    m = np.zeros((height, width), dtype=bool)
    top = (height - gap) // 2
    m[top, :] = True
    m[top + gap, :] = True
    return BinaryContourImage(m), top + gap / 2.0


def wedge(object_angle_deg, reach=60):
    """Two rays from an apex, mirror-symmetric about a horizontal bisector.

    The wedge is parameterized by the object angle ``theta`` of its bisector:
    each ray leaves the bisector at ``90 - theta`` degrees, so the opening is
    ``180 - 2 theta``. Returns ``(img, (x0, y0))`` with the apex position;
    bisector points ``(x0 + t, y0)`` with ``0 < t <= reach`` are clear of the
    image border's influence.
    """
    a = np.radians(90.0 - object_angle_deg)
    length = int(reach * 1.5 + 40)
    w = int(20 + max(length * np.cos(a), reach * (1 + np.sin(a))) + 30)
    h = int(2 * length * np.sin(a) + 41) | 1
    m = np.zeros((h, w), dtype=bool)
    y0, x0 = h // 2, 20
    x1, y1 = x0 + length * np.cos(a), y0 + length * np.sin(a)
    rr, cc = line(y0, x0, int(round(y1)), int(round(x1)))
    ok = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
    m[rr[ok], cc[ok]] = True
    m |= m[::-1]
    return BinaryContourImage(m), (x0, y0)


def rectangle(width=40, height=20, margin=12):
    """Axis-aligned rectangle outline; interior ``width`` x ``height`` between
    the outline pixel centres. Returns ``(img, (x0, y0, x1, y1))``."""
    m = np.zeros((height + 2 * margin + 1, width + 2 * margin + 1), dtype=bool)
    x0, y0 = margin, margin
    x1, y1 = x0 + width, y0 + height
    m[y0, x0:x1 + 1] = True
    m[y1, x0:x1 + 1] = True
    m[y0:y1 + 1, x0] = True
    m[y0:y1 + 1, x1] = True
    return BinaryContourImage(m), (x0, y0, x1, y1)


def profile_shape(half_width, length=120, margin=16, closed=True):
    """Closed outline symmetric about a horizontal axis.

    ``half_width`` maps ``s`` in ``[0, length]`` to the distance from the axis
    to each side. Returns ``(img, axis_row, x_start)``.
    """
    s = np.arange(length + 1, dtype=np.float64)
    hw = np.asarray(half_width(s), dtype=np.float64)
    h = int(2 * np.ceil(hw.max()) + 2 * margin) | 1
    w = length + 2 * margin + 1
    m = np.zeros((h, w), dtype=bool)
    y0, x0 = h // 2, margin
    _polyline(m, x0 + s, y0 - hw)
    _polyline(m, x0 + s, y0 + hw)
    if closed:
        _polyline(m, [x0, x0], [y0 - hw[0], y0 + hw[0]])
        _polyline(m, [x0 + length, x0 + length], [y0 - hw[-1], y0 + hw[-1]])
    return BinaryContourImage(m), y0, x0


def parallel_ribbon(half_width=8, length=160):
    """Closed ribbon of constant width."""
    return profile_shape(lambda s: np.full_like(s, float(half_width)), length)


def linear_flare(slope=0.2, half_width=6, length=120):
    """Closed outline whose sides diverge linearly (a tapering ribbon)."""
    return profile_shape(lambda s: half_width + slope * s, length)


def dumbbell(bulb=18, neck=5, gap=50, margin=10):
    """Outline of two disks joined by a straight bar.

    Returns ``(img, axis_row, x_start)`` like :func:`profile_shape`.
    """
    h = 2 * bulb + 2 * margin + 1
    w = 4 * bulb + gap + 2 * margin + 1
    filled = np.zeros((h, w), dtype=bool)
    y0, c1, c2 = h // 2, margin + bulb, w - 1 - margin - bulb
    for c in (c1, c2):
        filled[disk((y0, c), bulb + 0.5)] = True
    filled[y0 - neck:y0 + neck + 1, c1:c2 + 1] = True
    return BinaryContourImage(filled & ~ndi.binary_erosion(filled)), y0, margin


def annulus(inner=12, outer=24, margin=6):
    """Two concentric circles."""
    size = 2 * (outer + margin) + 1
    m = np.zeros((size, size), dtype=bool)
    c = outer + margin
    for r in (inner, outer):
        rr, cc = ellipse_perimeter(c, c, r, r)
        m[rr, cc] = True
    return BinaryContourImage(m), (c, c)


def arc_ribbon(radius=40, half_width=6, sweep=np.pi / 2, margin=12):
    """Two concentric arcs and their closing ends. Returns ``(img, centre)``."""
    size = int(radius + half_width + margin)
    m = np.zeros((size + margin, size + margin), dtype=bool)
    cx, cy = margin, margin
    t = np.linspace(0.0, sweep, int(sweep * (radius + half_width) * 2) + 2)
    for r in (radius - half_width, radius + half_width):
        _polyline(m, cx + r * np.cos(t), cy + r * np.sin(t))
    for a in (0.0, sweep):
        r = np.array([radius - half_width, radius + half_width])
        _polyline(m, cx + r * np.cos(a), cy + r * np.sin(a))
    return BinaryContourImage(m), (cx, cy)


def road_scene(width=320, height=240, seed=0, lanes=3):
    """A road of ``lanes`` lanes receding to the horizon, with foliage
    scribbles beside it.

    Returns ``(img, road_mask)``; ``road_mask`` marks the border and lane lines.
    """
    rng = np.random.default_rng(seed)
    m = np.zeros((height, width), dtype=bool)
    horizon = height // 3
    m[horizon, :] = True
    road = np.zeros_like(m)
    cx = width // 2
    for k in range(lanes + 1):
        f = -1.0 + 2.0 * k / lanes
        _polyline(road, [cx + f * 8, cx + f * 60], [horizon, height - 1])
    m |= road
    for _ in range(70):
        side = rng.choice([-1, 1])
        x = cx + side * rng.uniform(80, width / 2 - 10)
        y = rng.uniform(horizon + 10, height - 10)
        n = rng.integers(4, 9)
        ang = np.cumsum(rng.uniform(-1.6, 1.6, n)) + rng.uniform(0, 2 * np.pi)
        step = rng.uniform(2.0, 6.0, n)
        xs = x + np.concatenate([[0.0], np.cumsum(step * np.cos(ang))])
        ys = y + np.concatenate([[0.0], np.cumsum(step * np.sin(ang))])
        _polyline(m, xs, ys)
    return BinaryContourImage(m), road


def _random_shape(m, rng, x, y, size):
    kind = rng.integers(0, 3)
    h, w = m.shape
    if kind == 0:
        a, b = size * rng.uniform(0.5, 1.0), size * rng.uniform(0.3, 1.0)
        rr, cc = ellipse_perimeter(int(y), int(x), int(b), int(a),
                                   orientation=rng.uniform(0, np.pi), shape=m.shape)
        m[rr, cc] = True
    elif kind == 1:
        a, b = size * rng.uniform(0.5, 1.0), size * rng.uniform(0.3, 1.0)
        rr, cc = polygon_perimeter([y - b, y - b, y + b, y + b], [x - a, x + a, x + a, x - a],
                                   shape=m.shape, clip=True)
        m[rr, cc] = True
    else:
        k = rng.integers(3, 7)
        ang = np.sort(rng.uniform(0, 2 * np.pi, k))
        rad = size * rng.uniform(0.5, 1.0, k)
        _polyline(m, np.clip(x + rad * np.cos(ang), 0, w - 1),
                  np.clip(y + rad * np.sin(ang), 0, h - 1), closed=True)


def multi_region_drawing(seed=0, shape=(256, 256), count=8):
    """Random ellipses, boxes and polygons, some overlapping or nested."""
    rng = np.random.default_rng(seed)
    h, w = shape
    m = np.zeros(shape, dtype=bool)
    hi = min(h, w) / 4
    lo = min(14.0, 0.6 * hi)
    for _ in range(count):
        size = rng.uniform(lo, hi)
        x = rng.uniform(size + 2, w - size - 2)
        y = rng.uniform(size + 2, h - size - 2)
        _random_shape(m, rng, x, y, size)
        if rng.random() < 0.3:
            _random_shape(m, rng, x, y, size * 0.45)
    return BinaryContourImage(m)


def artist_drawing(seed=0, shape=(768, 1024)):
    """A busy scene: horizon, a road, buildings with windows, trees, clutter."""
    rng = np.random.default_rng(seed)
    h, w = shape
    m = np.zeros(shape, dtype=bool)
    horizon = int(h * 0.4)
    m[horizon, :] = True
    cx = w // 2
    for side in (-1, 1):
        _polyline(m, [cx + side * 12, cx + side * w * 0.3], [horizon, h - 1])
        _polyline(m, [cx + side * 2, cx + side * 20], [horizon + 20, h - 1])
    for _ in range(9):
        bw, bh = rng.uniform(50, 120), rng.uniform(80, horizon - 20)
        bx = rng.uniform(10, w - bw - 10)
        rr, cc = polygon_perimeter([horizon - bh, horizon - bh, horizon, horizon],
                                   [bx, bx + bw, bx + bw, bx], shape=shape, clip=True)
        m[rr, cc] = True
        for _ in range(rng.integers(2, 7)):
            wx, wy = bx + rng.uniform(8, bw - 20), horizon - bh + rng.uniform(8, bh - 24)
            rr, cc = polygon_perimeter([wy, wy, wy + 14, wy + 14], [wx, wx + 10, wx + 10, wx],
                                       shape=shape, clip=True)
            m[rr, cc] = True
    for _ in range(14):
        side = rng.choice([-1, 1])
        x = cx + side * rng.uniform(w * 0.33, w * 0.48)
        y = rng.uniform(horizon + 40, h - 60)
        r = rng.uniform(18, 45)
        rr, cc = ellipse_perimeter(int(y), int(x), int(r), int(r * 0.8), shape=shape)
        m[rr, cc] = True
        _polyline(m, [x - 3, x - 3], [y + r * 0.8, y + r * 0.8 + 30])
        _polyline(m, [x + 3, x + 3], [y + r * 0.8, y + r * 0.8 + 30])
    for _ in range(25):
        x, y = rng.uniform(20, w - 20), rng.uniform(horizon + 10, h - 10)
        n = rng.integers(3, 7)
        ang = np.cumsum(rng.uniform(-1.2, 1.2, n)) + rng.uniform(0, 2 * np.pi)
        step = rng.uniform(4.0, 12.0, n)
        _polyline(m, np.clip(x + np.concatenate([[0.0], np.cumsum(step * np.cos(ang))]), 0, w - 1),
                  np.clip(y + np.concatenate([[0.0], np.cumsum(step * np.sin(ang))]), 0, h - 1))
    return BinaryContourImage(m)
