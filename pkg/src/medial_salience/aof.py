"""Average outward flux of the distance gradient, skeleton extraction and
spoke-based boundary reconstruction.

The flux at a pixel is the mean of ``<grad D(q), N>`` over points ``q`` on a
small circle around it, ``N`` being the outward circle normal. It tends to
``-(2/pi) sin(theta)`` on the medial axis (``theta`` the object angle) and to
zero elsewhere.

The gradient at a sample is read from the nearest contour pixel rather than
by differencing the distance grid: along straight stretches it is that
pixel's contour normal, turned to face the sample; at corners, junctions and
curve ends it is the unit vector from the pixel to the sample. Differencing
smears the ridge over a pixel and loses about half the flux.
"""

from dataclasses import dataclass

import numba
import numpy as np
from PIL import Image
from scipy import ndimage as ndi

from . import _morphology as morph
from ._validation import MAX_AOF, check_scalar, check_tau
from .exceptions import ParameterError


@dataclass(frozen=True, eq=False)
class AofMap:
    """Per-pixel flux on the field's crop grid; ``nan`` off the region."""

    region: int | None
    aof: np.ndarray
    disk_radius: float = 1.0
    sample_count: int = 60
    origin: tuple = (0, 0)

    @property
    def is_empty(self):
        """True when no pixel of the region could host a disk."""
        return not np.isfinite(self.aof).any()


@dataclass(frozen=True)
class SkeletonPoint:
    x: int
    y: int
    radius: float
    aof_value: float
    object_angle: float


@dataclass(frozen=True, eq=False)
class Skeleton:
    """Skeleton pixels as parallel arrays (image coordinates).

    ``labels`` holds each point's region id; points of different regions are
    never linked by the graph stage even when their pixels touch.
    """

    x: np.ndarray
    y: np.ndarray
    radius: np.ndarray
    aof_value: np.ndarray
    object_angle: np.ndarray
    labels: np.ndarray
    shape: tuple

    def __len__(self):
        return int(self.x.size)

    @property
    def points(self):
        return [SkeletonPoint(int(a), int(b), float(r), float(v), float(t))
                for a, b, r, v, t in zip(self.x, self.y, self.radius,
                                         self.aof_value, self.object_angle)]

    def mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[self.y, self.x] = True
        return m

    def label_image(self):
        lab = np.zeros(self.shape, dtype=np.int32)
        lab[self.y, self.x] = self.labels
        return lab

    def subset(self, keep):
        keep = np.asarray(keep)
        return Skeleton(self.x[keep], self.y[keep], self.radius[keep],
                        self.aof_value[keep], self.object_angle[keep],
                        self.labels[keep], self.shape)


def object_angle(aof_value):
    """Object angle (radians) from a flux value."""
    return np.arcsin(np.clip(np.abs(aof_value) * (np.pi / 2.0), 0.0, 1.0))


def sample_directions(n):
    """Unit vectors at angles ``2 pi k / n``.

    When ``n`` is a multiple of 4 the other quadrants are exact rotations of
    the first, which keeps the flux map equivariant under 90 degree turns.
    """
    if n % 4:
        a = 2.0 * np.pi * np.arange(n) / n
        return np.cos(a), np.sin(a)
    q = n // 4
    a = 2.0 * np.pi * np.arange(q) / n
    c, s = np.cos(a), np.sin(a)
    cs = np.concatenate([c, -s, -c, s])
    sn = np.concatenate([s, c, -s, -c])
    return cs, sn


TIE_SLOTS = 3
TIE_SHIFT = 28
SITE_MASK = (1 << TIE_SHIFT) - 1


@numba.njit(cache=True, parallel=True)
def _tied_sites(site_x, site_y):
    """Each pixel's nearest contour site plus any equally near ones.

    The transform keeps one of several equidistant sites in scan order; the
    others are recovered from the picks of the 3x3 neighbours and stored in
    ``tx``, ``ty``. ``code`` is ``x + 1`` of the transform's pick with the
    number of extra sites in the high bits.
    """
    h, w = site_x.shape
    tx = np.zeros((h, w, TIE_SLOTS), np.int32)
    ty = np.zeros((h, w, TIE_SLOTS), np.int32)
    code = np.empty((h, w), np.int32)
    for y in numba.prange(h):
        for x in range(w):
            px = site_x[y, x]
            py = site_y[y, x]
            d = (x - px) ** 2 + (y - py) ** 2
            n = 0
            for yy in range(max(y - 1, 0), min(y + 2, h)):
                for xx in range(max(x - 1, 0), min(x + 2, w)):
                    sx = site_x[yy, xx]
                    sy = site_y[yy, xx]
                    if (sx == px and sy == py) or (x - sx) ** 2 + (y - sy) ** 2 != d:
                        continue
                    new = n < TIE_SLOTS
                    for j in range(n):
                        if tx[y, x, j] == sx and ty[y, x, j] == sy:
                            new = False
                            break
                    if new:
                        tx[y, x, n] = sx
                        ty[y, x, n] = sy
                        n += 1
            code[y, x] = (px + 1) | (n << TIE_SHIFT)
    return code, site_y, tx, ty


@numba.njit(cache=True, inline="always")
def _offer(sx, sy, qx, qy, best, m, cand_x, cand_y):
    dd = (qx - sx) ** 2 + (qy - sy) ** 2
    if dd < best - 1e-9:
        cand_x[0] = sx
        cand_y[0] = sy
        return dd, 1
    if dd > best + 1e-9:
        return best, m
    for j in range(m):
        if cand_x[j] == sx and cand_y[j] == sy:
            return best, m
    cand_x[m] = sx
    cand_y[m] = sy
    return best, m + 1


@numba.njit(cache=True, inline="always")
def _contribution(qx, qy, bx, by, c, s, nrm_x, nrm_y, radial):
    ex = qx - bx
    ey = qy - by
    if radial[by + 1, bx + 1]:
        nr = np.sqrt(ex * ex + ey * ey)
        return (ex * c + ey * s) / nr if nr > 0.0 else 0.0
    gx = nrm_x[by + 1, bx + 1]
    gy = nrm_y[by + 1, bx + 1]
    side = ex * gx + ey * gy
    # on the contour's tangent line the outward side is undefined
    if abs(side) < 1e-12:
        return 0.0
    v = gx * c + gy * s
    return -v if side < 0.0 else v


def _stencil(offset, cs, sn, r):
    """Per-sample geometry relative to an integer pixel centre.

    Rows hold the sample offset ``(dx, dy)``, the pixel it falls in and the
    first pixel and count of the surrounding pixel rows and columns
    (``floor .. ceil``, so a sample on a pixel row or column uses that alone).
    Offsets are snapped so mirrored samples give mirrored geometry.
    """
    dx = np.round(offset[0] + r * cs, 12)
    dy = np.round(offset[1] + r * sn, 12)
    geo = [np.sign(dx) * np.floor(np.abs(dx) + 0.5), np.sign(dy) * np.floor(np.abs(dy) + 0.5),
           np.floor(dx), np.where(np.floor(dx) == dx, 1, 2),
           np.floor(dy), np.where(np.floor(dy) == dy, 1, 2)]
    return np.stack([dx, dy]), np.stack(geo).astype(np.int64)


@numba.njit(cache=True)
def _flux(x, y, lab, lone, labels, sites, nrm_x, nrm_y, radial, off, geo, cs, sn,
          cand_x, cand_y):
    code, site_y, tx, ty = sites
    h, w = labels.shape
    acc = 0.0
    cnt = 0
    for k in range(cs.shape[0]):
        qx = x + off[0, k]
        qy = y + off[1, k]
        rx = x + geo[0, k]
        ry = y + geo[1, k]
        # samples past the image edge stay: the field extends there (or the
        # frame does); only samples inside another region are dropped
        if not lone and 0 <= rx < w and 0 <= ry < h:
            lr = labels[ry, rx]
            if lr != lab and lr != 0:
                continue
        xa = x + geo[2, k]
        xb = min(xa + geo[3, k], w)
        xa = max(xa, 0)
        ya = y + geo[4, k]
        yb = min(ya + geo[5, k], h)
        ya = max(ya, 0)
        # nearest contour site of the surrounding pixels
        best = 1e300
        bx = 0
        by = 0
        tied = False
        extra = False
        for yy in range(ya, yb):
            for xx in range(xa, xb):
                c = code[yy, xx]
                sx = (c & SITE_MASK) - 1
                sy = site_y[yy, xx]
                extra |= c >= (1 << TIE_SHIFT)
                dd = (qx - sx) ** 2 + (qy - sy) ** 2
                if dd < best - 1e-9:
                    best = dd
                    bx = sx
                    by = sy
                    tied = False
                elif dd <= best + 1e-9 and (sx != bx or sy != by):
                    tied = True
        if extra and not tied:
            for yy in range(ya, yb):
                for xx in range(xa, xb):
                    for i in range(code[yy, xx] >> TIE_SHIFT):
                        sx = tx[yy, xx, i]
                        sy = ty[yy, xx, i]
                        dd = (qx - sx) ** 2 + (qy - sy) ** 2
                        if dd <= best + 1e-9 and (sx != bx or sy != by):
                            tied = True
        if best == 1e300:
            continue
        cnt += 1
        if not tied:
            acc += _contribution(qx, qy, bx, by, cs[k], sn[k], nrm_x, nrm_y, radial)
            continue
        # equally near sites are averaged so scan order does not matter
        best = 1e300
        m = 0
        for yy in range(ya, yb):
            for xx in range(xa, xb):
                c = code[yy, xx]
                best, m = _offer((c & SITE_MASK) - 1, site_y[yy, xx], qx, qy, best, m,
                                 cand_x, cand_y)
                for i in range(c >> TIE_SHIFT):
                    best, m = _offer(tx[yy, xx, i], ty[yy, xx, i], qx, qy, best, m,
                                     cand_x, cand_y)
        part = 0.0
        for j in range(m):
            part += _contribution(qx, qy, cand_x[j], cand_y[j], cs[k], sn[k],
                                  nrm_x, nrm_y, radial)
        acc += part / m
    if cnt == 0:
        return np.nan
    return acc / cnt


@numba.njit(cache=True, parallel=True)
def _flux_map(labels, lone, region, sites, nrm_x, nrm_y, radial, off, geo, cs, sn, out):
    h, w = labels.shape
    for y in numba.prange(h):
        cand_x = np.empty(4 * TIE_SLOTS, np.int64)
        cand_y = np.empty(4 * TIE_SLOTS, np.int64)
        for x in range(w):
            lab = labels[y, x]
            if lab <= 0 or (region > 0 and lab != region):
                continue
            out[y, x] = _flux(x, y, lab, lone[y, x], labels, sites, nrm_x, nrm_y, radial,
                              off, geo, cs, sn, cand_x, cand_y)


@numba.njit(cache=True, parallel=True)
def _flux_points(ys, xs, labels, lone, sites, nrm_x, nrm_y, radial, offs, geos, cs, sn, out):
    for i in numba.prange(ys.shape[0]):
        cand_x = np.empty(4 * TIE_SLOTS, np.int64)
        cand_y = np.empty(4 * TIE_SLOTS, np.int64)
        y = ys[i]
        x = xs[i]
        lab = labels[y, x]
        best = np.inf
        for j in range(offs.shape[0]):
            v = _flux(x, y, lab, lone[y, x], labels, sites, nrm_x, nrm_y, radial,
                      offs[j], geos[j], cs, sn, cand_x, cand_y)
            if v < best:
                best = v
        out[i] = best


def _alone(labels, geo):
    """Pixels with no other region within reach of their samples."""
    reach = int(np.abs(geo[..., :2, :]).max())
    size = 2 * reach + 1
    top = ndi.maximum_filter(labels, size, mode="nearest")
    low = ndi.minimum_filter(np.where(labels > 0, labels, labels.max() + 1), size,
                             mode="nearest")
    return ((top == labels) | (top == 0)) & ((low == labels) | (low > labels.max()))


def _sites(field):
    return _tied_sites(field.site_x, field.site_y)


def _check_disk(disk_radius, sample_count):
    check_scalar(disk_radius, "disk_radius", low=0.5)
    check_scalar(sample_count, "sample_count", low=8, integer=True)


def compute_aof(field, disk_radius=1.0, sample_count=60):
    """Average outward flux at every interior pixel of ``field``."""
    _check_disk(disk_radius, sample_count)
    cs, sn = sample_directions(int(sample_count))
    out = np.full(field.shape, np.nan)
    region = -1 if field.region is None else int(field.region)
    off, geo = _stencil((0.0, 0.0), cs, sn, float(disk_radius))
    _flux_map(field.labels, _alone(field.labels, geo), region, _sites(field),
              field.normal_x, field.normal_y, field.radial, off, geo, cs, sn, out)
    # round away last-bit noise so ties are decided by position, not by ulps
    out = np.round(out, 12)
    return AofMap(field.region, out, float(disk_radius), int(sample_count), field.origin)


def threshold_aof(aof_map, tau=0.25):
    """Pixels whose inward flux ``-aof`` reaches ``tau``."""
    check_tau(tau)
    with np.errstate(invalid="ignore"):
        return np.nan_to_num(-aof_map.aof, nan=-np.inf) >= tau


def peak_flux(field, ys, xs, disk_radius=1.0, sample_count=60, spread=0.5):
    """Most negative flux over disk centres within ``spread`` of each pixel.

    A pixel can sit up to half a pixel off the true axis, which biases its
    flux toward zero; probing a 3x3 lattice of centres inside the pixel cell
    recovers the on-axis value.
    """
    _check_disk(disk_radius, sample_count)
    cs, sn = sample_directions(int(sample_count))
    o = (-spread, 0.0, spread)
    st = [_stencil((a, b), cs, sn, float(disk_radius)) for b in o for a in o]
    offs = np.stack([t[0] for t in st])
    geos = np.stack([t[1] for t in st])
    out = np.empty(len(ys))
    _flux_points(np.asarray(ys, np.int64), np.asarray(xs, np.int64), field.labels,
                 _alone(field.labels, geos), _sites(field),
                 field.normal_x, field.normal_y, field.radial,
                 offs, geos, cs, sn, out)
    return np.round(out, 12)


def extract_skeleton(aof_map, field, tau=0.25, refine=True):
    """Threshold the flux map and thin the result to unit width.

    Points with radius below 1 are dropped. Thinning removes the weakest flux
    first, region by region. With ``refine`` the reported flux (and so the
    object angle) is the peak over sub-pixel disk centres.
    """
    check_tau(tau)
    if aof_map.aof.shape != field.shape or aof_map.region != field.region:
        raise ParameterError("flux map and distance field do not match")
    cand = threshold_aof(aof_map, tau) & field.interior
    with np.errstate(invalid="ignore"):
        cand &= np.nan_to_num(field.dist, nan=0.0) >= 1.0
    lab = np.where(cand, field.labels, 0)
    thin = np.zeros_like(cand)
    priority = np.nan_to_num(-aof_map.aof, nan=0.0)
    for idx, sl in enumerate(ndi.find_objects(lab)):
        if sl is None:
            continue
        sub = lab[sl] == idx + 1
        thin[sl] |= morph.thin_by_priority(sub, priority[sl], keep_ends=True)
    ys, xs = np.nonzero(thin)
    values = aof_map.aof[ys, xs]
    if refine and ys.size:
        values = np.minimum(values, peak_flux(field, ys, xs, aof_map.disk_radius,
                                              aof_map.sample_count))
    oy, ox = field.origin
    return Skeleton(
        (xs + ox).astype(np.int64), (ys + oy).astype(np.int64),
        field.dist[ys, xs].astype(np.float64), values, object_angle(values),
        field.labels[ys, xs].astype(np.int32),
        _image_shape(field),
    )


def _image_shape(field):
    h, w = field.shape
    return (h + field.origin[0], w + field.origin[1])


def reconstruct_boundary(skeleton, tangents):
    """Spoke tips ``p + R * rotate(t, +-theta)`` for every point with a tangent.

    ``tangents`` is an ``(n, 2)`` array of unit ``(tx, ty)``, oriented toward
    decreasing radius; rows containing ``nan`` are skipped. Returns the
    ``(m, 2)`` array of ``(x, y)`` tips and the number of skipped points.
    """
    t = np.asarray(tangents, dtype=np.float64).reshape(-1, 2)
    if t.shape[0] != len(skeleton):
        raise ParameterError("one tangent per skeleton point is required")
    ok = np.all(np.isfinite(t), axis=1)
    tips = spoke_tips(skeleton.x[ok], skeleton.y[ok], skeleton.radius[ok],
                      skeleton.object_angle[ok], t[ok])
    return np.concatenate(tips, axis=0), int((~ok).sum())


def spoke_tips(x, y, radius, theta, tangents):
    """The two spoke tips of each point, as ``(plus, minus)`` arrays."""
    tx, ty = tangents[:, 0], tangents[:, 1]
    c, s = np.cos(theta), np.sin(theta)
    out = []
    for sign in (1.0, -1.0):
        dx = c * tx - sign * s * ty
        dy = sign * s * tx + c * ty
        out.append(np.stack([x + radius * dx, y + radius * dy], axis=1))
    return out


def save_aof_png(aof_map, path):
    """8-bit PNG of ``|aof|`` scaled so that ``2/pi`` maps to 255."""
    v = np.nan_to_num(np.abs(aof_map.aof), nan=0.0) / MAX_AOF
    arr = np.clip(np.floor(v * 255.0 + 0.5), 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path, format="PNG")


def save_overlay_png(skeleton, contour_mask, path):
    """Skeleton in red over gray contours on white."""
    h, w = contour_mask.shape
    rgb = np.full((h, w, 3), 255, dtype=np.uint8)
    rgb[contour_mask] = 128
    rgb[skeleton.y, skeleton.x] = (255, 0, 0)
    Image.fromarray(rgb).save(path, format="PNG")
