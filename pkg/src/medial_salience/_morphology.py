"""Binary raster primitives: neighbourhood codes, simple-point tests, thinning."""

import numpy as np
import numba

# (dy, dx) of the 8 neighbours, clockwise from north-west; bit k of a
# neighbourhood code is set when neighbour k is foreground.
OFFSETS = np.array(
    [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)],
    dtype=np.int64,
)


def _components(cells, adjacent):
    seen, count = set(), 0
    for c in cells:
        if c in seen:
            continue
        count += 1
        stack = [c]
        seen.add(c)
        while stack:
            a = stack.pop()
            for b in cells:
                if b not in seen and adjacent(a, b):
                    seen.add(b)
                    stack.append(b)
    return count


def _build_tables():
    simple = np.zeros(256, dtype=np.bool_)
    count = np.zeros(256, dtype=np.int64)
    branches = np.zeros(256, dtype=np.int64)
    adj8 = lambda a, b: max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1
    adj4 = lambda a, b: abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1
    for code in range(256):
        fg = [tuple(OFFSETS[k]) for k in range(8) if code >> k & 1]
        bg = [tuple(OFFSETS[k]) for k in range(8) if not code >> k & 1]
        count[code] = len(fg)
        # background components 4-adjacent to the centre
        bg_cells = set(bg)
        seen, c4 = set(), 0
        for start in bg:
            if abs(start[0]) + abs(start[1]) != 1 or start in seen:
                continue
            c4 += 1
            stack = [start]
            seen.add(start)
            while stack:
                a = stack.pop()
                for b in bg_cells:
                    if b not in seen and adj4(a, b):
                        seen.add(b)
                        stack.append(b)
        simple[code] = _components(fg, adj8) == 1 and c4 == 1
        # ring components: neighbours joined only through ring adjacency
        ring = [code >> k & 1 for k in range(8)]
        if all(ring):
            branches[code] = 1
        else:
            branches[code] = sum(
                1 for k in range(8) if ring[k] and not ring[(k - 1) % 8]
            )
    return simple, count, branches


SIMPLE, NEIGHBOURS, RING_BRANCHES = _build_tables()


def neighbourhood_codes(mask):
    """8-bit neighbourhood code of every pixel (outside the image counts as 0)."""
    m = np.pad(mask.astype(np.uint8), 1)
    h, w = mask.shape
    code = np.zeros((h, w), dtype=np.uint8)
    for k, (dy, dx) in enumerate(OFFSETS):
        code |= m[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] << k
    return code


def neighbour_count(mask):
    return np.where(mask, NEIGHBOURS[neighbourhood_codes(mask)], 0)


@numba.njit(cache=True)
def _code_at(mask, y, x):
    h, w = mask.shape
    code = 0
    for k in range(8):
        yy = y + OFFSETS[k, 0]
        xx = x + OFFSETS[k, 1]
        if 0 <= yy < h and 0 <= xx < w and mask[yy, xx]:
            code |= 1 << k
    return code


@numba.njit(cache=True)
def _thin_in_order(mask, order, simple, neighbours, keep_ends):
    w = mask.shape[1]
    changed = True
    while changed:
        changed = False
        for idx in order:
            y = idx // w
            x = idx - y * w
            if not mask[y, x]:
                continue
            code = _code_at(mask, y, x)
            if simple[code] and (not keep_ends or neighbours[code] > 1):
                mask[y, x] = False
                changed = True
    return mask


def thin_by_priority(mask, priority, keep_ends=True):
    """Remove simple pixels, lowest priority first, until none is removable.

    Ties in ``priority`` are broken by raster order. Pixels with a single
    foreground neighbour are kept when ``keep_ends`` is set, so open curves
    do not shrink.
    """
    out = np.array(mask, dtype=np.bool_, copy=True)
    ys, xs = np.nonzero(out)
    if ys.size == 0:
        return out
    flat = ys * out.shape[1] + xs
    order = flat[np.lexsort((flat, np.asarray(priority)[ys, xs]))]
    return _thin_in_order(out, order.astype(np.int64), SIMPLE, NEIGHBOURS, keep_ends)


def extend_endpoints(thin, support):
    """Grow each curve end straight ahead while it stays inside ``support``.

    Priority thinning retracts open ends by a pixel or so; this puts them back.
    A pixel is only added when it touches the current end and nothing else.
    """
    out = thin.copy()
    h, w = out.shape
    counts = neighbour_count(out)
    ends = list(zip(*np.nonzero(counts == 1)))
    for y, x in ends:
        while True:
            nb = [(y + dy, x + dx) for dy, dx in OFFSETS
                  if 0 <= y + dy < h and 0 <= x + dx < w and out[y + dy, x + dx]]
            if len(nb) != 1:
                break
            ny, nx = nb[0]
            ty, tx = 2 * y - ny, 2 * x - nx
            if not (0 <= ty < h and 0 <= tx < w) or out[ty, tx] or not support[ty, tx]:
                break
            touching = [(ty + dy, tx + dx) for dy, dx in OFFSETS
                        if 0 <= ty + dy < h and 0 <= tx + dx < w and out[ty + dy, tx + dx]]
            if touching != [(y, x)]:
                break
            out[ty, tx] = True
            y, x = ty, tx
    return out
