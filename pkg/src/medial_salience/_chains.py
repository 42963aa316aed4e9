"""Decomposition of 1-pixel-wide pixel sets into chains between nodes.

A pixel's degree is the number of separate runs of set pixels around its
8-ring. On clean curves it equals the neighbour count, but it also reads a
4-connected crossing or a staircase corner correctly. Degree 1 marks an end,
2 a curve pixel, 3 or more a junction.
"""

import numpy as np

from . import _morphology as morph

END, REGULAR, JUNCTION, ISOLATED = 1, 2, 3, 0


def _codes(mask, labels):
    if labels is None:
        return morph.neighbourhood_codes(mask)
    h, w = mask.shape
    m = np.pad(mask, 1)
    lab = np.pad(labels, 1, constant_values=-1)
    code = np.zeros((h, w), dtype=np.uint8)
    for k, (dy, dx) in enumerate(morph.OFFSETS):
        sm = m[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        sl = lab[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        code |= (sm & (sl == labels)).astype(np.uint8) << k
    return code


def _run_table():
    table = []
    for code in range(256):
        ring = [bool(code >> k & 1) for k in range(8)]
        if all(ring):
            table.append([list(range(8))])
            continue
        if not any(ring):
            table.append([])
            continue
        start = ring.index(False)
        runs, cur = [], []
        for i in range(1, 9):
            k = (start + i) % 8
            if ring[k]:
                cur.append(k)
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        table.append(runs)
    return table


RUNS = _run_table()
_OFF = [tuple(int(v) for v in o) for o in morph.OFFSETS]


def degrees(mask, labels=None):
    """Ring-run degree; with ``labels`` only same-label neighbours count."""
    return np.where(mask, morph.RING_BRANCHES[_codes(mask, labels)], 0)


def classify(mask, labels=None):
    """Per-pixel label: END, REGULAR, JUNCTION or ISOLATED (and -1 off the set)."""
    deg = degrees(mask, labels)
    lab = np.full(mask.shape, -1, dtype=np.int8)
    lab[mask & (deg == 0)] = ISOLATED
    lab[mask & (deg == 1)] = END
    lab[mask & (deg == 2)] = REGULAR
    lab[mask & (deg >= 3)] = JUNCTION
    return lab


class _Walker:
    def __init__(self, mask, labels=None):
        self.mask = mask
        self.h, self.w = mask.shape
        self.codes = _codes(mask, labels)
        self.label = classify(mask, labels)
        self.visited = np.zeros(mask.shape, dtype=bool)

    def runs(self, y, x):
        """Neighbour runs around the 8-ring, each a list of (y, x)."""
        return [[(y + _OFF[k][0], x + _OFF[k][1]) for k in run]
                for run in RUNS[self.codes[y, x]]]

    def pick(self, y, x, run):
        # junction first, then a 4-neighbour, then the first pixel of the run
        for p in run:
            if self.label[p] == JUNCTION:
                return p
        for p in run:
            if abs(p[0] - y) + abs(p[1] - x) == 1:
                return p
        return run[0]

    def is_node(self, p):
        return self.label[p] != REGULAR

    def follow(self, start, first):
        """Walk from node ``start`` through ``first`` until the next node."""
        path = [start, first]
        prev, cur = start, first
        while not self.is_node(cur):
            self.visited[cur] = True
            forward = [r for r in self.runs(*cur) if prev not in r]
            if not forward:
                break
            nxt = self.pick(cur[0], cur[1], forward[0])
            if nxt == start and len(path) > 2:
                path.append(nxt)
                break
            if not self.is_node(nxt) and self.visited[nxt]:
                break
            prev, cur = cur, nxt
            path.append(cur)
        return path


def chains(mask, labels=None):
    """Return ``(paths, closed, label)``; each path is a list of ``(y, x)``.

    Paths start and end on node pixels (ends or junctions), which may be
    shared between paths. Loops with no node are returned once with
    ``closed=True`` and do not repeat their first pixel. A pixel left on no
    path (inside a junction cluster) becomes a path of its own. With
    ``labels``, pixels with different labels are never linked.
    """
    walker = _Walker(mask, labels)
    label = walker.label
    paths, closed = [], []
    seen_pairs = set()
    for y, x in zip(*np.nonzero(mask & (label != REGULAR))):
        start = (int(y), int(x))
        for run in walker.runs(*start):
            for nb in run:
                if walker.is_node(nb):
                    # direct node-to-node links, except inside junction clusters
                    if label[start] == JUNCTION and label[nb] == JUNCTION:
                        continue
                    key = (min(start, nb), max(start, nb))
                    if key in seen_pairs:
                        continue
                    seen_pairs.add(key)
                    paths.append([start, nb])
                    closed.append(False)
                    continue
                if walker.visited[nb]:
                    continue
                path = walker.follow(start, nb)
                paths.append(path)
                closed.append(False)
                if walker.is_node(path[-1]):
                    seen_pairs.add((min(path[-2], path[-1]), max(path[-2], path[-1])))
        if not walker.runs(*start):
            paths.append([start])
            closed.append(False)

    for y, x in zip(*np.nonzero(mask & (label == REGULAR) & ~walker.visited)):
        start = (int(y), int(x))
        if walker.visited[start]:
            continue
        walker.visited[start] = True
        path = [start]
        prev, cur = None, start
        while True:
            runs = walker.runs(*cur)
            forward = [r for r in runs if prev is None or prev not in r]
            if not forward:
                break
            nxt = walker.pick(cur[0], cur[1], forward[0])
            if nxt == start or walker.visited[nxt]:
                break
            walker.visited[nxt] = True
            prev, cur = cur, nxt
            path.append(cur)
        paths.append(path)
        closed.append(len(path) > 2)

    # junction pixels touching only other junctions lie on no chain
    covered = np.zeros(mask.shape, dtype=bool)
    for path in paths:
        for p in path:
            covered[p] = True
    for y, x in zip(*np.nonzero(mask & ~covered)):
        paths.append([(int(y), int(x))])
        closed.append(False)
    return paths, closed, label
