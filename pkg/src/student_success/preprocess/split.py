"""Stratified train/dev/test partition."""

from __future__ import annotations

import numpy as np


class TooSmall(ValueError):
    pass


def stratified_split(labels: np.ndarray, seed: int, fractions=(0.96, 0.02, 0.02)) -> tuple[np.ndarray, ...]:
    """Row indices of each part.  Part sizes follow ``fractions`` of the
    total (largest-remainder rounding); each class is spread over the parts
    in proportion, so per-class counts are within one row of exact."""
    labels = np.asarray(labels)
    n = labels.size
    classes, counts = np.unique(labels, return_counts=True)
    if (counts < len(fractions)).any():
        bad = classes[counts < len(fractions)]
        raise TooSmall(f"classes {bad.tolist()} have fewer than {len(fractions)} rows")
    fr = np.asarray(fractions, dtype=float) / sum(fractions)
    totals = _round_to(n * fr, n)
    rng = np.random.default_rng([int(seed), 0x5917])
    # each cell is the floor or the ceiling of its exact share; which cells
    # round up is a bipartite matching between class and part shortfalls
    exact = counts[:, None] * fr[None, :]
    alloc = np.floor(exact).astype(int)
    up = _round_up_cells(exact - alloc, counts - alloc.sum(axis=1), totals - alloc.sum(axis=0))
    alloc += up
    parts = [[] for _ in fr]
    for c, cls in enumerate(classes):
        rows = rng.permutation(np.flatnonzero(labels == cls))
        start = 0
        for p in range(len(fr)):
            parts[p].append(rows[start:start + alloc[c, p]])
            start += alloc[c, p]
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def _round_to(x: np.ndarray, total: int) -> np.ndarray:
    base = np.floor(x).astype(int)
    short = total - base.sum()
    base[np.argsort(-(x - base), kind="stable")[:short]] += 1
    return base


def _round_up_cells(rem: np.ndarray, need_class: np.ndarray, need_part: np.ndarray) -> np.ndarray:
    """0/1 matrix with the given row and column sums, using only cells with
    a fractional remainder; larger remainders are tried first."""
    n_c, n_p = rem.shape
    up = np.zeros(rem.shape, dtype=int)
    need_class = need_class.copy()
    open_part = need_part.copy()
    order = np.argsort(-rem, axis=None, kind="stable")
    for flat in order:
        c, p = divmod(int(flat), n_p)
        if rem[c, p] > 1e-12 and need_class[c] > 0 and open_part[p] > 0:
            up[c, p] = 1
            need_class[c] -= 1
            open_part[p] -= 1
    for c in range(n_c):
        while need_class[c] > 0:
            path = _augment(c, up, rem, open_part)
            if path is None:
                raise TooSmall("cannot allocate rows across parts")
            for cc, pp, add in path:
                up[cc, pp] += 1 if add else -1
            open_part[path[-1][1]] -= 1
            need_class[c] -= 1
    return up


def _augment(start: int, up: np.ndarray, rem: np.ndarray, open_part: np.ndarray):
    """Breadth-first alternating path from class ``start`` to a part with
    room, as (class, part, add?) steps."""
    n_c, n_p = up.shape
    via_class: dict[int, int] = {}  # part -> class it was reached from
    via_part: dict[int, int] = {start: -1}  # class -> part it was reached from
    frontier = [start]
    while frontier:
        nxt = []
        for c in frontier:
            for p in range(n_p):
                if p in via_class or up[c, p] or rem[c, p] <= 1e-12:
                    continue
                via_class[p] = c
                if open_part[p] > 0:
                    path = []
                    while True:
                        cc = via_class[p]
                        path.append((cc, p, True))
                        if cc == start:
                            return path
                        p = via_part[cc]
                        path.append((cc, p, False))
                for c2 in range(n_c):
                    if up[c2, p] and c2 not in via_part:
                        via_part[c2] = p
                        nxt.append(c2)
        frontier = nxt
    return None
