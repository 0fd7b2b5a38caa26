"""Independent straight-line oracle implementations used only by the tests.

These deliberately avoid the library's kernels and vectorized code paths:
plain Python loops, dicts and deques, so that agreement with the package is
meaningful.
"""

from __future__ import annotations

import statistics
from collections import deque


def all_pairs_diameter(cells, traversable) -> int:
    """Longest shortest path via one BFS per traversable cell."""
    h, w = len(cells), len(cells[0])
    trav = {(y, x) for y in range(h) for x in range(w) if cells[y][x] in traversable}
    best = 0
    for start in trav:
        dist = {start: 0}
        q = deque([start])
        while q:
            y, x = q.popleft()
            d = dist[(y, x)]
            best = max(best, d)
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if (ny, nx) in trav and (ny, nx) not in dist:
                    dist[(ny, nx)] = d + 1
                    q.append((ny, nx))
    return best


def count_regions(cells, traversable) -> int:
    h, w = len(cells), len(cells[0])
    todo = {(y, x) for y in range(h) for x in range(w) if cells[y][x] in traversable}
    regions = 0
    while todo:
        regions += 1
        stack = [todo.pop()]
        while stack:
            y, x = stack.pop()
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if (ny, nx) in todo:
                    todo.remove((ny, nx))
                    stack.append((ny, nx))
    return regions


def shortest_path(cells, start, goal, blocked_tile=1) -> int | None:
    """BFS path length between two coordinates; None when unreachable."""
    h, w = len(cells), len(cells[0])
    dist = {start: 0}
    q = deque([start])
    while q:
        y, x = q.popleft()
        if (y, x) == goal:
            return dist[(y, x)]
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and cells[ny][nx] != blocked_tile and (ny, nx) not in dist:
                dist[(ny, nx)] = dist[(y, x)] + 1
                q.append((ny, nx))
    return None


def sokoban_min_moves(cells, node_limit=2_000_000) -> int | None:
    """Brute-force minimum-move Sokoban solve; None when unsolvable.

    No pruning of any kind; states are (player, frozenset of crates).
    """
    h, w = len(cells), len(cells[0])
    walls = {(y, x) for y in range(h) for x in range(w) if cells[y][x] == 1}
    player = next((y, x) for y in range(h) for x in range(w) if cells[y][x] == 2)
    crates = frozenset((y, x) for y in range(h) for x in range(w) if cells[y][x] == 3)
    targets = frozenset((y, x) for y in range(h) for x in range(w) if cells[y][x] == 4)
    if crates == targets:
        return 0
    start = (player, crates)
    dist = {start: 0}
    q = deque([start])
    expanded = 0
    while q:
        expanded += 1
        if expanded > node_limit:
            raise RuntimeError("oracle node limit exceeded")
        (py, px), cr = q.popleft()
        d = dist[((py, px), cr)]
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ny, nx = py + dy, px + dx
            if not (0 <= ny < h and 0 <= nx < w) or (ny, nx) in walls:
                continue
            ncr = cr
            if (ny, nx) in cr:
                ty, tx = ny + dy, nx + dx
                if not (0 <= ty < h and 0 <= tx < w) or (ty, tx) in walls or (ty, tx) in cr:
                    continue
                ncr = (cr - {(ny, nx)}) | {(ty, tx)}
            state = ((ny, nx), ncr)
            if state in dist:
                continue
            dist[state] = d + 1
            if ncr == targets:
                return d + 1
            q.append(state)
    return None


def batch_objective(levels, validities, measure_rows):
    """Straight-line recomputation of the validity/reliability/diversity objective.

    `levels` is a list of 2D tile lists, `validities` the per-level penalty
    list, and `measure_rows` a per-measure list of per-level value lists.
    Returns (v, r, d, o).
    """
    batch = len(levels)
    v = sum(validities) / batch
    stds = [statistics.pstdev(row) for row in measure_rows]
    r = -sum(stds) / len(stds)
    h, w = len(levels[0]), len(levels[0][0])
    total = 0
    for a in levels:
        for b in levels:
            for y in range(h):
                for x in range(w):
                    if a[y][x] != b[y][x]:
                        total += 1
    d = total / (h * w * batch * batch - 1)
    o = v + max(0.0, r + 10.0 * d)
    return v, r, d, o
