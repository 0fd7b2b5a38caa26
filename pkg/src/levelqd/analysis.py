"""Level-analysis kernels: connectivity, diameter, symmetry, Zelda paths, Sokoban solving.

Every function here is a pure function of its inputs. Hot kernels (the
all-pairs diameter search) are compiled with numba when available and fall
back to equivalent pure-Python code otherwise.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import EMPTY, WALL, Game, Level

UNREACHABLE = math.inf

_ZELDA_PLAYER, _ZELDA_KEY, _ZELDA_DOOR, _ZELDA_ENEMY = 2, 3, 4, 5
_SOKO_PLAYER, _SOKO_CRATE, _SOKO_TARGET = 2, 3, 4

# Deterministic move order for BFS-style searches: up, down, left, right.
MOVES = (("U", -1, 0), ("D", 1, 0), ("L", 0, -1), ("R", 0, 1))


@dataclass(frozen=True)
class PathResult:
    """Longest-shortest-path length and one pair of endpoints realizing it."""

    length: int
    endpoints: tuple[tuple[int, int], tuple[int, int]] | None


@dataclass(frozen=True)
class SokobanSolution:
    solved: bool
    length: int
    moves: tuple[str, ...]
    nodes_expanded: int
    status: str  # "solved" | "unsolvable" | "budget_exhausted"


def _traversable_mask(level: Level, traversable) -> np.ndarray:
    tiles = sorted(set(int(t) for t in traversable))
    if not tiles:
        raise ValueError("traversable tile set must be non-empty")
    mask = level.cells == tiles[0]
    for t in tiles[1:]:
        mask |= level.cells == t
    return mask


def connected_regions(level: Level, traversable) -> int:
    """Number of 4-connected components of traversable cells (0 when none exist)."""
    mask = _traversable_mask(level, traversable)
    if not mask.any():
        return 0
    _, count = ndimage.label(mask)
    return int(count)


try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _grid_graph_kernel(padded, h, w):  # pragma: no cover - exercised via wrappers
    """Connected components and exact all-pairs diameter in one pass.

    `padded` is a flat uint8 traversability mask of shape (h+2)*(w+2) with a
    zero border, which removes every bounds check from the inner loops.
    Returns (regions, best_dist, best_src, best_dst) with flat padded indices.
    """
    stride = w + 2
    size = (h + 2) * stride
    dist = np.empty(size, np.int32)
    queue = np.empty(size, np.int32)
    seen = np.zeros(size, np.uint8)
    regions = 0
    best = 0
    best_s = -1
    best_t = -1
    for y in range(1, h + 1):
        base = y * stride
        for x in range(1, w + 1):
            start = base + x
            if not padded[start]:
                continue
            if best_s < 0:
                best_s = start
                best_t = start
            # flood fill for the region count
            if not seen[start]:
                regions += 1
                seen[start] = 1
                queue[0] = start
                head, tail = 0, 1
                while head < tail:
                    cur = queue[head]
                    head += 1
                    for off in (-1, 1, -stride, stride):
                        nxt = cur + off
                        if padded[nxt] and not seen[nxt]:
                            seen[nxt] = 1
                            queue[tail] = nxt
                            tail += 1
            # breadth-first search from this source
            for i in range(size):
                dist[i] = -1
            dist[start] = 0
            queue[0] = start
            head, tail = 0, 1
            while head < tail:
                cur = queue[head]
                head += 1
                d = dist[cur] + 1
                for off in (-1, 1, -stride, stride):
                    nxt = cur + off
                    if padded[nxt] and dist[nxt] < 0:
                        dist[nxt] = d
                        queue[tail] = nxt
                        tail += 1
                        if d > best:
                            best = d
                            best_s = start
                            best_t = nxt
    return regions, best, best_s, best_t


def _diameter_python(trav: np.ndarray) -> tuple[int, int, int]:
    h, w = trav.shape
    best, best_s, best_t = 0, -1, -1
    flat = trav.ravel()
    for start in range(h * w):
        if not flat[start]:
            continue
        if best_s < 0:
            best_s = best_t = start
        dist = {start: 0}
        q = deque([start])
        while q:
            cur = q.popleft()
            cy, cx = divmod(cur, w)
            d = dist[cur] + 1
            for _, dy, dx in MOVES:
                ny, nx = cy + dy, cx + dx
                if 0 <= ny < h and 0 <= nx < w and trav[ny, nx]:
                    nxt = ny * w + nx
                    if nxt not in dist:
                        dist[nxt] = d
                        q.append(nxt)
                        if d > best:
                            best, best_s, best_t = d, start, nxt
    return best, best_s, best_t


def _grid_graph_stats(mask: np.ndarray) -> tuple[int, int, int, int]:
    """(regions, diameter, flat src, flat dst) over a boolean mask."""
    h, w = mask.shape
    if _HAVE_NUMBA:
        padded = np.zeros((h + 2) * (w + 2), dtype=np.uint8)
        padded.reshape(h + 2, w + 2)[1 : h + 1, 1 : w + 1] = mask
        regions, best, s, t = _grid_graph_kernel(padded, h, w)
        if s >= 0:  # translate padded flat indices back to level coordinates
            sy, sx = divmod(int(s), w + 2)
            ty, tx = divmod(int(t), w + 2)
            return int(regions), int(best), (sy - 1) * w + sx - 1, (ty - 1) * w + tx - 1
        return int(regions), int(best), -1, -1
    regions = _regions_python(mask)
    best, s, t = _diameter_python(mask)
    return regions, best, s, t


def _regions_python(mask: np.ndarray) -> int:
    if not mask.any():
        return 0
    _, count = ndimage.label(mask)
    return int(count)


def diameter(level: Level, traversable) -> PathResult:
    """Exact longest shortest path among traversable cells (4-connectivity).

    Unreachable pairs are ignored, so on a disconnected level this is the
    maximum of the per-component diameters. Length 0 when at most one
    traversable cell exists.
    """
    mask = _traversable_mask(level, traversable)
    _, best, s, t = _grid_graph_stats(mask)
    if s < 0:
        return PathResult(0, None)
    w = level.width
    return PathResult(int(best), (divmod(int(s), w), divmod(int(t), w)))


def grid_graph_summary(level: Level, traversable) -> tuple[int, int]:
    """(connected regions, diameter) of the traversable subgraph in one pass."""
    mask = _traversable_mask(level, traversable)
    regions, best, _, _ = _grid_graph_stats(mask)
    return regions, best


def symmetry(level: Level) -> float:
    """Mirror-match fraction averaged over the horizontal and vertical axes."""
    cells = level.cells
    h, w = cells.shape
    matches_h = int((cells == cells[:, ::-1]).sum())
    matches_v = int((cells == cells[::-1, :]).sum())
    return (matches_h + matches_v) / (2.0 * h * w)


def emptiness(level: Level) -> float:
    """Fraction of cells holding the empty tile."""
    return float((level.cells == EMPTY).mean())


def _bfs_distances(passable: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    """Single-source BFS over a boolean passability mask; -1 = unreached."""
    h, w = passable.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    dist[start] = 0
    q = deque([start])
    while q:
        cy, cx = q.popleft()
        d = dist[cy, cx] + 1
        for _, dy, dx in MOVES:
            ny, nx = cy + dy, cx + dx
            if 0 <= ny < h and 0 <= nx < w and passable[ny, nx] and dist[ny, nx] < 0:
                dist[ny, nx] = d
                q.append((ny, nx))
    return dist

def _single_positions(cells: np.ndarray, tile: int) -> list[tuple[int, int]]:
    ys, xs = np.nonzero(cells == tile)
    return list(zip(ys.tolist(), xs.tolist()))


def zelda_path_length(level: Level) -> float | None:
    """Shortest player-to-key plus key-to-door path over non-wall cells.

    Returns None when the level does not contain exactly one player, key and
    door; returns UNREACHABLE when either leg has no path. Enemies do not
    block movement.
    """
    cells = level.cells
    players = _single_positions(cells, _ZELDA_PLAYER)
    keys = _single_positions(cells, _ZELDA_KEY)
    doors = _single_positions(cells, _ZELDA_DOOR)
    if len(players) != 1 or len(keys) != 1 or len(doors) != 1:
        return None
    passable = cells != WALL
    d1 = _bfs_distances(passable, players[0])[keys[0]]
    if d1 < 0:
        return UNREACHABLE
    d2 = _bfs_distances(passable, keys[0])[doors[0]]
    if d2 < 0:
        return UNREACHABLE
    return float(d1 + d2)


def nearest_enemy_distance(level: Level) -> float | None:
    """Shortest-path distance from the player to the closest enemy.

    None when there is not exactly one player or there are no enemies;
    UNREACHABLE when no enemy can be reached (no attack path exists).
    """
    cells = level.cells
    players = _single_positions(cells, _ZELDA_PLAYER)
    if len(players) != 1 or not (cells == _ZELDA_ENEMY).any():
        return None
    passable = cells != WALL
    dist = _bfs_distances(passable, players[0])
    enemy_dists = dist[(cells == _ZELDA_ENEMY) & (dist >= 0)]
    if enemy_dists.size == 0:
        return UNREACHABLE
    return float(enemy_dists.min())


def _is_corner(walls: np.ndarray, y: int, x: int) -> bool:
    h, w = walls.shape

    def wall(ny, nx):
        return ny < 0 or ny >= h or nx < 0 or nx >= w or walls[ny, nx]

    vert = wall(y - 1, x) or wall(y + 1, x)
    horiz = wall(y, x - 1) or wall(y, x + 1)
    return vert and horiz


def solve_sokoban(level: Level, node_budget: int = 200_000) -> SokobanSolution | None:
    """Minimum-move Sokoban solve by breadth-first search over game states.

    States are (player position, crate position set); expansion order is the
    fixed U, D, L, R move order, so the returned solution is deterministic.
    Pushes into a non-target corner are pruned (such crates can never move
    again). Returns None when the level lacks exactly one player or has
    mismatched / zero crate and target counts. `status` distinguishes a
    search that exhausted the state space ("unsolvable") from one that ran
    out of node budget ("budget_exhausted").
    """
    cells = level.cells
    h, w = cells.shape
    players = _single_positions(cells, _SOKO_PLAYER)
    crates = frozenset(y * w + x for y, x in _single_positions(cells, _SOKO_CRATE))
    targets = frozenset(y * w + x for y, x in _single_positions(cells, _SOKO_TARGET))
    if len(players) != 1 or len(crates) != len(targets) or len(crates) == 0:
        return None

    walls = cells == WALL
    corner = np.array([[_is_corner(walls, y, x) for x in range(w)] for y in range(h)])
    player = players[0][0] * w + players[0][1]

    if crates == targets:
        return SokobanSolution(True, 0, (), 0, "solved")

    start = (player, crates)
    parents: dict[tuple[int, frozenset], tuple | None] = {start: None}
    q = deque([start])
    expanded = 0
    while q:
        if expanded >= node_budget:
            return SokobanSolution(False, 0, (), expanded, "budget_exhausted")
        state = q.popleft()
        expanded += 1
        pos, cr = state
        py, px = divmod(pos, w)
        for name, dy, dx in MOVES:
            ny, nx = py + dy, px + dx
            if ny < 0 or ny >= h or nx < 0 or nx >= w or walls[ny, nx]:
                continue
            npos = ny * w + nx
            ncr = cr
            if npos in cr:
                ty, tx = ny + dy, nx + dx
                if ty < 0 or ty >= h or tx < 0 or tx >= w or walls[ty, tx]:
                    continue
                tpos = ty * w + tx
                if tpos in cr:
                    continue
                if corner[ty, tx] and tpos not in targets:
                    continue
                ncr = (cr - {npos}) | {tpos}
            nstate = (npos, ncr)
            if nstate in parents:
                continue
            parents[nstate] = (state, name)
            if ncr == targets:
                moves = [name]
                back = state
                while parents[back] is not None:
                    back, mv = parents[back]
                    moves.append(mv)
                moves.reverse()
                return SokobanSolution(True, len(moves), tuple(moves), expanded, "solved")
            q.append(nstate)
    return SokobanSolution(False, 0, (), expanded, "unsolvable")


def replay_sokoban(level: Level, moves) -> tuple[Level, bool]:
    """Apply a move sequence; returns the final level and goal-reached flag."""
    cells = np.array(level.cells)
    h, w = cells.shape
    players = _single_positions(cells, _SOKO_PLAYER)
    if len(players) != 1:
        raise ValueError("replay requires exactly one player")
    walls = cells == WALL
    crates = set(y * w + x for y, x in _single_positions(cells, _SOKO_CRATE))
    targets = frozenset(y * w + x for y, x in _single_positions(cells, _SOKO_TARGET))
    py, px = players[0]
    deltas = {name: (dy, dx) for name, dy, dx in MOVES}
    for mv in moves:
        dy, dx = deltas[mv]
        ny, nx = py + dy, px + dx
        if ny < 0 or ny >= h or nx < 0 or nx >= w or walls[ny, nx]:
            raise ValueError(f"illegal move {mv!r} into a wall or boundary")
        npos = ny * w + nx
        if npos in crates:
            ty, tx = ny + dy, nx + dx
            tpos = ty * w + tx
            if ty < 0 or ty >= h or tx < 0 or tx >= w or walls[ty, tx] or tpos in crates:
                raise ValueError(f"illegal push {mv!r}")
            crates.discard(npos)
            crates.add(tpos)
        py, px = ny, nx

    out = np.where(walls, WALL, EMPTY).astype(np.int8)
    for t in targets:
        out[divmod(t, w)] = _SOKO_TARGET
    for c in crates:
        out[divmod(c, w)] = _SOKO_CRATE
    out[py, px] = _SOKO_PLAYER
    return Level(out), crates == targets
