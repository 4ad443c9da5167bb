"""Shared fixtures and independent oracles for the test suite."""

import heapq
import math

import numpy as np
import pytest

from polar.world import WALL, World, gen_world


def dijkstra_oracle(grid: np.ndarray, start: tuple[int, int], resolution: float = 0.25) -> dict[tuple[int, int], float]:
    """Plain heapq Dijkstra over an occupancy grid, (ix, iy) cells -> meters.

    8-connected; diagonal moves are allowed only when the full 2x2 block is
    free, so paths never cut wall corners.
    """
    ny, nx = grid.shape
    straight = resolution
    diagonal = resolution * math.sqrt(2.0)

    def free(ix, iy):
        return 0 <= ix < nx and 0 <= iy < ny and grid[iy, ix] != WALL

    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, (ix, iy) = heapq.heappop(heap)
        if d > dist.get((ix, iy), math.inf):
            continue
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nxt = (ix + dx, iy + dy)
            if free(*nxt) and d + straight < dist.get(nxt, math.inf):
                dist[nxt] = d + straight
                heapq.heappush(heap, (d + straight, nxt))
        for dx, dy in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            nxt = (ix + dx, iy + dy)
            if (
                free(*nxt)
                and free(ix + dx, iy)
                and free(ix, iy + dy)
                and d + diagonal < dist.get(nxt, math.inf)
            ):
                dist[nxt] = d + diagonal
                heapq.heappush(heap, (d + diagonal, nxt))
    return dist


def unit_vec(dim: int, angle_from_e0: float = 0.0) -> np.ndarray:
    """Unit vector in the e0/e1 plane at a chosen angle: cosine against e0 is cos(angle)."""
    v = np.zeros(dim)
    v[0] = math.cos(angle_from_e0)
    v[1] = math.sin(angle_from_e0)
    return v


@pytest.fixture(scope="session")
def small_world() -> World:
    return gen_world(0, 5, [("mug", 2), ("vase", 1)])
