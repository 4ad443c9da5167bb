"""Deterministic 2D house world on a 0.25 m occupancy grid.

Rooms are axis-aligned rectangles hung off a 2 m corridor spine, each with
a 1 m doorway to the corridor; consecutive rooms on the same side also get
a 1 m connecting doorway, so the scene graph is richer than a pure star.
The agent moves in 1.0 m strides along headings that are multiples of 30
degrees (0 = +y, clockwise positive, so heading 90 = +x) and observes
front/left/right views: a +-45 degree cone, 5.0 m range, occlusion by wall
cells via grid ray casting. Worlds are immutable after generation; moving
an object between evaluation stages returns a new World sharing the grid
and navigation caches.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .errors import GenerationError, ParseError, RejectedInput

FORMAT_VERSION = 1
RESOLUTION = 0.25
STRIDE_M = 1.0
TURN_DEG = 30
VISIBILITY_RANGE_M = 5.0
VISIBILITY_HALF_ANGLE_DEG = 45.0
FEATURE_DIM = 32
WALL = -1

ACTION_START = "START"  # pseudo-action tagging the spawn entry of a trajectory
MOVE_FORWARD = "MOVE_FORWARD"
TURN_LEFT = "TURN_LEFT"
TURN_RIGHT = "TURN_RIGHT"
STOP = "STOP"
LOW_LEVEL_ACTIONS = (MOVE_FORWARD, TURN_LEFT, TURN_RIGHT, STOP)

_HALF_SQRT3 = math.sqrt(3.0) / 2.0
# Exact direction table keeps strides bit-identical across platforms (no libm trig).
_HEADING_VECTORS = {
    0: (0.0, 1.0),
    30: (0.5, _HALF_SQRT3),
    60: (_HALF_SQRT3, 0.5),
    90: (1.0, 0.0),
    120: (_HALF_SQRT3, -0.5),
    150: (0.5, -_HALF_SQRT3),
    180: (0.0, -1.0),
    210: (-0.5, -_HALF_SQRT3),
    240: (-_HALF_SQRT3, -0.5),
    270: (-1.0, 0.0),
    300: (-_HALF_SQRT3, 0.5),
    330: (-0.5, _HALF_SQRT3),
}
HEADINGS = tuple(sorted(_HEADING_VECTORS))

_ROOM_NAME_POOL = (
    "kitchen",
    "living_room",
    "bedroom",
    "bathroom",
    "office",
    "dining_room",
    "study",
    "laundry_room",
    "pantry",
    "nursery",
    "garage",
)

_EPS = 1e-9


def heading_vector(heading: int) -> tuple[float, float]:
    try:
        return _HEADING_VECTORS[heading % 360]
    except KeyError:
        raise RejectedInput(f"heading must be a multiple of 30, got {heading}") from None


def bearing_deg(from_pos: tuple[float, float], to_pos: tuple[float, float]) -> float:
    """Compass bearing (0 = +y, clockwise) from one position to another."""
    dx = to_pos[0] - from_pos[0]
    dy = to_pos[1] - from_pos[1]
    return math.degrees(math.atan2(dx, dy)) % 360.0


def angle_diff_deg(a: float, b: float) -> float:
    """Smallest absolute difference between two angles in degrees."""
    return abs(((a - b) + 180.0) % 360.0 - 180.0)


@dataclass
class ObjectInstance:
    object_id: str
    category: str
    position: tuple[float, float]
    feature: np.ndarray | None = None


@dataclass
class AgentState:
    position: tuple[float, float]
    heading: int
    steps_taken: int = 0


@dataclass
class View:
    view_heading: int
    visible: list[tuple[str, str, float]]  # (object_id, category, distance m)
    room: str


@dataclass
class Observation:
    front: View
    left: View
    right: View
    blocked: bool = False

    @property
    def views(self) -> tuple[View, View, View]:
        return (self.front, self.left, self.right)

    def find(self, object_id: str) -> float | None:
        """Distance to object_id if visible in any view, else None."""
        best = None
        for view in self.views:
            for oid, _cat, dist in view.visible:
                if oid == object_id and (best is None or dist < best):
                    best = dist
        return best


@dataclass
class SceneGraph:
    rooms: list[str]
    edges: list[tuple[str, str]]
    waypoints: dict[str, tuple[float, float]]

    def neighbors(self, room: str) -> list[str]:
        out = [b for a, b in self.edges if a == room] + [a for a, b in self.edges if b == room]
        return sorted(out)

    def bfs_path(self, src: str, dst: str) -> list[str] | None:
        """Rooms to traverse after src, ending at dst; [] when src == dst."""
        if src not in self.waypoints or dst not in self.waypoints:
            raise RejectedInput(f"unknown room {src!r} or {dst!r}")
        if src == dst:
            return []
        prev: dict[str, str] = {src: src}
        queue = [src]
        while queue:
            here = queue.pop(0)
            for nxt in self.neighbors(here):
                if nxt in prev:
                    continue
                prev[nxt] = here
                if nxt == dst:
                    path = [dst]
                    while prev[path[-1]] != src:
                        path.append(prev[path[-1]])
                    return list(reversed(path))
                queue.append(nxt)
        return None

    def hop_distance(self, src: str, dst: str) -> int:
        path = self.bfs_path(src, dst)
        return len(path) if path is not None else len(self.rooms) + 1

    def to_json(self) -> dict:
        return {
            "rooms": self.rooms,
            "edges": [list(e) for e in self.edges],
            "waypoints": {r: list(p) for r, p in self.waypoints.items()},
        }


class _NavCache:
    """Shared per-grid navigation state: sparse 8-connected graph + distance fields."""

    _MAX_FIELDS = 64

    def __init__(self, grid: np.ndarray, resolution: float):
        self.grid = grid
        self.res = resolution
        ny, nx = grid.shape
        self.shape = (ny, nx)
        free = grid != WALL
        self.free = free
        idx = np.arange(ny * nx).reshape(ny, nx)
        rows: list[np.ndarray] = []
        cols: list[np.ndarray] = []
        data: list[np.ndarray] = []
        straight = resolution
        diagonal = resolution * math.sqrt(2.0)
        m = free[:, :-1] & free[:, 1:]
        rows.append(idx[:, :-1][m])
        cols.append(idx[:, 1:][m])
        data.append(np.full(int(m.sum()), straight))
        m = free[:-1, :] & free[1:, :]
        rows.append(idx[:-1, :][m])
        cols.append(idx[1:, :][m])
        data.append(np.full(int(m.sum()), straight))
        # diagonals only when the full 2x2 block is free: no cutting wall corners
        block = free[:-1, :-1] & free[:-1, 1:] & free[1:, :-1] & free[1:, 1:]
        rows.append(idx[:-1, :-1][block])
        cols.append(idx[1:, 1:][block])
        data.append(np.full(int(block.sum()), diagonal))
        rows.append(idx[:-1, 1:][block])
        cols.append(idx[1:, :-1][block])
        data.append(np.full(int(block.sum()), diagonal))
        n = ny * nx
        self.csr = coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        ).tocsr()
        free_cells = np.argwhere(free)  # (iy, ix)
        self.free_centers = (free_cells[:, ::-1] + 0.5) * resolution  # (x, y)
        self.free_cells = free_cells
        self.fields: dict[tuple[int, int], np.ndarray] = {}
        self.scene_graph: SceneGraph | None = None

    def field(self, cell: tuple[int, int]) -> np.ndarray:
        cached = self.fields.get(cell)
        if cached is None:
            ix, iy = cell
            node = iy * self.shape[1] + ix
            dist = _csgraph_dijkstra(self.csr, directed=False, indices=node)
            cached = dist.reshape(self.shape)
            if len(self.fields) >= self._MAX_FIELDS:
                self.fields.pop(next(iter(self.fields)))
            self.fields[cell] = cached
        return cached

    def snap(self, pos: tuple[float, float]) -> tuple[int, int]:
        """Nearest free cell (ix, iy) to a position."""
        ix = int(pos[0] // self.res)
        iy = int(pos[1] // self.res)
        if 0 <= iy < self.shape[0] and 0 <= ix < self.shape[1] and self.free[iy, ix]:
            return (ix, iy)
        d2 = (self.free_centers[:, 0] - pos[0]) ** 2 + (self.free_centers[:, 1] - pos[1]) ** 2
        best = int(np.argmin(d2))
        iy, ix = self.free_cells[best]
        return (int(ix), int(iy))


class World:
    """Immutable occupancy-grid world; cells hold a room index or WALL."""

    def __init__(
        self,
        grid: np.ndarray,
        room_names: list[str],
        objects: list[ObjectInstance],
        resolution: float = RESOLUTION,
        _nav: _NavCache | None = None,
    ):
        grid = np.asarray(grid, dtype=np.int16)
        grid.setflags(write=False)
        self.grid = grid
        self.room_names = list(room_names)
        self.objects: dict[str, ObjectInstance] = {}
        for obj in objects:
            if obj.object_id in self.objects:
                raise RejectedInput(f"duplicate object id {obj.object_id!r}")
            self.objects[obj.object_id] = obj
        self.resolution = resolution
        self._nav = _nav if _nav is not None else _NavCache(grid, resolution)
        self._obj_ids = [o.object_id for o in objects]
        self._obj_positions = np.array([o.position for o in objects], dtype=np.float64).reshape(len(objects), 2)

    # -- geometry ----------------------------------------------------------

    @property
    def bounds_m(self) -> tuple[float, float]:
        ny, nx = self.grid.shape
        return (nx * self.resolution, ny * self.resolution)

    def cell_of(self, pos: tuple[float, float]) -> tuple[int, int]:
        return (int(pos[0] // self.resolution), int(pos[1] // self.resolution))

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.resolution, (cell[1] + 0.5) * self.resolution)

    def in_bounds(self, pos: tuple[float, float]) -> bool:
        w, h = self.bounds_m
        return 0.0 <= pos[0] < w and 0.0 <= pos[1] < h

    def is_free(self, pos: tuple[float, float]) -> bool:
        if not self.in_bounds(pos):
            return False
        ix, iy = self.cell_of(pos)
        return bool(self.grid[iy, ix] != WALL)

    def room_of(self, pos: tuple[float, float]) -> str | None:
        if not self.in_bounds(pos):
            return None
        ix, iy = self.cell_of(pos)
        label = int(self.grid[iy, ix])
        return None if label == WALL else self.room_names[label]

    def segment_free(self, p0: tuple[float, float], p1: tuple[float, float]) -> bool:
        # every 0.25 m sample along the segment must land in free space
        dist = math.hypot(p1[0] - p0[0], p1[1] - p0[1])
        n = max(1, math.ceil(dist / self.resolution - _EPS))
        for i in range(1, n + 1):
            t = i / n
            if not self.is_free((p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))):
                return False
        return True

    def line_of_sight(self, a: tuple[float, float], b: tuple[float, float]) -> bool:
        """True when no wall cell lies on the straight segment a -> b (grid traversal)."""
        ix, iy = self.cell_of(a)
        tx, ty = self.cell_of(b)
        if self.grid[iy, ix] == WALL or self.grid[ty, tx] == WALL:
            return False
        dx = b[0] - a[0]
        dy = b[1] - a[1]
        step_x = 1 if dx > 0 else (-1 if dx < 0 else 0)
        step_y = 1 if dy > 0 else (-1 if dy < 0 else 0)
        res = self.resolution
        t_max_x = ((ix + (step_x > 0)) * res - a[0]) / dx if step_x else math.inf
        t_delta_x = res / abs(dx) if step_x else math.inf
        t_max_y = ((iy + (step_y > 0)) * res - a[1]) / dy if step_y else math.inf
        t_delta_y = res / abs(dy) if step_y else math.inf
        guard = abs(tx - ix) + abs(ty - iy) + 4
        while (ix, iy) != (tx, ty) and guard > 0:
            guard -= 1
            if abs(t_max_x - t_max_y) < 1e-12:
                # exact corner crossing: blocked if both flanking cells are walls
                if self.grid[iy, ix + step_x] == WALL and self.grid[iy + step_y, ix] == WALL:
                    return False
                ix += step_x
                iy += step_y
                t_max_x += t_delta_x
                t_max_y += t_delta_y
            elif t_max_x < t_max_y:
                ix += step_x
                t_max_x += t_delta_x
            else:
                iy += step_y
                t_max_y += t_delta_y
            if self.grid[iy, ix] == WALL:
                return False
        return True

    # -- dynamics ----------------------------------------------------------

    def step(self, state: AgentState, action: str) -> tuple[AgentState, "Observation", bool]:
        """Apply one low-level action; returns (new state, observation, done)."""
        if action not in LOW_LEVEL_ACTIONS:
            raise RejectedInput(f"unknown action {action!r}")
        position = state.position
        heading = state.heading
        blocked = False
        done = False
        if action == MOVE_FORWARD:
            ux, uy = heading_vector(heading)
            target = (position[0] + STRIDE_M * ux, position[1] + STRIDE_M * uy)
            if self.segment_free(position, target):
                position = target
            else:
                blocked = True
        elif action == TURN_LEFT:
            heading = (heading - TURN_DEG) % 360
        elif action == TURN_RIGHT:
            heading = (heading + TURN_DEG) % 360
        else:
            done = True
        new_state = AgentState(position, heading, state.steps_taken + 1)
        return new_state, self.observe(new_state, blocked=blocked), done

    def observe(self, state: AgentState, blocked: bool = False) -> Observation:
        room = self.room_of(state.position) or ""
        views = []
        near: list[int] = []
        if len(self._obj_ids):
            deltas = self._obj_positions - np.array(state.position)
            dists = np.hypot(deltas[:, 0], deltas[:, 1])
            near = [int(i) for i in np.flatnonzero(dists <= VISIBILITY_RANGE_M + _EPS)]
        for offset in (0, -90, 90):
            view_heading = (state.heading + offset) % 360
            visible = []
            for i in near:
                obj = self.objects[self._obj_ids[i]]
                dist = math.hypot(obj.position[0] - state.position[0], obj.position[1] - state.position[1])
                if dist < _EPS:
                    if offset != 0:
                        continue  # on top of the object: front view only
                elif angle_diff_deg(bearing_deg(state.position, obj.position), view_heading) > (
                    VISIBILITY_HALF_ANGLE_DEG + _EPS
                ):
                    continue
                if dist >= _EPS and not self.line_of_sight(state.position, obj.position):
                    continue
                visible.append((obj.object_id, obj.category, dist))
            visible.sort(key=lambda row: (row[2], row[0]))
            views.append(View(view_heading, visible, room))
        return Observation(front=views[0], left=views[1], right=views[2], blocked=blocked)

    # -- navigation metric ---------------------------------------------------

    def distance_field(self, goal: tuple[float, float]) -> np.ndarray:
        """Meters-to-goal per cell (inf where unreachable); cached per goal cell."""
        if not self.in_bounds(goal):
            raise RejectedInput(f"goal {goal} outside world bounds {self.bounds_m}")
        return self._nav.field(self._nav.snap(goal))

    def shortest_path_length(self, start: tuple[float, float], goal: tuple[float, float]) -> float:
        """8-connected grid distance in meters between the nearest free cells."""
        if not self.in_bounds(start) or not self.in_bounds(goal):
            raise RejectedInput(f"positions {start} -> {goal} outside world bounds {self.bounds_m}")
        ix, iy = self._nav.snap(start)
        return float(self.distance_field(goal)[iy, ix])

    # -- scene graph ---------------------------------------------------------

    def build_scene_graph(self) -> SceneGraph:
        if self._nav.scene_graph is not None:
            return self._nav.scene_graph
        grid = self.grid
        edges: set[tuple[str, str]] = set()
        a, b = grid[:, :-1], grid[:, 1:]
        mask = (a != WALL) & (b != WALL) & (a != b)
        for la, lb in zip(a[mask].tolist(), b[mask].tolist()):
            edges.add(tuple(sorted((self.room_names[la], self.room_names[lb]))))
        a, b = grid[:-1, :], grid[1:, :]
        mask = (a != WALL) & (b != WALL) & (a != b)
        for la, lb in zip(a[mask].tolist(), b[mask].tolist()):
            edges.add(tuple(sorted((self.room_names[la], self.room_names[lb]))))
        waypoints = {}
        for label, name in enumerate(self.room_names):
            cells = np.argwhere(grid == label)  # (iy, ix)
            if cells.size == 0:
                raise GenerationError(f"room {name!r} has no free cells")
            centers = (cells[:, ::-1] + 0.5) * self.resolution
            centroid = centers.mean(axis=0)
            d2 = ((centers - centroid) ** 2).sum(axis=1)
            order = np.lexsort((cells[:, 1], cells[:, 0], d2))
            best = centers[order[0]]
            waypoints[name] = (float(best[0]), float(best[1]))
        graph = SceneGraph(list(self.room_names), sorted(edges), waypoints)
        self._nav.scene_graph = graph
        return graph

    # -- object relocation ---------------------------------------------------

    def move_object(self, object_id: str, new_position: tuple[float, float]) -> "World":
        """New World with one object relocated; grid and caches are shared."""
        if object_id not in self.objects:
            raise RejectedInput(f"unknown object {object_id!r}")
        if not self.is_free(new_position):
            raise RejectedInput(f"target position {new_position} is not free space")
        objects = [
            replace(obj, position=new_position) if obj.object_id == object_id else obj
            for obj in self.objects.values()
        ]
        return World(self.grid, self.room_names, objects, self.resolution, _nav=self._nav)

    # -- room queries ----------------------------------------------------------

    def room_cells(self, room: str, margin: int = 0) -> list[tuple[int, int]]:
        """Free cells (ix, iy) of a room, optionally eroded margin cells from any wall."""
        if room not in self.room_names:
            raise RejectedInput(f"unknown room {room!r}")
        label = self.room_names.index(room)
        mask = self.grid == label
        if margin:
            free = self.grid != WALL
            eroded = free.copy()
            for _ in range(margin):
                inner = eroded.copy()
                inner[1:, :] &= eroded[:-1, :]
                inner[:-1, :] &= eroded[1:, :]
                inner[:, 1:] &= eroded[:, :-1]
                inner[:, :-1] &= eroded[:, 1:]
                inner[0, :] = inner[-1, :] = False
                inner[:, 0] = inner[:, -1] = False
                eroded = inner
            mask = mask & eroded
        return [(int(ix), int(iy)) for iy, ix in np.argwhere(mask)]

    # -- persistence -----------------------------------------------------------

    def to_json(self) -> dict:
        rows = []
        for row in self.grid:
            encoded: list[list[int]] = []
            for value in row.tolist():
                if encoded and encoded[-1][1] == value:
                    encoded[-1][0] += 1
                else:
                    encoded.append([1, value])
            rows.append(encoded)
        return {
            "format_version": FORMAT_VERSION,
            "resolution": self.resolution,
            "room_names": self.room_names,
            "grid_rows": rows,
            "objects": [
                {
                    "object_id": o.object_id,
                    "category": o.category,
                    "position": [o.position[0], o.position[1]],
                    "feature": None if o.feature is None else o.feature.tolist(),
                }
                for o in self.objects.values()
            ],
        }

    def save(self, path: str) -> None:
        from .fileio import dump_json

        dump_json(path, self.to_json())

    @classmethod
    def load(cls, path: str) -> "World":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, line=exc.lineno) from exc
        return cls.from_json(doc)

    @classmethod
    def from_json(cls, doc: dict) -> "World":
        if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
            raise ParseError("unsupported or missing world format_version")
        try:
            room_names = list(doc["room_names"])
            rows = []
            width = None
            for encoded in doc["grid_rows"]:
                row: list[int] = []
                for count, value in encoded:
                    if value != WALL and not (0 <= value < len(room_names)):
                        raise ParseError(f"cell label {value} out of range")
                    row.extend([value] * count)
                if width is None:
                    width = len(row)
                elif len(row) != width:
                    raise ParseError("ragged run-length rows")
                rows.append(row)
            grid = np.array(rows, dtype=np.int16)
            objects = [
                ObjectInstance(
                    o["object_id"],
                    o["category"],
                    (float(o["position"][0]), float(o["position"][1])),
                    None if o.get("feature") is None else np.asarray(o["feature"], dtype=np.float64),
                )
                for o in doc["objects"]
            ]
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ParseError(f"malformed world file: {exc}") from exc
        world = cls(grid, room_names, objects, float(doc.get("resolution", RESOLUTION)))
        for obj in objects:
            if not world.is_free(obj.position):
                raise ParseError(f"object {obj.object_id!r} at {obj.position} is not on a free cell")
        return world

    def render_ascii(self) -> str:
        """Debug map, top row = max y. Rooms a..l, walls '#', objects '*'."""
        symbols = "abcdefghijkl"
        ny, nx = self.grid.shape
        canvas = [["#" if self.grid[iy, ix] == WALL else symbols[self.grid[iy, ix]] for ix in range(nx)] for iy in range(ny)]
        for obj in self.objects.values():
            ix, iy = self.cell_of(obj.position)
            canvas[iy][ix] = "*"
        lines = ["".join(row) for row in reversed(canvas)]
        legend = ", ".join(f"{symbols[i]}={name}" for i, name in enumerate(self.room_names))
        return "\n".join(lines + [legend])


# -- generation ----------------------------------------------------------------


def _cells(meters: float) -> int:
    return int(round(meters / RESOLUTION))


def gen_world(seed: int, n_rooms: int = 5, objects_spec: list[tuple[str, int]] | None = None) -> World:
    """Generate a corridor-spine house with n_rooms total rooms (corridor included)
    and the requested objects, all placement seeded and deterministic.

    Same-category instances land in distinct rooms while enough rooms exist;
    objects keep a 0.75 m margin from walls and 1 m from each other.
    """
    if not 2 <= n_rooms <= 12:
        raise RejectedInput(f"n_rooms must be in [2, 12], got {n_rooms}")
    rng = random.Random(seed)
    side_count = n_rooms - 1
    names = ["hallway"] + list(_ROOM_NAME_POOL[:side_count])
    # depths start at 5.5 m so every room keeps a back strip beyond the 5 m
    # visibility range of corridor traffic (objects there can't be glimpsed
    # in passing and must be searched for)
    sizes = [
        (_cells(rng.choice((4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0))), _cells(rng.choice((5.5, 6.0, 6.5, 7.0))))
        for _ in range(side_count)
    ]
    above = list(range(0, side_count, 2))
    below = list(range(1, side_count, 2))

    def side_width(indices: list[int]) -> int:
        return sum(sizes[i][0] for i in indices) + max(0, len(indices) - 1)

    interior_w = max(side_width(above), side_width(below), _cells(6.0))
    max_above = max((sizes[i][1] for i in above), default=0)
    max_below = max((sizes[i][1] for i in below), default=0)
    corridor_h = _cells(2.0)
    cy0 = max_below + 2
    cy_top = cy0 + corridor_h
    ny = cy_top + 1 + max_above + 1
    nx = interior_w + 2
    grid = np.full((ny, nx), WALL, dtype=np.int16)
    grid[cy0:cy_top, 1 : nx - 1] = 0  # corridor spine

    spans: dict[int, tuple[int, int]] = {}

    def carve_side(indices: list[int], is_above: bool) -> None:
        x = 1
        prev: int | None = None
        for i in indices:
            w, d = sizes[i]
            label = i + 1
            if is_above:
                y0, y1 = cy_top + 1, cy_top + 1 + d
                wall_y = cy_top
            else:
                y0, y1 = cy0 - 1 - d, cy0 - 1
                wall_y = cy0 - 1
            grid[y0:y1, x : x + w] = label
            spans[i] = (x, x + w)
            door_x = x + w // 2 - 2
            grid[wall_y, door_x : door_x + 4] = 0  # 1 m doorway to the corridor
            if prev is not None:
                shared = min(d, sizes[prev][1])
                door_y0 = (y0 if is_above else cy0 - 1 - shared) + shared // 2 - 2
                grid[door_y0 : door_y0 + 4, x - 1] = label  # 1 m door to same-side neighbor
            prev = i
            x += w + 1

    carve_side(above, True)
    carve_side(below, False)

    world = World(grid, names, [])

    # object placement: per-category round-robin over side rooms keeps duplicates apart
    objects: list[ObjectInstance] = []
    placed: list[tuple[float, float]] = []
    side_rooms = [names[i + 1] for i in range(side_count)]
    counters: dict[str, int] = {}
    for category, count in objects_spec or []:
        if count < 1:
            raise RejectedInput(f"object count for {category!r} must be >= 1")
        offset = rng.randrange(len(side_rooms))
        for j in range(count):
            counters[category] = counters.get(category, 0) + 1
            object_id = f"{category}_{counters[category]:02d}"
            position = None
            for attempt in range(len(side_rooms)):
                room = side_rooms[(offset + j + attempt) % len(side_rooms)]
                candidates = [
                    world.cell_center(c)
                    for c in world.room_cells(room, margin=3)
                    if all(math.hypot(p[0] - world.cell_center(c)[0], p[1] - world.cell_center(c)[1]) >= 1.0 for p in placed)
                ]
                if candidates:
                    position = rng.choice(sorted(candidates))
                    break
            if position is None:
                raise GenerationError(
                    f"cannot place object {object_id!r}: no free cell 1 m clear of others"
                )
            placed.append(position)
            feature = _random_unit(rng, FEATURE_DIM)
            objects.append(ObjectInstance(object_id, category, position, feature))
    return World(grid, names, objects, _nav=world._nav)


def _random_unit(rng: random.Random, dim: int) -> np.ndarray:
    while True:
        vec = np.array([rng.gauss(0.0, 1.0) for _ in range(dim)])
        norm = float(np.linalg.norm(vec))
        if norm > 1e-6:
            return vec / norm
