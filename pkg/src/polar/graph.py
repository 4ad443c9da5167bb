"""Object-centric memory graph.

Three node kinds: ObjectNode (a physical thing, keyed by a stable id and
optionally carrying a visual reference feature), SemanticNode (one
natural-language statement about an object, embedded for retrieval), and
EpisodicNode (the distilled record of one past episode). Edges always run
object -> semantic or object -> episodic, carry the episode timestamp, and
are never deleted: superseding a fact deactivates the old edge and adds a
new active one, so history stays queryable.

Single-writer discipline: one ingestion sequence mutates a graph at a time;
concurrent readers are safe between mutations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .encoder import cosine
from .errors import NotFound, ParseError, RejectedInput

FORMAT_VERSION = 1
THETA_DEDUP = 0.92  # statements at or above this cosine collapse to one node
THETA_OBJ = 0.95  # reference features at or above this cosine are the same object

EDGE_SEMANTIC = "object->semantic"
EDGE_EPISODIC = "object->episodic"

_UNIT_TOL = 1e-6


@dataclass
class ObjectNode:
    object_id: str
    category: str
    reference_feature: np.ndarray | None
    created_at: int


@dataclass
class SemanticNode:
    node_id: str
    statement: str
    embedding: np.ndarray
    created_at: int


@dataclass
class EpisodicNode:
    node_id: str
    episode_id: str
    instruction: str
    success: bool
    room_sequence: list[str]
    unpromising_rooms: list[str]
    found_room: str | None
    path_length_m: float
    rendered_text: str
    created_at: int


@dataclass
class Edge:
    src: str
    dst: str
    kind: str
    timestamp: int
    active: bool = True


def _check_unit(vec: np.ndarray, what: str) -> None:
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise RejectedInput(f"{what} must be unit norm, got {norm:.6f}")


@dataclass
class _Counters:
    object: int = 1
    semantic: int = 1
    episodic: int = 1


class MemoryGraph:
    """Mutable in-memory graph with snapshot persistence."""

    def __init__(self, theta_dedup: float = THETA_DEDUP, theta_obj: float = THETA_OBJ):
        self.theta_dedup = theta_dedup
        self.theta_obj = theta_obj
        self.objects: dict[str, ObjectNode] = {}
        self.semantic: dict[str, SemanticNode] = {}
        self.episodic: dict[str, EpisodicNode] = {}
        self.edges: list[Edge] = []
        self.counters = _Counters()
        self.clock = 0

    # -- mutation ---------------------------------------------------------

    def upsert_object(
        self,
        category: str,
        *,
        object_id: str | None = None,
        reference_feature: np.ndarray | None = None,
        timestamp: int = 0,
    ) -> str:
        """Return the id of an existing matching object or create a new node.

        Exact object_id match wins; otherwise a reference feature is matched
        by cosine against same-category objects at theta_obj. Existing nodes
        are never mutated.
        """
        if object_id is None and reference_feature is None:
            raise RejectedInput("upsert_object needs an object_id or a reference_feature")
        self._touch(timestamp)
        if object_id is not None and object_id in self.objects:
            return object_id
        if reference_feature is not None:
            feat = np.asarray(reference_feature, dtype=np.float64)
            _check_unit(feat, "reference_feature")
            best_id, best_score = None, -2.0
            for oid in sorted(self.objects):
                node = self.objects[oid]
                if node.category != category or node.reference_feature is None:
                    continue
                score = cosine(feat, node.reference_feature)
                if score > best_score:
                    best_id, best_score = oid, score
            if best_id is not None and best_score >= self.theta_obj:
                return best_id
            reference_feature = feat
        if object_id is None:
            object_id = f"obj_{self.counters.object:04d}"
            self.counters.object += 1
        self.objects[object_id] = ObjectNode(object_id, category, reference_feature, timestamp)
        return object_id

    def add_semantic(self, object_ref: str, statement: str, embedding: np.ndarray, timestamp: int) -> str:
        """Link object_ref to a statement node, deduplicating near-identical statements.

        If an existing node's embedding is within theta_dedup cosine, the object is
        linked to it instead of a new node; an already-active link is left untouched.
        Returns the linked node id.
        """
        if object_ref not in self.objects:
            raise NotFound(f"unknown object {object_ref!r}")
        if not statement:
            raise RejectedInput("statement must be non-empty")
        emb = np.asarray(embedding, dtype=np.float64)
        _check_unit(emb, "statement embedding")
        self._touch(timestamp)
        best_id, best_score = None, -2.0
        for sid in sorted(self.semantic):
            score = cosine(emb, self.semantic[sid].embedding)
            if score > best_score:
                best_id, best_score = sid, score
        if best_id is not None and best_score >= self.theta_dedup:
            node_id = best_id
        else:
            node_id = f"sem_{self.counters.semantic:04d}"
            self.counters.semantic += 1
            self.semantic[node_id] = SemanticNode(node_id, statement, emb, timestamp)
        if self._active_edge(object_ref, node_id) is None:
            self.edges.append(Edge(object_ref, node_id, EDGE_SEMANTIC, timestamp, True))
        return node_id

    def add_episodic(
        self,
        object_ref: str,
        *,
        episode_id: str,
        instruction: str,
        success: bool,
        room_sequence: list[str],
        unpromising_rooms: list[str],
        found_room: str | None,
        path_length_m: float,
        rendered_text: str,
        timestamp: int,
    ) -> str:
        """Append an episodic record for object_ref. Episodic nodes are never merged."""
        if object_ref not in self.objects:
            raise NotFound(f"unknown object {object_ref!r}")
        if success != (found_room is not None):
            raise RejectedInput("found_room must be present exactly when success is true")
        if not set(unpromising_rooms) <= set(room_sequence):
            raise RejectedInput("unpromising_rooms must be a subset of room_sequence")
        if path_length_m < 0:
            raise RejectedInput("path_length_m must be >= 0")
        self._touch(timestamp)
        node_id = f"epi_{self.counters.episodic:04d}"
        self.counters.episodic += 1
        self.episodic[node_id] = EpisodicNode(
            node_id,
            episode_id,
            instruction,
            success,
            list(room_sequence),
            list(unpromising_rooms),
            found_room,
            path_length_m,
            rendered_text,
            timestamp,
        )
        self.edges.append(Edge(object_ref, node_id, EDGE_EPISODIC, timestamp, True))
        return node_id

    def supersede(self, object_ref: str, old_id: str, new_id: str, timestamp: int) -> None:
        """Deactivate the active edge object_ref -> old_id and activate one to new_id.

        The old node and edge records stay in the graph as history.
        """
        if new_id not in self.semantic:
            raise NotFound(f"unknown semantic node {new_id!r}")
        old_edge = self._active_edge(object_ref, old_id)
        if old_edge is None or old_edge.kind != EDGE_SEMANTIC:
            raise NotFound(f"no active semantic edge {object_ref!r} -> {old_id!r}")
        self._touch(timestamp)
        old_edge.active = False
        existing = self._active_edge(object_ref, new_id)
        if existing is not None:
            if existing.timestamp == timestamp:
                return
            existing.active = False  # keep at most one active edge per pair; old record stays
        self.edges.append(Edge(object_ref, new_id, EDGE_SEMANTIC, timestamp, True))

    # -- queries ----------------------------------------------------------

    def neighbors(self, node_id: str, kind: str | None = None, active_only: bool = True) -> list[tuple[str, int]]:
        """(neighbor id, edge timestamp) pairs, newest edge first, ids ascending on ties.

        For an object node, kind filters the destination ("semantic" / "episodic");
        for a semantic or episodic node the linking objects come back.
        """
        if node_id in self.objects:
            want = {None: None, "semantic": EDGE_SEMANTIC, "episodic": EDGE_EPISODIC}.get(kind, "bad")
            if want == "bad":
                raise RejectedInput(f"unknown neighbor kind {kind!r}")
            rows = [
                (e.dst, e.timestamp)
                for e in self.edges
                if e.src == node_id and (want is None or e.kind == want) and (e.active or not active_only)
            ]
        elif node_id in self.semantic or node_id in self.episodic:
            if kind not in (None, "object"):
                raise RejectedInput(f"reverse queries only yield objects, not {kind!r}")
            rows = [
                (e.src, e.timestamp)
                for e in self.edges
                if e.dst == node_id and (e.active or not active_only)
            ]
        else:
            raise NotFound(f"unknown node {node_id!r}")
        rows.sort(key=lambda r: (-r[1], r[0]))
        return rows

    def _active_edge(self, src: str, dst: str) -> Edge | None:
        for e in self.edges:
            if e.active and e.src == src and e.dst == dst:
                return e
        return None

    def _touch(self, timestamp: int) -> None:
        self.clock = max(self.clock, timestamp)

    # -- persistence ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "clock": self.clock,
            "counters": {
                "object": self.counters.object,
                "semantic": self.counters.semantic,
                "episodic": self.counters.episodic,
            },
            "thresholds": {"theta_dedup": self.theta_dedup, "theta_obj": self.theta_obj},
            "object_nodes": [
                {
                    "object_id": n.object_id,
                    "category": n.category,
                    "reference_feature": None if n.reference_feature is None else n.reference_feature.tolist(),
                    "created_at": n.created_at,
                }
                for _, n in sorted(self.objects.items())
            ],
            "semantic_nodes": [
                {
                    "node_id": n.node_id,
                    "statement": n.statement,
                    "embedding": n.embedding.tolist(),
                    "created_at": n.created_at,
                }
                for _, n in sorted(self.semantic.items())
            ],
            "episodic_nodes": [
                {
                    "node_id": n.node_id,
                    "episode_id": n.episode_id,
                    "instruction": n.instruction,
                    "success": n.success,
                    "room_sequence": n.room_sequence,
                    "unpromising_rooms": n.unpromising_rooms,
                    "found_room": n.found_room,
                    "path_length_m": n.path_length_m,
                    "rendered_text": n.rendered_text,
                    "created_at": n.created_at,
                }
                for _, n in sorted(self.episodic.items())
            ],
            "edges": [
                {"src": e.src, "dst": e.dst, "kind": e.kind, "timestamp": e.timestamp, "active": e.active}
                for e in self.edges
            ],
        }

    def save(self, path: str) -> None:
        from .fileio import atomic_write_text

        atomic_write_text(path, json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n")

    @classmethod
    def from_json(cls, doc: dict) -> "MemoryGraph":
        if not isinstance(doc, dict):
            raise ParseError("graph snapshot must be a JSON object")
        if doc.get("format_version") != FORMAT_VERSION:
            raise ParseError(f"unsupported format_version {doc.get('format_version')!r}")
        try:
            thresholds = doc.get("thresholds", {})
            g = cls(
                theta_dedup=float(thresholds.get("theta_dedup", THETA_DEDUP)),
                theta_obj=float(thresholds.get("theta_obj", THETA_OBJ)),
            )
            g.clock = int(doc["clock"])
            counters = doc["counters"]
            g.counters = _Counters(int(counters["object"]), int(counters["semantic"]), int(counters["episodic"]))
            for row in doc["object_nodes"]:
                feat = row["reference_feature"]
                g.objects[row["object_id"]] = ObjectNode(
                    row["object_id"],
                    row["category"],
                    None if feat is None else np.asarray(feat, dtype=np.float64),
                    int(row["created_at"]),
                )
            for row in doc["semantic_nodes"]:
                g.semantic[row["node_id"]] = SemanticNode(
                    row["node_id"],
                    row["statement"],
                    np.asarray(row["embedding"], dtype=np.float64),
                    int(row["created_at"]),
                )
            for row in doc["episodic_nodes"]:
                g.episodic[row["node_id"]] = EpisodicNode(
                    row["node_id"],
                    row["episode_id"],
                    row["instruction"],
                    bool(row["success"]),
                    list(row["room_sequence"]),
                    list(row["unpromising_rooms"]),
                    row["found_room"],
                    float(row["path_length_m"]),
                    row["rendered_text"],
                    int(row["created_at"]),
                )
            for row in doc["edges"]:
                g.edges.append(Edge(row["src"], row["dst"], row["kind"], int(row["timestamp"]), bool(row["active"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed graph snapshot: {exc}") from exc
        g._validate_structure()
        return g

    @classmethod
    def load(cls, path: str) -> "MemoryGraph":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, line=exc.lineno) from exc
        return cls.from_json(doc)

    def _validate_structure(self) -> None:
        active_pairs = set()
        for e in self.edges:
            if e.src not in self.objects:
                raise ParseError(f"dangling edge source {e.src!r}")
            if e.kind == EDGE_SEMANTIC:
                if e.dst not in self.semantic:
                    raise ParseError(f"dangling edge destination {e.dst!r}")
            elif e.kind == EDGE_EPISODIC:
                if e.dst not in self.episodic:
                    raise ParseError(f"dangling edge destination {e.dst!r}")
            else:
                raise ParseError(f"unknown edge kind {e.kind!r}")
            if e.active:
                if (e.src, e.dst) in active_pairs:
                    raise ParseError(f"multiple active edges for {e.src!r} -> {e.dst!r}")
                active_pairs.add((e.src, e.dst))
