"""Turns finished episodes into memory: semantic statements plus an episodic record.

The builtin distiller is deterministic. Each user fact (key, value) from the
episode becomes one single-fact statement rendered from a fixed template, and
the trajectory is compressed into a small structured record (outcome, room
order, unpromising rooms, where the target was found, meters walked). A second
fact arriving later under the same key supersedes the earlier statement's edge
for that object rather than editing history.

Remote mode posts {"instruction", "trajectory_text"} and expects
{"statements": [{"text", "fact_key"}, ...], "summary_text"}; the graph still
keeps the canonical deterministic episodic rendering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import requests

from .encoder import EncoderConfig, DEFAULT_ENCODER, encode
from .errors import DistillerUnavailable, ParseError, RejectedInput
from .graph import MemoryGraph

from .world import ACTION_START, MOVE_FORWARD, STOP, TURN_LEFT, TURN_RIGHT

ACTION_FORWARD = MOVE_FORWARD
ACTION_LEFT = TURN_LEFT
ACTION_RIGHT = TURN_RIGHT
ACTION_STOP = STOP

STATEMENT_TEMPLATE = "user: {key} = {value} refers to {category} {object_id}"


@dataclass
class TrajectoryStep:
    position: tuple[float, float]
    heading: int
    action: str
    room: str
    visible_object_ids: list[str] = field(default_factory=list)


@dataclass
class EpisodeLog:
    """Everything one episode produced, sufficient to re-derive its memory."""

    episode_id: str
    timestamp: int
    instruction: str
    facts: list[tuple[str, str]]
    reference_feature: np.ndarray | None
    target_object_id: str
    target_category: str
    trajectory: list[TrajectoryStep]
    success: bool
    final_position: tuple[float, float]

    def validate(self) -> None:
        if not self.trajectory:
            raise RejectedInput(f"episode {self.episode_id!r} has an empty trajectory")
        for step in self.trajectory:
            if step.heading % 30 != 0 or not (0 <= step.heading < 360):
                raise RejectedInput(f"heading {step.heading} is not a multiple of 30 in [0, 330]")


@dataclass
class SemanticStatement:
    object_id: str
    text: str
    source_fact_key: str
    supersedes_key: str | None = None


@dataclass
class EpisodicSummary:
    success: bool
    room_sequence: list[str]
    unpromising_rooms: list[str]
    found_room: str | None
    path_length_m: float
    rendered_text: str


@dataclass(frozen=True)
class DistillerConfig:
    mode: str = "builtin"  # "builtin" | "remote"
    endpoint: str | None = None
    timeout_s: float = 5.0

    def __post_init__(self):
        if self.mode not in ("builtin", "remote"):
            raise RejectedInput(f"unknown distiller mode {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise RejectedInput("remote distiller mode requires an endpoint")


DEFAULT_DISTILLER = DistillerConfig()


@dataclass
class MutationReport:
    objects_created: int = 0
    semantic_created: int = 0
    episodic_created: int = 0
    edges_created: int = 0
    supersessions: int = 0


def render_statement(key: str, value: str, category: str, object_id: str) -> str:
    return STATEMENT_TEMPLATE.format(key=key, value=value, category=category, object_id=object_id)


def statement_fact_key(text: str) -> str | None:
    """Recover the fact key from a templated statement; None if not template-shaped."""
    if not text.startswith("user: ") or " refers to " not in text:
        return None
    body = text[len("user: ") :].rsplit(" refers to ", 1)[0]
    if " = " not in body:
        return None
    return body.split(" = ", 1)[0]


def statement_fact_value(text: str) -> str | None:
    if not text.startswith("user: ") or " refers to " not in text:
        return None
    body = text[len("user: ") :].rsplit(" refers to ", 1)[0]
    if " = " not in body:
        return None
    return body.split(" = ", 1)[1]


def trajectory_text(episode: EpisodeLog) -> str:
    """Flat `room action` token stream, one pair per step."""
    return " ".join(f"{s.room} {s.action}" for s in episode.trajectory)


def distill_semantic(episode: EpisodeLog, config: DistillerConfig = DEFAULT_DISTILLER) -> list[SemanticStatement]:
    """One single-fact statement per user fact; order follows the episode's fact list."""
    if config.mode == "builtin":
        return [
            SemanticStatement(
                object_id=episode.target_object_id,
                text=render_statement(key, value, episode.target_category, episode.target_object_id),
                source_fact_key=key,
                supersedes_key=key,
            )
            for key, value in episode.facts
        ]
    statements, _ = _remote_distill(episode, config)
    return statements


def _remote_distill(episode: EpisodeLog, config: DistillerConfig) -> tuple[list[SemanticStatement], str]:
    payload = {"instruction": episode.instruction, "trajectory_text": trajectory_text(episode)}
    try:
        resp = requests.post(config.endpoint, json=payload, timeout=config.timeout_s)
    except requests.RequestException as exc:
        raise DistillerUnavailable(f"distiller endpoint unreachable: {exc}") from exc
    if resp.status_code // 100 != 2:
        raise DistillerUnavailable(f"distiller endpoint returned HTTP {resp.status_code}")
    try:
        doc = resp.json()
        rows = doc["statements"]
        summary_text = doc["summary_text"]
    except (ValueError, KeyError, TypeError) as exc:
        raise DistillerUnavailable(f"malformed distiller response: {exc}") from exc
    statements = []
    for row in rows if isinstance(rows, list) else [None]:
        if not isinstance(row, dict) or not row.get("text") or not row.get("fact_key"):
            raise DistillerUnavailable(f"distiller statement must carry text and fact_key: {row!r}")
        statements.append(
            SemanticStatement(
                object_id=episode.target_object_id,
                text=str(row["text"]),
                source_fact_key=str(row["fact_key"]),
                supersedes_key=str(row["fact_key"]),
            )
        )
    return statements, str(summary_text)


def summarize_episodic(episode: EpisodeLog) -> EpisodicSummary:
    """Deterministic trajectory compression; path length counts successful forward moves."""
    if not episode.trajectory:
        raise RejectedInput("cannot summarize an empty trajectory")
    room_sequence: list[str] = []
    for step in episode.trajectory:
        if step.room not in room_sequence:
            room_sequence.append(step.room)
    forward = 0
    prev = episode.trajectory[0].position
    for step in episode.trajectory[1:]:
        if step.action == ACTION_FORWARD and step.position != prev:
            forward += 1
        prev = step.position
    path_length_m = 1.0 * forward
    found_room = episode.trajectory[-1].room if episode.success else None
    unpromising = [r for r in room_sequence if r != found_room]
    rendered = (
        f"outcome={'success' if episode.success else 'failure'}; "
        f"searched={','.join(room_sequence)}; "
        f"found_in={found_room if found_room is not None else 'none'}; "
        f"length={path_length_m}m"
    )
    return EpisodicSummary(episode.success, room_sequence, unpromising, found_room, path_length_m, rendered)


def parse_rendered_summary(text: str) -> dict:
    """Inverse of the episodic rendering; returns {} when text is not in that shape."""
    out = {}
    for part in text.split("; "):
        if "=" not in part:
            return {}
        key, value = part.split("=", 1)
        out[key] = value
    if set(out) != {"outcome", "searched", "found_in", "length"}:
        return {}
    return out


def memorize(
    episode: EpisodeLog,
    graph: MemoryGraph,
    *,
    encoder_config: EncoderConfig = DEFAULT_ENCODER,
    distiller_config: DistillerConfig = DEFAULT_DISTILLER,
) -> MutationReport:
    """Distill one episode into the graph: upsert the object, link statements
    (superseding stale same-key facts), and append the episodic record.

    Pure function of (episode, graph state): replaying the same episodes from
    an empty graph rebuilds an identical snapshot.
    """
    episode.validate()
    report = MutationReport()
    t = episode.timestamp
    edges_before = len(graph.edges)
    objects_before = len(graph.objects)
    semantic_before = len(graph.semantic)

    object_ref = graph.upsert_object(
        episode.target_category,
        object_id=episode.target_object_id,
        reference_feature=episode.reference_feature,
        timestamp=t,
    )
    for stmt in distill_semantic(episode, distiller_config):
        stale = []
        if stmt.supersedes_key is not None:
            for sem_id, _ts in graph.neighbors(object_ref, kind="semantic", active_only=True):
                node = graph.semantic[sem_id]
                if statement_fact_key(node.statement) == stmt.supersedes_key and node.statement != stmt.text:
                    stale.append(sem_id)
        new_id = graph.add_semantic(object_ref, stmt.text, encode(stmt.text, encoder_config), t)
        for old_id in stale:
            if old_id != new_id:
                graph.supersede(object_ref, old_id, new_id, t)
                report.supersessions += 1
    summary = summarize_episodic(episode)
    graph.add_episodic(
        object_ref,
        episode_id=episode.episode_id,
        instruction=episode.instruction,
        success=summary.success,
        room_sequence=summary.room_sequence,
        unpromising_rooms=summary.unpromising_rooms,
        found_room=summary.found_room,
        path_length_m=summary.path_length_m,
        rendered_text=summary.rendered_text,
        timestamp=t,
    )
    report.objects_created = len(graph.objects) - objects_before
    report.semantic_created = len(graph.semantic) - semantic_before
    report.episodic_created = 1
    report.edges_created = len(graph.edges) - edges_before
    return report


# -- episode files (one JSON object per line) ------------------------------


def episode_to_json(episode: EpisodeLog) -> dict:
    return {
        "episode_id": episode.episode_id,
        "timestamp": episode.timestamp,
        "instruction": episode.instruction,
        "facts": [[k, v] for k, v in episode.facts],
        "reference_feature": None if episode.reference_feature is None else episode.reference_feature.tolist(),
        "target_object_id": episode.target_object_id,
        "target_category": episode.target_category,
        "trajectory": [
            {
                "position": [s.position[0], s.position[1]],
                "heading": s.heading,
                "action": s.action,
                "room": s.room,
                "visible_object_ids": s.visible_object_ids,
            }
            for s in episode.trajectory
        ],
        "success": episode.success,
        "final_position": [episode.final_position[0], episode.final_position[1]],
    }


def episode_from_json(doc: dict) -> EpisodeLog:
    try:
        feat = doc["reference_feature"]
        episode = EpisodeLog(
            episode_id=doc["episode_id"],
            timestamp=int(doc["timestamp"]),
            instruction=doc["instruction"],
            facts=[(k, v) for k, v in doc["facts"]],
            reference_feature=None if feat is None else np.asarray(feat, dtype=np.float64),
            target_object_id=doc["target_object_id"],
            target_category=doc["target_category"],
            trajectory=[
                TrajectoryStep(
                    position=(float(s["position"][0]), float(s["position"][1])),
                    heading=int(s["heading"]),
                    action=s["action"],
                    room=s["room"],
                    visible_object_ids=list(s["visible_object_ids"]),
                )
                for s in doc["trajectory"]
            ],
            success=bool(doc["success"]),
            final_position=(float(doc["final_position"][0]), float(doc["final_position"][1])),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"malformed episode record: {exc}") from exc
    episode.validate()
    return episode


def save_episodes(episodes: list[EpisodeLog], path: str) -> None:
    from .fileio import atomic_write_text

    lines = [json.dumps(episode_to_json(e), sort_keys=True) for e in episodes]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def load_episodes(path: str) -> list[EpisodeLog]:
    episodes = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, line=lineno) from exc
            try:
                episodes.append(episode_from_json(doc))
            except (ParseError, RejectedInput) as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return episodes
