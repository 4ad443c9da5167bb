"""Hierarchical navigation policy over retrieved memory.

Grounding resolves which object instance the instruction means: the
deterministic planner scores each retrieved candidate by summed
instruction-statement cosine, lets candidates inherit the score of a
retrieved statement from another candidate when they share a fact-value
token (joint composition), and breaks exact ties toward the newest
statement edge, then the smallest object id. The room prior comes from the
candidate's most recent successful episodic rendering.

Execution then alternates a room-level plan (prior room first, else a
nearest-unvisited sweep over the scene graph) with low-level steering:
descend the goal's grid distance field one 1 m stride at a time, quantized
to 30-degree headings, scanning each searched room with three right turns
so the three 90-degree views cover a full circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import requests

from .distiller import EpisodeLog, TrajectoryStep, parse_rendered_summary, statement_fact_value, trajectory_text
from .encoder import EncoderConfig, DEFAULT_ENCODER, cosine, encode
from .errors import ExplorationExhausted, GroundingFailed, PlannerUnavailable, RejectedInput
from .retrieval import CandidateObject, RetrievalResult
from .world import (
    ACTION_START,
    HEADINGS,
    MOVE_FORWARD,
    STOP,
    STRIDE_M,
    TURN_LEFT,
    TURN_RIGHT,
    AgentState,
    Observation,
    SceneGraph,
    World,
    heading_vector,
)

_EPS = 1e-9
_SUMMARY_FOUND_PREFIX = "found it in "


@dataclass
class GroundingDecision:
    chosen_object_id: str  # empty only for category-only (no-prior) grounding
    chosen_category: str
    prior_room: str | None
    rationale: str
    source: str  # {polar, raw, none}


@dataclass
class NoPriorContext:
    """Memory-free context: only the world's category vocabulary is known."""

    categories: tuple[str, ...] = ()


@dataclass
class RunConfig:
    max_steps: int = 700
    success_radius_m: float = 2.0
    k: int = 5
    mode: str = "polar"
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise RejectedInput(f"max_steps must be >= 1, got {self.max_steps}")
        if self.success_radius_m <= 0:
            raise RejectedInput(f"success_radius_m must be positive, got {self.success_radius_m}")


def _tokens(text: str) -> list[str]:
    return text.lower().split()


def _turn_count(current: int, target: int) -> int:
    delta = (target - current) % 360
    return min(delta, 360 - delta) // 30


def _turn_toward(current: int, target: int) -> str:
    delta = (target - current) % 360
    return TURN_RIGHT if delta <= 180 else TURN_LEFT


def _sweep_room(scene_graph: SceneGraph, decision: GroundingDecision, visited: set[str], current_room: str) -> str:
    prior = decision.prior_room
    if prior and prior in scene_graph.waypoints and prior not in visited:
        return prior
    unvisited = [r for r in scene_graph.rooms if r not in visited]
    if not unvisited:
        raise ExplorationExhausted("every room has been searched")
    # graph distance first; ties (common around a hallway hub) prefer
    # destination rooms over high-degree connectors, then the nearest waypoint,
    # so the sweep searches dead-end rooms before drifting back to the spine
    here = scene_graph.waypoints[current_room]
    unvisited.sort(
        key=lambda room: (
            scene_graph.hop_distance(current_room, room),
            len(scene_graph.neighbors(room)),
            math.hypot(scene_graph.waypoints[room][0] - here[0], scene_graph.waypoints[room][1] - here[1]),
            room,
        )
    )
    return unvisited[0]


def _prior_room_from_renderings(renderings: list[str], memory_mode: str) -> str | None:
    for rendering in renderings:  # newest first
        if memory_mode == "episodic":
            parsed = parse_rendered_summary(rendering)
            if parsed.get("outcome") == "success" and parsed.get("found_in", "none") != "none":
                return parsed["found_in"]
        elif memory_mode == "summary":
            if rendering.startswith(_SUMMARY_FOUND_PREFIX):
                rest = rendering[len(_SUMMARY_FOUND_PREFIX) :]
                return rest.split(" after searching", 1)[0]
        elif memory_mode == "raw":
            tokens = rendering.split()
            if len(tokens) >= 2:
                return tokens[-2]  # trajectory text alternates room/action
    return None


class OraclePlanner:
    """Transparent deterministic grounding + sweep planning (no model calls)."""

    def __init__(self, encoder_config: EncoderConfig = DEFAULT_ENCODER, memory_mode: str = "episodic"):
        if memory_mode not in ("episodic", "summary", "raw", "none"):
            raise RejectedInput(f"unknown memory_mode {memory_mode!r}")
        self.encoder_config = encoder_config
        self.memory_mode = memory_mode

    def ground(self, instruction: str, context: RetrievalResult, scene_graph: SceneGraph | None = None) -> GroundingDecision:
        if not isinstance(context, RetrievalResult) or not context.candidates:
            raise GroundingFailed("no retrieved candidates to ground against")
        query = encode(instruction, self.encoder_config)
        node_texts = {
            st.node_id: st.text for cand in context.candidates for st in cand.statements if st.node_id
        }
        scored = []
        for cand in context.candidates:
            score, latest = self._score(cand, context, node_texts, query)
            scored.append((-score, -latest, cand.object_id, cand, score))
        scored.sort(key=lambda row: row[:3])
        _, _, _, best, score = scored[0]
        return GroundingDecision(
            best.object_id,
            best.category,
            _prior_room_from_renderings(best.episodic_memories, self.memory_mode),
            f"statement-similarity score {score:.6f} over {len(context.candidates)} candidates",
            "polar",
        )

    def _score(self, cand: CandidateObject, context: RetrievalResult, node_texts: dict[str, str], query) -> tuple[float, int]:
        own_nodes = set()
        own_value_tokens: set[str] = set()
        score = 0.0
        latest = -1
        for st in cand.statements:
            if not st.active:
                continue
            own_nodes.add(st.node_id)
            latest = max(latest, st.timestamp)
            score += cosine(query, encode(st.text, self.encoder_config))
            value = statement_fact_value(st.text)
            if value:
                own_value_tokens.update(_tokens(value))
        # joint composition: inherit each foreign retrieved statement at most once
        for hit in context.hits:
            if hit.node_id in own_nodes:
                continue
            text = node_texts.get(hit.node_id)
            value = statement_fact_value(text) if text else None
            if value and set(_tokens(value)) & own_value_tokens:
                score += hit.score
        return score, latest

    def choose_room(self, scene_graph: SceneGraph, decision: GroundingDecision, visited: set[str], current_room: str) -> str:
        return _sweep_room(scene_graph, decision, visited, current_room)


class NaiveMatcher:
    """Raw-interaction grounding: lexical overlap against whole episode documents."""

    memory_mode = "raw"

    def ground(self, instruction: str, context: list[EpisodeLog], scene_graph: SceneGraph | None = None) -> GroundingDecision:
        if not context:
            raise GroundingFailed("no raw episodes to match against")
        query = set(_tokens(instruction))
        scored = []
        for ep in context:
            doc = f"{ep.instruction} {trajectory_text(ep)}"
            overlap = len(query & set(_tokens(doc)))
            scored.append((-overlap, -ep.timestamp, ep.episode_id, ep, overlap))
        scored.sort(key=lambda row: row[:3])
        _, _, _, best, overlap = scored[0]
        prior = best.trajectory[-1].room if best.success and best.trajectory else None
        return GroundingDecision(
            best.target_object_id,
            best.target_category,
            prior,
            f"token overlap {overlap} with episode {best.episode_id}",
            "raw",
        )

    def choose_room(self, scene_graph: SceneGraph, decision: GroundingDecision, visited: set[str], current_room: str) -> str:
        return _sweep_room(scene_graph, decision, visited, current_room)


class RemotePlanner:
    """Wire-contract adapter for an external grounding/planning model."""

    def __init__(self, endpoint: str, timeout_s: float = 10.0):
        if not endpoint:
            raise RejectedInput("remote planner needs an endpoint")
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s

    def _post(self, route: str, payload: dict) -> dict:
        try:
            response = requests.post(f"{self.endpoint}/{route}", json=payload, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise PlannerUnavailable(f"planner request failed: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise PlannerUnavailable(f"planner returned status {response.status_code}")
        try:
            doc = response.json()
        except ValueError as exc:
            raise PlannerUnavailable("planner returned a non-JSON body") from exc
        if not isinstance(doc, dict):
            raise PlannerUnavailable("planner response must be an object")
        return doc

    def ground(self, instruction: str, context: RetrievalResult, scene_graph: SceneGraph | None = None) -> GroundingDecision:
        if not isinstance(context, RetrievalResult) or not context.candidates:
            raise GroundingFailed("no retrieved candidates to ground against")
        payload = {
            "instruction": instruction,
            "candidates": [
                {
                    "object_id": c.object_id,
                    "category": c.category,
                    "statements": [
                        {"text": s.text, "score": s.score, "timestamp": s.timestamp, "active": s.active}
                        for s in c.statements
                    ],
                    "episodic_memories": list(c.episodic_memories),
                    "instructions": list(c.instructions),
                }
                for c in context.candidates
            ],
            "scene_graph": scene_graph.to_json() if scene_graph is not None else None,
        }
        doc = self._post("ground", payload)
        object_id = doc.get("object_id")
        if not isinstance(object_id, str) or not object_id:
            raise PlannerUnavailable("planner response lacks object_id")
        by_id = {c.object_id: c for c in context.candidates}
        if object_id not in by_id:
            raise PlannerUnavailable(f"planner grounded unknown object {object_id!r}")
        prior = doc.get("prior_room")
        if prior is not None and not isinstance(prior, str):
            raise PlannerUnavailable("planner prior_room must be a string or null")
        return GroundingDecision(
            object_id, by_id[object_id].category, prior, str(doc.get("rationale", "")), "polar"
        )

    def choose_room(self, scene_graph: SceneGraph, decision: GroundingDecision, visited: set[str], current_room: str) -> str:
        payload = {
            "scene_graph": scene_graph.to_json(),
            "object_id": decision.chosen_object_id,
            "prior_room": decision.prior_room,
            "visited_rooms": sorted(visited),
            "current_room": current_room,
        }
        doc = self._post("choose_room", payload)
        room = doc.get("room")
        if room not in scene_graph.waypoints:
            raise PlannerUnavailable(f"planner chose unknown room {room!r}")
        return room


def _category_only(instruction: str, categories: tuple[str, ...], encoder_config: EncoderConfig) -> GroundingDecision:
    if not categories:
        raise GroundingFailed("no known categories for category-only grounding")
    tokens = _tokens(instruction)
    positions = {}
    for category in categories:
        lowered = category.lower()
        if lowered in tokens:
            positions[category] = max(i for i, t in enumerate(tokens) if t == lowered)
    if positions:
        # the object noun tends to close the sentence: latest mention wins
        category = max(sorted(positions), key=lambda c: positions[c])
        how = "parsed from instruction"
    else:
        query = encode(instruction, encoder_config)
        category = min(sorted(categories), key=lambda c: -cosine(query, encode(c, encoder_config)))
        how = "nearest category by similarity"
    return GroundingDecision("", category, None, f"category-only grounding ({how})", "none")


def ground_target(
    planner,
    instruction: str,
    context: RetrievalResult | list[EpisodeLog] | NoPriorContext | None,
    scene_graph: SceneGraph | None = None,
    encoder_config: EncoderConfig = DEFAULT_ENCODER,
) -> GroundingDecision:
    """Dispatch grounding by context shape; empty memory contexts are errors."""
    if context is None or isinstance(context, NoPriorContext):
        categories = context.categories if isinstance(context, NoPriorContext) else ()
        return _category_only(instruction, tuple(categories), encoder_config)
    if isinstance(context, RetrievalResult):
        if not context.candidates:
            raise GroundingFailed("retrieval produced no candidates")
        return planner.ground(instruction, context, scene_graph)
    if isinstance(context, list):
        if not context:
            raise GroundingFailed("raw-interaction context is empty")
        return planner.ground(instruction, context, scene_graph)
    raise RejectedInput(f"unsupported grounding context {type(context).__name__}")


def plan_high(
    scene_graph: SceneGraph,
    decision: GroundingDecision,
    visited: set[str],
    current_room: str,
    planner,
) -> list[str]:
    """Rooms to traverse toward the planner's chosen room, ending with it."""
    room = planner.choose_room(scene_graph, decision, visited, current_room)
    path = scene_graph.bfs_path(current_room, room)
    if path is None:
        raise ExplorationExhausted(f"room {room!r} is unreachable from {current_room!r}")
    # searching the room one already stands in still means reaching its
    # waypoint: a scan only covers the whole room from its center
    return path or [room]


def _steer_action(world: World, state: AgentState, goal: tuple[float, float]) -> str | None:
    """One action descending the goal's distance field; None when no stride improves."""
    dist_field = world.distance_field(goal)
    cx, cy = world.cell_of(state.position)
    here = dist_field[cy, cx]
    best = None
    for heading in HEADINGS:
        ux, uy = heading_vector(heading)
        end = (state.position[0] + STRIDE_M * ux, state.position[1] + STRIDE_M * uy)
        if not world.segment_free(state.position, end):
            continue
        ix, iy = world.cell_of(end)
        value = dist_field[iy, ix]
        if not value < here - _EPS:
            continue
        key = (value, _turn_count(state.heading, heading), heading)
        if best is None or key < best:
            best = key
    if best is None:
        return None
    heading = best[2]
    if heading == state.heading:
        return MOVE_FORWARD
    return _turn_toward(state.heading, heading)


def plan_low(
    world: World,
    state: AgentState,
    observation: Observation,
    waypoint: tuple[float, float],
    decision: GroundingDecision,
    config: RunConfig,
    target_position: tuple[float, float] | None = None,
) -> str:
    """Single low-level action: stop on the target, else descend toward it or the waypoint."""
    if decision.chosen_object_id:
        seen = observation.find(decision.chosen_object_id)
        if seen is not None and seen <= config.success_radius_m + _EPS:
            return STOP
    goal = waypoint if target_position is None else target_position
    action = _steer_action(world, state, goal)
    return TURN_RIGHT if action is None else action


def _visible_ids(observation: Observation) -> list[str]:
    return sorted({oid for view in observation.views for oid, _cat, _d in view.visible})


def run_episode(
    world: World,
    instruction: str,
    context,
    planner,
    config: RunConfig,
    *,
    gold_object_id: str,
    start: AgentState,
    episode_id: str = "episode",
    timestamp: int = 0,
    facts: list[tuple[str, str]] | None = None,
    reference_feature=None,
    decision: GroundingDecision | None = None,
    scene_graph: SceneGraph | None = None,
) -> tuple[EpisodeLog, GroundingDecision]:
    """Ground once, then explore/approach until STOP, exhaustion, or the step cap.

    Pass an explicit decision to bypass grounding (acquisition-stage episodes).
    Success is judged purely by the final position against the gold object.
    """
    if gold_object_id not in world.objects:
        raise RejectedInput(f"unknown gold object {gold_object_id!r}")
    if not world.is_free(start.position):
        raise RejectedInput(f"start position {start.position} is not free space")
    if scene_graph is None:
        scene_graph = world.build_scene_graph()
    if decision is None:
        try:
            decision = ground_target(planner, instruction, context, scene_graph)
        except (GroundingFailed, PlannerUnavailable) as exc:
            source = "none" if context is None or isinstance(context, NoPriorContext) else (
                "raw" if isinstance(context, list) else "polar"
            )
            decision = GroundingDecision("", "", None, f"grounding unavailable: {exc}", source)

    state = AgentState(start.position, start.heading, 0)
    observation = world.observe(state)
    trajectory = [
        TrajectoryStep(state.position, state.heading, ACTION_START, world.room_of(state.position) or "", _visible_ids(observation))
    ]
    working = decision
    target_sighted = False
    visited: set[str] = set()
    plan: list[str] = []
    scan_left = 0  # rooms are searched from their waypoints, spawn room included
    stall = 0
    done = False

    while not done and state.steps_taken < config.max_steps:
        if not working.chosen_object_id and working.chosen_category:
            # category-only grounding locks onto the first instance sighted
            for view in observation.views:
                for oid, category, _d in view.visible:
                    if category == working.chosen_category:
                        working = replace(working, chosen_object_id=oid)
                        break
                if working.chosen_object_id:
                    break
        target_position = None
        if working.chosen_object_id and working.chosen_object_id in world.objects:
            if observation.find(working.chosen_object_id) is not None:
                target_sighted = True
            if target_sighted:
                target_position = world.objects[working.chosen_object_id].position

        if target_position is not None:
            action = plan_low(world, state, observation, state.position, working, config, target_position)
        elif scan_left > 0:
            action = TURN_RIGHT
            scan_left -= 1
            if scan_left == 0:
                visited.add(world.room_of(state.position) or "")
                plan = []
        else:
            if not plan:
                try:
                    plan = plan_high(scene_graph, working, visited, world.room_of(state.position) or "", planner)
                except ExplorationExhausted:
                    break
                if not plan:
                    scan_left = 3
                    continue
            # room entry closes an intermediate leg; the last leg needs its waypoint area
            while len(plan) > 1 and world.room_of(state.position) == plan[0]:
                plan.pop(0)
            waypoint = scene_graph.waypoints[plan[-1] if len(plan) == 1 else plan[0]]
            if len(plan) == 1:
                arrived = world.shortest_path_length(state.position, waypoint) <= STRIDE_M + _EPS
                if arrived or _steer_action(world, state, waypoint) is None:
                    scan_left = 3
                    plan = []
                    continue
            action = plan_low(world, state, observation, waypoint, working, config)

        if stall > 12:  # a full turn without progress: give up on this goal locally
            target_sighted = False
            scan_left = 3
            plan = []
            stall = 0
            continue
        state, observation, done = world.step(state, action)
        stall = 0 if (action == MOVE_FORWARD and not observation.blocked) or action == STOP else stall + 1
        trajectory.append(
            TrajectoryStep(state.position, state.heading, action, world.room_of(state.position) or "", _visible_ids(observation))
        )

    gold = world.objects[gold_object_id]
    distance = math.hypot(state.position[0] - gold.position[0], state.position[1] - gold.position[1])
    log = EpisodeLog(
        episode_id=episode_id,
        timestamp=timestamp,
        instruction=instruction,
        facts=list(facts or []),
        reference_feature=reference_feature,
        target_object_id=gold_object_id,
        target_category=gold.category,
        trajectory=trajectory,
        success=distance <= config.success_radius_m + _EPS,
        final_position=state.position,
    )
    return log, decision
