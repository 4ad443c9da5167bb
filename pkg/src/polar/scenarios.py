"""Seeded scenario suites: acquisition scripts plus one evaluation task each.

Five scenario kinds probe different memory behaviors. Compositional-single
plants one cue fact on the gold object; compositional-joint splits the cue
across two acquisition scripts and gives each half to a later same-category
decoy, so only the full script set identifies gold and any strict subset
ties gold with a newer decoy (recency then prefers the decoy); distractor
suites add same-category instances with their own facts; temporal-context
re-states the same fact key with a new value (must NOT collapse into the
old statement node, or supersession never fires); temporal-object reuses
one cue verbatim on a second object so both share a deduplicated statement
node and grounding is decided purely by edge recency.

Every spec also carries 12 filler scripts about other objects so retrieval
and raw-interaction sampling face noise. Cue values come from pools of
globally unique words: candidate score inheritance keys on fact-value
tokens, so value words must never collide across objects by accident.
The generator re-checks each construction's encoder margins (dedup above
or below threshold, gold statement inside the top-k, gold score strictly
ahead) and refuses to emit a spec that would not behave as labeled.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass

from .agent import GroundingDecision, _sweep_room
from .encoder import EncoderConfig, DEFAULT_ENCODER, cosine, encode
from .errors import GenerationError, ParseError, RejectedInput
from .distiller import render_statement
from .graph import THETA_DEDUP
from .retrieval import DEFAULT_K
from .world import HEADINGS, VISIBILITY_RANGE_M, SceneGraph, World, gen_world

FORMAT_VERSION = 1
KINDS = (
    "compositional-single",
    "compositional-joint",
    "distractor",
    "temporal-context",
    "temporal-object",
)
FILLER_COUNT = 12
DEFAULT_N_ROOMS = 6

_CATEGORY_POOL = (
    "mug",
    "backpack",
    "shoes",
    "vase",
    "lamp",
    "bottle",
    "pillow",
    "notebook",
    "headphones",
    "jacket",
    "umbrella",
    "keys",
    "watch",
)
_KEY_POOL = (
    "trip to-go",
    "morning routine",
    "office setup",
    "gym kit",
    "travel kit",
    "reading nook",
    "coffee ritual",
    "weekend hike",
    "desk drawer",
    "guest visits",
    "picnic set",
    "night stand",
    "garden work",
    "school run",
    "art corner",
    "music den",
)
_VALUE_POOL = (
    "cobalt",
    "maroon",
    "saffron",
    "indigo",
    "crimson",
    "turquoise",
    "lavender",
    "charcoal",
    "emerald",
    "amber",
    "scarlet",
    "violet",
    "magenta",
    "olive",
    "teal",
    "burgundy",
    "periwinkle",
    "mustard",
    "coral",
    "aquamarine",
    "tangerine",
    "chartreuse",
    "cerulean",
    "sienna",
    "ochre",
    "fuchsia",
    "viridian",
    "umber",
    "garnet",
    "topaz",
    "onyx",
    "jasper",
)


@dataclass
class AcquisitionScript:
    instruction: str
    facts: list[tuple[str, str]]
    target_object_id: str
    timestamp: int
    object_position: tuple[float, float]
    agent_start: tuple[float, float]
    agent_heading: int


@dataclass
class ScenarioSpec:
    scenario_id: str
    kind: str
    world_seed: int
    world_n_rooms: int
    world_objects: list[tuple[str, int]]
    scripts: list[AcquisitionScript]
    eval_instruction: str
    gold_object_id: str
    filler_count: int
    eval_gold_position: tuple[float, float]
    eval_agent_start: tuple[float, float]
    eval_agent_heading: int


def _acq_instruction(category: str, object_id: str, key: str, value: str) -> str:
    return f"take note of this {category} {object_id} for {key} = {value}"


def _eval_instruction(values: list[str], category: str) -> str:
    return f"find my {' '.join(values)} {category}"


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _hidden_from_hallway(world: World, pos: tuple[float, float]) -> bool:
    """True when no hallway cell within view range has line of sight to pos.

    Passing traffic on the corridor spine is what turns searches into lucky
    glimpses; doorway cones from adjacent rooms only matter once a room is
    being searched anyway.
    """
    cx, cy = world.cell_of(pos)
    reach = int(math.ceil(VISIBILITY_RANGE_M / world.resolution))
    height, width = world.grid.shape
    for iy in range(max(0, cy - reach), min(height, cy + reach + 1)):
        for ix in range(max(0, cx - reach), min(width, cx + reach + 1)):
            center = world.cell_center((ix, iy))
            if _dist(center, pos) > VISIBILITY_RANGE_M:
                continue
            if world.room_of(center) != "hallway":
                continue
            if world.line_of_sight(center, pos):
                return False
    return True


def _pick_cell(
    rng: random.Random,
    world: World,
    room: str,
    *,
    margin: int = 3,
    keep_clear: list[tuple[float, float]] = (),
    min_clear: float = 1.0,
    far_from: list[tuple[float, float]] = (),
    min_far: float = 2.5,
    hidden: bool = False,
) -> tuple[float, float]:
    candidates = []
    for cell in world.room_cells(room, margin=margin):
        pos = world.cell_center(cell)
        if any(_dist(pos, p) < min_clear for p in keep_clear):
            continue
        if any(_dist(pos, p) < min_far for p in far_from):
            continue
        candidates.append(pos)
    if not candidates:
        raise GenerationError(f"no placement cell satisfies the clearances in room {room!r}")
    if not hidden:
        return rng.choice(sorted(candidates))
    # sightline hiding is costly to test, so probe a seeded shuffle lazily
    for pos in rng.sample(sorted(candidates), len(candidates)):
        if _hidden_from_hallway(world, pos):
            return pos
    raise GenerationError(f"no placement cell in room {room!r} is hidden from hallway sightlines")


def _pick_start(
    rng: random.Random, world: World, rooms: list[str] | None = None, avoid: list[tuple[float, float]] = ()
) -> tuple[tuple[float, float], int]:
    room = rng.choice(sorted(rooms) if rooms else sorted(world.room_names))
    candidates = [world.cell_center(c) for c in world.room_cells(room, margin=1)]
    candidates = sorted(p for p in candidates if all(_dist(p, a) > 1e-9 for a in avoid))
    if not candidates:
        raise GenerationError(f"no free start cell left in room {room!r}")
    return rng.choice(candidates), rng.choice(HEADINGS)


def _sweep_path_m(
    world: World,
    scene: SceneGraph,
    pos: tuple[float, float],
    current: str,
    visited: set[str],
    goal_room: str,
) -> float:
    """Meters a nearest-first sweep walks before reaching goal_room's waypoint."""
    probe = GroundingDecision("", "", None, "", "none")
    total = 0.0
    for _ in range(len(scene.rooms) + 1):
        room = _sweep_room(scene, probe, visited, current)
        waypoint = scene.waypoints[room]
        total += world.shortest_path_length(pos, waypoint)
        visited.add(room)
        pos, current = waypoint, room
        if room == goal_room:
            return total
    return math.inf


def _joint_rooms(world: World, scene: SceneGraph, base_room: str, margin_m: float = 3.0) -> list[tuple[str, str]]:
    """Rank (gold's eval room, agent start room) pairs by how far the
    remembered-room shortcut beats a nearest-first sweep; keep clear winners."""
    neighbors = sorted(r for r in scene.neighbors(base_room) if r != "hallway")
    if not neighbors:
        raise GenerationError(f"room {base_room!r} has no non-hallway neighbor to relocate the target into")
    ranked = []
    for eval_room in neighbors:
        for start_room in scene.rooms:
            if start_room in ("hallway", base_room, eval_room):
                continue
            start = scene.waypoints[start_room]
            sweep = _sweep_path_m(world, scene, start, start_room, {start_room}, eval_room)
            prior = world.shortest_path_length(start, scene.waypoints[base_room]) + _sweep_path_m(
                world, scene, scene.waypoints[base_room], base_room, {start_room, base_room}, eval_room
            )
            ranked.append((-(sweep - prior), eval_room, start_room))
    ranked.sort()
    pairs = [(e, s) for neg_gap, e, s in ranked if -neg_gap >= margin_m]
    if not pairs:
        raise GenerationError(
            f"no start/eval room pair gives the prior-room shortcut a {margin_m:.1f} m head start "
            f"(best {-ranked[0][0]:.2f} m)"
        )
    return pairs


# -- construction guards -------------------------------------------------------


def _sim(a: str, b: str, config: EncoderConfig) -> float:
    return cosine(encode(a, config), encode(b, config))


def _check_dedup(a: str, b: str, want_shared: bool, config: EncoderConfig, what: str) -> None:
    sim = _sim(a, b, config)
    if want_shared and sim < THETA_DEDUP:
        raise GenerationError(f"{what}: statements must collapse into one node but cosine {sim:.4f} < {THETA_DEDUP}")
    if not want_shared and sim >= THETA_DEDUP:
        raise GenerationError(f"{what}: statements must stay distinct but cosine {sim:.4f} >= {THETA_DEDUP}")


def _dedup_nodes(statements: list[str], config: EncoderConfig) -> list[str]:
    # mirrors graph ingestion: a statement near an existing node reuses it
    nodes: list[str] = []
    for text in statements:
        if all(_sim(text, existing, config) < THETA_DEDUP for existing in nodes):
            nodes.append(text)
    return nodes


def _check_retrievable(
    instruction: str, gold_texts: list[str], node_texts: list[str], config: EncoderConfig, what: str, k: int = DEFAULT_K
) -> None:
    ranked = sorted(node_texts, key=lambda t: (-_sim(instruction, t, config), t))
    if not any(text in ranked[:k] for text in gold_texts):
        raise GenerationError(f"{what}: no gold statement inside the top-{k} retrieval set")


def _check_margin(instruction: str, gold_score: float, rivals: dict[str, float], what: str) -> None:
    for rival, score in rivals.items():
        if gold_score <= score:
            raise GenerationError(
                f"{what}: gold score {gold_score:.4f} does not beat {rival!r} at {score:.4f} for {instruction!r}"
            )


# -- generation ----------------------------------------------------------------


def gen_scenarios(
    seed: int,
    kind: str,
    n: int,
    *,
    n_rooms: int = DEFAULT_N_ROOMS,
    filler_count: int = FILLER_COUNT,
    encoder_config: EncoderConfig = DEFAULT_ENCODER,
) -> list[ScenarioSpec]:
    """Deterministic suite of n specs of one kind, all sharing a world chassis."""
    if kind not in KINDS:
        raise RejectedInput(f"unknown scenario kind {kind!r}; expected one of {', '.join(KINDS)}")
    if n < 1:
        raise RejectedInput(f"n must be >= 1, got {n}")
    if not 0 <= filler_count <= len(_KEY_POOL) - 2:
        raise RejectedInput(f"filler_count must be in [0, {len(_KEY_POOL) - 2}]")
    suite_rng = random.Random(f"{seed}:{kind}:suite")
    categories = list(_CATEGORY_POOL)
    main_category = categories.pop(suite_rng.randrange(len(categories)))
    instances = {
        "compositional-single": 1,
        "temporal-context": 1,
        "temporal-object": 2,
        "compositional-joint": 3,
        "distractor": 3,
    }[kind]
    world_objects = [(main_category, instances)] + [(c, 1) for c in categories[:filler_count]]
    world = gen_world(seed, n_rooms, world_objects)
    scene = world.build_scene_graph()
    specs = []
    for i in range(n):
        rng = random.Random(f"{seed}:{kind}:{i}")
        spec = _gen_one(
            rng, f"{kind}-s{seed}-{i:03d}", kind, seed, n_rooms, world_objects, world, scene,
            main_category, categories[:filler_count], filler_count, encoder_config,
        )
        specs.append(spec)
    return specs


def _gen_one(
    rng: random.Random,
    scenario_id: str,
    kind: str,
    world_seed: int,
    n_rooms: int,
    world_objects: list[tuple[str, int]],
    world: World,
    scene,
    main_category: str,
    filler_categories: list[str],
    filler_count: int,
    config: EncoderConfig,
) -> ScenarioSpec:
    main_ids = sorted(o.object_id for o in world.objects.values() if o.category == main_category)
    keys = rng.sample(_KEY_POOL, filler_count + 2)
    filler_keys, spare_keys = keys[:filler_count], keys[filler_count:]
    words = rng.sample(_VALUE_POOL, filler_count + 5)
    filler_values, spare_values = words[:filler_count], words[filler_count:]

    scripts: list[AcquisitionScript] = []
    used_starts: list[tuple[float, float]] = []

    def add_script(target_id: str, key: str, value: str, timestamp: int, position=None) -> None:
        obj = world.objects[target_id]
        start, heading = _pick_start(rng, world, avoid=used_starts)
        used_starts.append(start)
        scripts.append(
            AcquisitionScript(
                _acq_instruction(obj.category, target_id, key, value),
                [(key, value)],
                target_id,
                timestamp,
                position if position is not None else obj.position,
                start,
                heading,
            )
        )

    for j, category in enumerate(filler_categories):
        add_script(f"{category}_01", filler_keys[j], filler_values[j], j + 1)
    t = filler_count + 1

    filler_statements = [
        render_statement(filler_keys[j], filler_values[j], category, f"{category}_01")
        for j, category in enumerate(filler_categories)
    ]
    base_positions = [o.position for o in world.objects.values()]

    if kind == "compositional-single":
        gold = main_ids[0]
        key, value = spare_keys[0], spare_values[0]
        add_script(gold, key, value, t)
        eval_instruction = _eval_instruction([value], main_category)
        gold_texts = [render_statement(key, value, main_category, gold)]
        statements = filler_statements + gold_texts
        rival_scores = {text: _sim(eval_instruction, text, config) for text in filler_statements}
        _check_margin(eval_instruction, _sim(eval_instruction, gold_texts[0], config), rival_scores, scenario_id)
        eval_room = world.room_of(world.objects[gold].position)

    elif kind == "compositional-joint":
        shuffled = rng.sample(main_ids, 3)
        # gold must admit a relocation room whose prior shortcut beats the sweep
        # AND a placement cell hidden from the hallway; try instances in drawn order
        joint_placement = None
        for candidate in shuffled:
            base = world.room_of(world.objects[candidate].position)
            try:
                pairs = _joint_rooms(world, scene, base)
            except GenerationError:
                continue
            rivals = [world.objects[o].position for o in main_ids if o != candidate]
            for room_pair in pairs:
                try:
                    pos = _pick_cell(
                        rng, world, room_pair[0],
                        keep_clear=base_positions, min_clear=1.0,
                        far_from=rivals, min_far=2.5, hidden=True,
                    )
                except GenerationError:
                    continue
                joint_placement = (candidate, base, room_pair[0], room_pair[1], pos)
                break
            if joint_placement:
                break
        if joint_placement is None:
            raise GenerationError(f"{scenario_id}: no instance admits a hidden prior-shortcut placement")
        gold = joint_placement[0]
        decoy_a, decoy_b = [o for o in shuffled if o != gold]
        (k1, v1), (k2, v2) = (spare_keys[0], spare_values[0]), (spare_keys[1], spare_values[1])
        add_script(gold, k1, v1, t)
        add_script(gold, k2, v2, t + 1)
        add_script(decoy_a, k1, v1, t + 2)  # dedups into gold's first statement, newer edge
        add_script(decoy_b, k2, v2, t + 3)
        eval_instruction = _eval_instruction([v1, v2], main_category)
        s1 = render_statement(k1, v1, main_category, gold)
        s2 = render_statement(k2, v2, main_category, gold)
        _check_dedup(s1, render_statement(k1, v1, main_category, decoy_a), True, config, scenario_id)
        _check_dedup(s2, render_statement(k2, v2, main_category, decoy_b), True, config, scenario_id)
        _check_dedup(s1, s2, False, config, scenario_id)
        c1, c2 = _sim(eval_instruction, s1, config), _sim(eval_instruction, s2, config)
        if min(c1, c2) <= 0:
            raise GenerationError(f"{scenario_id}: joint cue halves must both score positively ({c1:.4f}, {c2:.4f})")
        gold_texts = [s1, s2]
        statements = filler_statements + gold_texts
        rival_scores = {text: _sim(eval_instruction, text, config) for text in filler_statements}
        rival_scores[f"decoy {decoy_a}"] = c1
        rival_scores[f"decoy {decoy_b}"] = c2
        _check_margin(eval_instruction, c1 + c2, rival_scores, scenario_id)

    elif kind == "distractor":
        shuffled = rng.sample(main_ids, 3)
        gold = shuffled[0]  # uniform over instances, independent of geometry
        key, value = spare_keys[0], spare_values[0]
        add_script(gold, key, value, t)
        for off, other in enumerate(shuffled[1:]):
            add_script(other, spare_keys[1], spare_values[1 + off], t + 1 + off)
        eval_instruction = _eval_instruction([value], main_category)
        gold_texts = [render_statement(key, value, main_category, gold)]
        other_texts = {
            other: render_statement(spare_keys[1], spare_values[1 + off], main_category, other)
            for off, other in enumerate(shuffled[1:])
        }
        statements = filler_statements + gold_texts + sorted(other_texts.values())
        rival_scores = {text: _sim(eval_instruction, text, config) for text in filler_statements}
        for other, text in other_texts.items():
            _check_dedup(gold_texts[0], text, False, config, scenario_id)
            rival_scores[text] = _sim(eval_instruction, text, config)
        _check_margin(eval_instruction, _sim(eval_instruction, gold_texts[0], config), rival_scores, scenario_id)
        eval_room = world.room_of(world.objects[gold].position)

    elif kind == "temporal-context":
        gold = main_ids[0]
        key = spare_keys[0]
        old_value = f"{spare_values[0]} {spare_values[1]}"
        new_value = f"{spare_values[2]} {spare_values[3]}"
        add_script(gold, key, old_value, t)
        second_position = _pick_cell(
            rng, world, world.room_of(world.objects[gold].position),
            keep_clear=base_positions, min_clear=1.0,
        )
        add_script(gold, key, new_value, t + 1, position=second_position)
        eval_instruction = _eval_instruction([new_value], main_category)
        old_text = render_statement(key, old_value, main_category, gold)
        new_text = render_statement(key, new_value, main_category, gold)
        _check_dedup(old_text, new_text, False, config, scenario_id)  # supersession must fire
        gold_texts = [new_text]
        statements = filler_statements + gold_texts  # old node exists but is inactive
        rival_scores = {text: _sim(eval_instruction, text, config) for text in filler_statements}
        _check_margin(eval_instruction, _sim(eval_instruction, new_text, config), rival_scores, scenario_id)
        eval_room = world.room_of(world.objects[gold].position)

    else:  # temporal-object
        first, second = rng.sample(main_ids, 2)
        gold = second  # the cue's latest assignment
        key, value = spare_keys[0], spare_values[0]
        add_script(first, key, value, t)
        add_script(second, key, value, t + 1)
        eval_instruction = _eval_instruction([value], main_category)
        first_text = render_statement(key, value, main_category, first)
        _check_dedup(first_text, render_statement(key, value, main_category, second), True, config, scenario_id)
        gold_texts = [first_text]  # shared node keeps the first ingested text
        statements = filler_statements + gold_texts
        rival_scores = {text: _sim(eval_instruction, text, config) for text in filler_statements}
        _check_margin(eval_instruction, _sim(eval_instruction, first_text, config), rival_scores, scenario_id)
        eval_room = world.room_of(world.objects[gold].position)

    node_texts = _dedup_nodes(statements, config)
    _check_retrievable(eval_instruction, gold_texts, node_texts, config, scenario_id)

    same_category = [
        o.position for o in world.objects.values() if o.category == main_category and o.object_id != gold
    ]
    if kind == "compositional-joint":
        # the ablation shortcut: gold is re-homed next door to where acquisition
        # found it, the start room is picked so the remembered room saves real
        # distance over a sweep, and the object is hidden from hallway sightlines
        # so neither mode can luck into an early glimpse
        _, base_room, eval_room, start_room, eval_gold_position = joint_placement
        eval_start, eval_heading = _pick_start(rng, world, rooms=[start_room], avoid=used_starts)
        gap = _sweep_path_m(world, scene, eval_start, start_room, {start_room}, eval_room) - (
            world.shortest_path_length(eval_start, scene.waypoints[base_room])
            + _sweep_path_m(world, scene, scene.waypoints[base_room], base_room, {start_room, base_room}, eval_room)
        )
        if gap <= 0:
            raise GenerationError(f"{scenario_id}: prior-room shortcut saves no distance (gap {gap:.2f} m)")
    else:
        eval_gold_position = _pick_cell(
            rng, world, eval_room,
            keep_clear=base_positions, min_clear=1.0,
            far_from=same_category, min_far=2.5,
        )
        eval_start, eval_heading = _pick_start(rng, world, avoid=used_starts)

    return ScenarioSpec(
        scenario_id=scenario_id,
        kind=kind,
        world_seed=world_seed,
        world_n_rooms=n_rooms,
        world_objects=list(world_objects),
        scripts=scripts,
        eval_instruction=eval_instruction,
        gold_object_id=gold,
        filler_count=filler_count,
        eval_gold_position=eval_gold_position,
        eval_agent_start=eval_start,
        eval_agent_heading=eval_heading,
    )


# -- persistence -----------------------------------------------------------------


def spec_to_json(spec: ScenarioSpec) -> dict:
    return {
        "scenario_id": spec.scenario_id,
        "kind": spec.kind,
        "world_seed": spec.world_seed,
        "world_n_rooms": spec.world_n_rooms,
        "world_objects": [list(row) for row in spec.world_objects],
        "scripts": [
            {
                "instruction": s.instruction,
                "facts": [list(f) for f in s.facts],
                "target_object_id": s.target_object_id,
                "timestamp": s.timestamp,
                "object_position": list(s.object_position),
                "agent_start": list(s.agent_start),
                "agent_heading": s.agent_heading,
            }
            for s in spec.scripts
        ],
        "eval_instruction": spec.eval_instruction,
        "gold_object_id": spec.gold_object_id,
        "filler_count": spec.filler_count,
        "eval_gold_position": list(spec.eval_gold_position),
        "eval_agent_start": list(spec.eval_agent_start),
        "eval_agent_heading": spec.eval_agent_heading,
    }


def spec_from_json(doc: dict) -> ScenarioSpec:
    try:
        return ScenarioSpec(
            scenario_id=doc["scenario_id"],
            kind=doc["kind"],
            world_seed=int(doc["world_seed"]),
            world_n_rooms=int(doc["world_n_rooms"]),
            world_objects=[(str(c), int(k)) for c, k in doc["world_objects"]],
            scripts=[
                AcquisitionScript(
                    instruction=s["instruction"],
                    facts=[(str(k), str(v)) for k, v in s["facts"]],
                    target_object_id=s["target_object_id"],
                    timestamp=int(s["timestamp"]),
                    object_position=(float(s["object_position"][0]), float(s["object_position"][1])),
                    agent_start=(float(s["agent_start"][0]), float(s["agent_start"][1])),
                    agent_heading=int(s["agent_heading"]),
                )
                for s in doc["scripts"]
            ],
            eval_instruction=doc["eval_instruction"],
            gold_object_id=doc["gold_object_id"],
            filler_count=int(doc["filler_count"]),
            eval_gold_position=(float(doc["eval_gold_position"][0]), float(doc["eval_gold_position"][1])),
            eval_agent_start=(float(doc["eval_agent_start"][0]), float(doc["eval_agent_start"][1])),
            eval_agent_heading=int(doc["eval_agent_heading"]),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"malformed scenario spec: {exc}") from exc


def save_specs(specs: list[ScenarioSpec], path: str) -> None:
    from .fileio import dump_json

    dump_json(path, {"format_version": FORMAT_VERSION, "specs": [spec_to_json(s) for s in specs]})


def load_specs(path: str) -> list[ScenarioSpec]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise ParseError("unsupported or missing scenario format_version")
    return [spec_from_json(row) for row in doc.get("specs", [])]
