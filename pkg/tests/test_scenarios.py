import json

import pytest

from polar.errors import ParseError, RejectedInput
from polar.scenarios import (
    FILLER_COUNT,
    KINDS,
    ScenarioSpec,
    _hidden_from_hallway,
    gen_scenarios,
    load_specs,
    save_specs,
    spec_from_json,
    spec_to_json,
)
from polar.world import gen_world


@pytest.fixture(scope="module")
def one_of_each():
    return {kind: gen_scenarios(0, kind, 2) for kind in KINDS}


def test_gen_scenarios_validation():
    with pytest.raises(RejectedInput):
        gen_scenarios(0, "impossible-kind", 1)
    with pytest.raises(RejectedInput):
        gen_scenarios(0, "distractor", 0)


def test_gen_scenarios_deterministic():
    a = gen_scenarios(3, "compositional-single", 3)
    b = gen_scenarios(3, "compositional-single", 3)
    assert [spec_to_json(s) for s in a] == [spec_to_json(s) for s in b]


def test_suite_shares_world_chassis(one_of_each):
    for kind, specs in one_of_each.items():
        assert len(specs) == 2
        chassis = {(s.world_seed, s.world_n_rooms, tuple(s.world_objects)) for s in specs}
        assert len(chassis) == 1
        assert [s.scenario_id for s in specs] == [f"{kind}-s0-000", f"{kind}-s0-001"]


def test_scripts_cover_fillers_then_kind(one_of_each):
    extra_scripts = {
        "compositional-single": 1,
        "temporal-context": 2,  # the same key restated with a newer value
        "temporal-object": 2,
        "compositional-joint": 4,  # 2 scripts on gold + 1 each on two decoys
        "distractor": 3,
    }
    for kind, specs in one_of_each.items():
        for spec in specs:
            assert spec.filler_count == FILLER_COUNT
            assert len(spec.scripts) == FILLER_COUNT + extra_scripts[kind]
            stamps = [s.timestamp for s in spec.scripts]
            assert stamps == sorted(stamps) and len(set(stamps)) == len(stamps)
            assert spec.gold_object_id in {s.target_object_id for s in spec.scripts}


def test_gold_position_differs_from_acquisition(one_of_each):
    for specs in one_of_each.values():
        for spec in specs:
            world = gen_world(spec.world_seed, spec.world_n_rooms, list(spec.world_objects))
            assert world.is_free(spec.eval_gold_position)
            assert world.is_free(spec.eval_agent_start)
            assert spec.eval_agent_heading % 30 == 0


def test_temporal_object_gold_is_latest_assignment(one_of_each):
    for spec in one_of_each["temporal-object"]:
        cue_key, cue_value = spec.scripts[-1].facts[0]
        carriers = [s for s in spec.scripts if (cue_key, cue_value) in s.facts]
        assert len(carriers) == 2  # same cue assigned twice
        assert spec.gold_object_id == max(carriers, key=lambda s: s.timestamp).target_object_id
        assert carriers[0].target_object_id != carriers[1].target_object_id


def test_temporal_context_restates_same_key(one_of_each):
    for spec in one_of_each["temporal-context"]:
        gold_scripts = [s for s in spec.scripts if s.target_object_id == spec.gold_object_id]
        assert len(gold_scripts) == 2
        (k1, v1), (k2, v2) = gold_scripts[0].facts[0], gold_scripts[1].facts[0]
        assert k1 == k2 and v1 != v2
        assert v2 in spec.eval_instruction  # the newer value is the cue


def test_distractor_has_three_same_category_instances(one_of_each):
    for spec in one_of_each["distractor"]:
        category = dict((c, n) for c, n in spec.world_objects)
        gold_cat = spec.gold_object_id.rsplit("_", 1)[0]
        assert category[gold_cat] == 3


def test_joint_gold_relocates_to_neighbor_of_found_room(one_of_each):
    for spec in one_of_each["compositional-joint"]:
        world = gen_world(spec.world_seed, spec.world_n_rooms, list(spec.world_objects))
        scene = world.build_scene_graph()
        gold_scripts = [s for s in spec.scripts if s.target_object_id == spec.gold_object_id]
        base_room = world.room_of(gold_scripts[-1].object_position)
        eval_room = world.room_of(spec.eval_gold_position)
        assert eval_room != base_room
        assert eval_room in scene.neighbors(base_room)
        assert eval_room != "hallway"


def test_joint_gold_is_hidden_from_hallway(one_of_each):
    for spec in one_of_each["compositional-joint"]:
        world = gen_world(spec.world_seed, spec.world_n_rooms, list(spec.world_objects))
        assert _hidden_from_hallway(world, spec.eval_gold_position)


def test_hidden_from_hallway_rejects_corridor_cells():
    world = gen_world(0, 6, [])
    hallway_wp = world.build_scene_graph().waypoints["hallway"]
    assert not _hidden_from_hallway(world, hallway_wp)


def test_eval_instruction_names_category(one_of_each):
    for specs in one_of_each.values():
        for spec in specs:
            category = spec.gold_object_id.rsplit("_", 1)[0]
            assert spec.eval_instruction.startswith("find my ")
            assert spec.eval_instruction.endswith(f" {category}")


def test_eval_start_never_reuses_an_acquisition_start(one_of_each):
    # every spawn cell is drawn while avoiding the earlier ones
    for specs in one_of_each.values():
        for spec in specs:
            starts = [s.agent_start for s in spec.scripts] + [spec.eval_agent_start]
            assert len(set(starts)) == len(starts)


def test_spec_round_trip(tmp_path, one_of_each):
    specs = [s for group in one_of_each.values() for s in group]
    path = tmp_path / "specs.json"
    save_specs(specs, str(path))
    loaded = load_specs(str(path))
    assert [spec_to_json(s) for s in loaded] == [spec_to_json(s) for s in specs]


def test_load_specs_rejects_bad_documents(tmp_path):
    path = tmp_path / "specs.json"
    path.write_text(json.dumps({"format_version": 9, "specs": []}))
    with pytest.raises(ParseError):
        load_specs(str(path))
    path.write_text("{oops")
    with pytest.raises(ParseError):
        load_specs(str(path))


def test_spec_from_json_rejects_missing_fields(one_of_each):
    doc = spec_to_json(one_of_each["distractor"][0])
    del doc["scripts"]
    with pytest.raises(ParseError):
        spec_from_json(doc)
