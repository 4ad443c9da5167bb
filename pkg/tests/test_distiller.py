import json

import numpy as np
import pytest

from polar.distiller import (
    DistillerConfig,
    EpisodeLog,
    TrajectoryStep,
    distill_semantic,
    episode_from_json,
    episode_to_json,
    load_episodes,
    memorize,
    parse_rendered_summary,
    render_statement,
    save_episodes,
    statement_fact_key,
    statement_fact_value,
    summarize_episodic,
    trajectory_text,
)
from polar.errors import DistillerUnavailable, ParseError, RejectedInput
from polar.graph import MemoryGraph
from polar.world import ACTION_START, MOVE_FORWARD, STOP, TURN_RIGHT


def _step(pos, action, room, heading=0):
    return TrajectoryStep(pos, heading, action, room, [])


def _episode(
    episode_id="ep-1",
    timestamp=1,
    facts=(("color", "crimson"),),
    target="mug_01",
    success=True,
) -> EpisodeLog:
    trajectory = [
        _step((0.5, 0.5), ACTION_START, "hallway"),
        _step((1.5, 0.5), MOVE_FORWARD, "hallway"),
        _step((1.5, 0.5), MOVE_FORWARD, "hallway"),  # blocked: position unchanged
        _step((2.5, 0.5), MOVE_FORWARD, "kitchen"),
        _step((2.5, 0.5), TURN_RIGHT, "kitchen", heading=30),
        _step((2.5, 0.5), STOP, "kitchen", heading=30),
    ]
    return EpisodeLog(
        episode_id=episode_id,
        timestamp=timestamp,
        instruction="take note of this mug",
        facts=list(facts),
        reference_feature=None,
        target_object_id=target,
        target_category="mug",
        trajectory=trajectory,
        success=success,
        final_position=(2.5, 0.5),
    )


def test_statement_template_round_trip():
    text = render_statement("color", "crimson red", "mug", "mug_01")
    assert text == "user: color = crimson red refers to mug mug_01"
    assert statement_fact_key(text) == "color"
    assert statement_fact_value(text) == "crimson red"


def test_statement_parsers_reject_foreign_text():
    assert statement_fact_key("a mug is on the desk") is None
    assert statement_fact_value("user: but no separator") is None


def test_trajectory_text_pairs_room_and_action():
    assert trajectory_text(_episode()) == (
        "hallway START hallway MOVE_FORWARD hallway MOVE_FORWARD "
        "kitchen MOVE_FORWARD kitchen TURN_RIGHT kitchen STOP"
    )


def test_validate_rejects_empty_or_skewed_trajectories():
    ep = _episode()
    ep.trajectory = []
    with pytest.raises(RejectedInput):
        ep.validate()
    ep = _episode()
    ep.trajectory[1].heading = 45  # not a multiple of 30
    with pytest.raises(RejectedInput):
        ep.validate()


def test_distill_semantic_one_statement_per_fact():
    stmts = distill_semantic(_episode(facts=[("color", "red"), ("location", "desk")]))
    assert [s.text for s in stmts] == [
        "user: color = red refers to mug mug_01",
        "user: location = desk refers to mug mug_01",
    ]
    assert [s.source_fact_key for s in stmts] == ["color", "location"]
    assert all(s.supersedes_key == s.source_fact_key for s in stmts)


def test_summarize_episodic_counts_only_effective_forward_moves():
    s = summarize_episodic(_episode())
    assert s.path_length_m == 2.0  # one forward was blocked
    assert s.room_sequence == ["hallway", "kitchen"]
    assert s.found_room == "kitchen"
    assert s.unpromising_rooms == ["hallway"]
    parsed = parse_rendered_summary(s.rendered_text)
    assert parsed == {
        "outcome": "success",
        "searched": "hallway,kitchen",
        "found_in": "kitchen",
        "length": "2.0m",
    }


def test_summarize_failure_has_no_found_room():
    s = summarize_episodic(_episode(success=False))
    assert s.found_room is None
    assert s.unpromising_rooms == ["hallway", "kitchen"]
    assert parse_rendered_summary(s.rendered_text)["found_in"] == "none"


def test_parse_rendered_summary_rejects_foreign_text():
    assert parse_rendered_summary("not a summary") == {}
    assert parse_rendered_summary("outcome=success; searched=a") == {}


def test_memorize_wires_object_statements_and_episode():
    g = MemoryGraph()
    report = memorize(_episode(facts=[("color", "red"), ("location", "desk")]), g)
    assert report.objects_created == 1
    assert report.semantic_created == 2
    assert report.episodic_created == 1
    assert report.supersessions == 0
    assert set(g.objects) == {"mug_01"}
    assert len(g.semantic) == 2 and len(g.episodic) == 1


def test_memorize_same_key_new_value_supersedes():
    g = MemoryGraph()
    memorize(_episode(timestamp=1, facts=[("color", "deep crimson red")]), g)
    report = memorize(_episode(episode_id="ep-2", timestamp=2, facts=[("color", "pale sky blue")]), g)
    assert report.supersessions == 1
    active = g.neighbors("mug_01", kind="semantic")
    assert len(active) == 1
    assert statement_fact_value(g.semantic[active[0][0]].statement) == "pale sky blue"
    stale = [sid for sid, _ in g.neighbors("mug_01", kind="semantic", active_only=False) if sid != active[0][0]]
    assert stale  # the old fact remains as inactive history


def test_memorize_is_idempotent_for_semantics_append_only_for_episodes():
    g = MemoryGraph()
    ep = _episode()
    memorize(ep, g)
    semantic_before, episodic_before = len(g.semantic), len(g.episodic)
    report = memorize(ep, g)
    assert len(g.semantic) == semantic_before
    assert report.semantic_created == 0
    assert len(g.episodic) == episodic_before + 1


def test_memorize_replay_rebuilds_identical_graph():
    episodes = [
        _episode(timestamp=1, facts=[("color", "deep crimson red")]),
        _episode(episode_id="ep-2", timestamp=2, facts=[("color", "pale sky blue")]),
        _episode(episode_id="ep-3", timestamp=3, target="mug_02", facts=[("size", "large")]),
    ]
    a, b = MemoryGraph(), MemoryGraph()
    for ep in episodes:
        memorize(ep, a)
        memorize(ep, b)
    assert json.dumps(a.to_json(), sort_keys=True) == json.dumps(b.to_json(), sort_keys=True)


def test_episode_jsonl_round_trip(tmp_path):
    feat = np.zeros(32)
    feat[3] = 1.0
    eps = [_episode(), _episode(episode_id="ep-2", timestamp=2)]
    eps[0].reference_feature = feat
    path = tmp_path / "episodes.jsonl"
    save_episodes(eps, str(path))
    loaded = load_episodes(str(path))
    assert [episode_to_json(e) for e in loaded] == [episode_to_json(e) for e in eps]


def test_load_episodes_reports_bad_line(tmp_path):
    path = tmp_path / "episodes.jsonl"
    good = json.dumps(episode_to_json(_episode()))
    path.write_text(good + "\n{broken\n")
    with pytest.raises(ParseError):
        load_episodes(str(path))


def test_episode_from_json_rejects_missing_fields():
    doc = episode_to_json(_episode())
    del doc["trajectory"]
    with pytest.raises(ParseError):
        episode_from_json(doc)


def test_distiller_config_validation():
    with pytest.raises(RejectedInput):
        DistillerConfig(mode="oracle")
    with pytest.raises(RejectedInput):
        DistillerConfig(mode="remote")


class _Resp:
    def __init__(self, status_code=200, payload=None):
        self.status_code = status_code
        self._payload = payload

    def json(self):
        if self._payload is None:
            raise ValueError("no json")
        return self._payload


def test_remote_distiller_happy_path(monkeypatch):
    cfg = DistillerConfig(mode="remote", endpoint="http://distill.local/run")
    payload = {
        "statements": [{"text": "user: color = red refers to mug mug_01", "fact_key": "color"}],
        "summary_text": "found in kitchen",
    }
    monkeypatch.setattr("polar.distiller.requests.post", lambda *a, **k: _Resp(payload=payload))
    stmts = distill_semantic(_episode(), cfg)
    assert [(s.text, s.source_fact_key) for s in stmts] == [
        ("user: color = red refers to mug mug_01", "color")
    ]


@pytest.mark.parametrize(
    "resp",
    [
        _Resp(status_code=503, payload={}),
        _Resp(payload=None),
        _Resp(payload={"statements": [{"text": "x"}], "summary_text": "s"}),  # fact_key missing
        _Resp(payload={"summary_text": "s"}),
    ],
)
def test_remote_distiller_bad_responses(monkeypatch, resp):
    cfg = DistillerConfig(mode="remote", endpoint="http://distill.local/run")
    monkeypatch.setattr("polar.distiller.requests.post", lambda *a, **k: resp)
    with pytest.raises(DistillerUnavailable):
        distill_semantic(_episode(), cfg)
