"""Acceptance gate: eight binding guarantees over the full pipeline.

Each test prints one uncaptured verdict line (``acceptance [i/8] PASS/FAIL``)
with the measured numbers next to the required thresholds, then asserts.
Suites are expensive to build, so they are memoized module-wide and shared
between criteria; every criterion still works when run alone.
"""

import filecmp
import os
import random
import time

import numpy as np

from polar.cli import main as cli_main
from polar.distiller import memorize
from polar.evaluation import acquire, evaluate, group_by_scenario, memorize_suite, spl_term
from polar.graph import EDGE_SEMANTIC, MemoryGraph
from polar.scenarios import gen_scenarios

SEEDS = (0, 1, 2, 3, 4)
N = 50

_CACHE: dict = {}


def _suite(kind: str, seed: int, n: int = N):
    key = ("suite", kind, seed, n)
    if key not in _CACHE:
        specs = gen_scenarios(seed, kind, n)
        episodes = [log for spec in specs for log in acquire(spec)]
        _CACHE[key] = (specs, group_by_scenario(episodes), memorize_suite(episodes))
    return _CACHE[key]


def _report(kind: str, seed: int, mode: str, n: int = N, with_episodes: bool = True):
    key = ("report", kind, seed, mode, n, with_episodes)
    if key not in _CACHE:
        specs, episodes, graphs = _suite(kind, seed, n)
        _CACHE[key] = evaluate(specs, mode, graphs=graphs, episodes=episodes if with_episodes else None)
    return _CACHE[key]


def _verdict(capsys, index: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"acceptance [{index}/8] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values)


def test_criterion_1_single_fact_navigation_is_perfect_and_fast(capsys):
    """Memory-guided navigation solves every single-fact scenario efficiently."""
    t0 = time.perf_counter()
    reports = [_report("compositional-single", seed, "polar") for seed in SEEDS]
    elapsed = time.perf_counter() - t0
    sr = _mean(r.sr for r in reports)
    min_spl = min(r.spl for r in reports)
    ok = all(r.sr == 1.0 for r in reports) and min_spl >= 0.80 and elapsed < 120.0
    _verdict(
        capsys, 1, ok,
        f"compositional-single seeds 0-4 x {N}: SR={sr:.4f} (need 1.00), "
        f"min SPL={min_spl:.4f} (need >=0.80), runtime={elapsed:.1f}s (need <120s)",
    )


def test_criterion_2_semantic_retrieval_beats_dense_raw(capsys):
    """Graph retrieval is perfect on single facts and dominates dense raw retrieval on joint cues."""
    single = [_report("compositional-single", seed, "polar") for seed in SEEDS]
    joint = [_report("compositional-joint", seed, "polar") for seed in SEEDS]
    single_ok = all(r.recall["semantic"] == 1.0 for r in single)
    per_seed_ok = all(r.recall["semantic"] >= r.recall["dense"] for r in joint)
    sem = _mean(r.recall["semantic"] for r in joint)
    dense = _mean(r.recall["dense"] for r in joint)
    ok = single_ok and per_seed_ok and sem > dense
    _verdict(
        capsys, 2, ok,
        f"recall@5 semantic single={_mean(r.recall['semantic'] for r in single):.4f} (need 1.00); "
        f"joint semantic={sem:.4f} vs dense={dense:.4f} "
        f"(need >= per seed: {'yes' if per_seed_ok else 'no'}, and > in aggregate)",
    )


def _latest_assignment(spec) -> str:
    """Independent oracle: the newest script whose fact value matches the cue."""
    category = spec.eval_instruction.rsplit(" ", 1)[-1]
    cue = spec.eval_instruction[len("find my ") : -(len(category) + 1)]
    carriers = [s for s in spec.scripts if any(value == cue for _, value in s.facts)]
    assert carriers, f"no script carries the cue {cue!r}"
    return max(carriers, key=lambda s: s.timestamp).target_object_id


def test_criterion_3_temporal_grounding_tracks_latest_assignment(capsys):
    """Grounding always picks the most recent object the cue was attached to."""
    total = hits = 0
    for kind in ("temporal-object", "temporal-context"):
        for seed in SEEDS:
            specs, _, _ = _suite(kind, seed)
            by_id = {s.scenario_id: s for s in specs}
            report = _report(kind, seed, "polar", with_episodes=False)
            for row in report.rows:
                total += 1
                hits += row["grounded_object_id"] == _latest_assignment(by_id[row["spec_id"]])
    ok = total == 2 * len(SEEDS) * N and hits == total
    _verdict(
        capsys, 3, ok,
        f"temporal-object + temporal-context seeds 0-4 x {N}: "
        f"grounded latest-timestamp assignment {hits}/{total} (need {total}/{total})",
    )


def test_criterion_4_memory_resolves_distractor_instances(capsys):
    """With three same-category instances, memory finds the right one; no-prior mostly cannot."""
    no_prior = _report("distractor", 0, "no-prior", n=60, with_episodes=False)
    polar = _report("distractor", 0, "polar", n=60, with_episodes=False)
    ok = no_prior.sr <= 0.45 and polar.sr == 1.0 and polar.cm < no_prior.cm
    _verdict(
        capsys, 4, ok,
        f"distractor n=60 seed 0: no-prior SR={no_prior.sr:.4f} (need <=0.45), "
        f"polar SR={polar.sr:.4f} (need 1.00), CM {polar.cm:.4f} < {no_prior.cm:.4f}",
    )


def test_criterion_5_spl_matches_brute_force_formula(capsys):
    """The incremental SPL term equals the textbook formula everywhere."""

    def brute_force(success: bool, path_m: float, shortest_m: float) -> float:
        if not success:
            return 0.0
        denom = max(path_m, shortest_m)
        return 1.0 if denom <= 0 else shortest_m / denom

    rng = random.Random(5)
    max_err = 0.0
    for _ in range(100):
        success = rng.random() < 0.7
        path_m = 0.0 if rng.random() < 0.1 else rng.uniform(0.0, 60.0)
        shortest_m = 0.0 if rng.random() < 0.1 else rng.uniform(0.0, 60.0)
        max_err = max(max_err, abs(spl_term(success, path_m, shortest_m) - brute_force(success, path_m, shortest_m)))

    rows = _report("compositional-single", 0, "polar").rows[:100]
    row_err = max(
        abs(row["spl"] - brute_force(bool(row["success"]), row["path_m"], row["shortest_m"]))
        for row in rows
        if row["shortest_m"] is not None
    )
    exact = spl_term(True, 10.0, 8.0)
    ok = max_err <= 1e-9 and row_err <= 1e-9 and exact == 0.8
    _verdict(
        capsys, 5, ok,
        f"SPL vs brute force: max |err|={max_err:.2e} over 100 randomized episodes, "
        f"{row_err:.2e} over {len(rows)} recorded rows (need <=1e-9); "
        f"S=1,p=10,l=8 -> {exact} (need exactly 0.8)",
    )


def test_criterion_6_graph_invariants_survive_randomized_operations(tmp_path, capsys):
    """1,000 randomized mutations never break dedup, supersession, or persistence."""
    rng = random.Random(6)
    vec_rng = np.random.default_rng(6)

    def unit(dim: int = 32) -> np.ndarray:
        v = vec_rng.standard_normal(dim)
        return v / np.linalg.norm(v)

    graph = MemoryGraph()
    categories = ("mug", "vase", "lamp", "chair")
    episodic_order: list[str] = []
    counts = {"object": 0, "semantic": 0, "episodic": 0, "supersede": 0}

    def check_invariants() -> None:
        active = [(e.src, e.dst) for e in graph.edges if e.active]
        assert len(active) == len(set(active)), "duplicate active edge for one pair"
        assert list(graph.episodic)[: len(episodic_order)] == episodic_order, "episodic history rewritten"
        graph._validate_structure()

    for i in range(1000):
        t = i + 1
        roll = rng.random()
        op = "object" if roll < 0.30 or not graph.objects else (
            "semantic" if roll < 0.65 else ("episodic" if roll < 0.85 else "supersede")
        )
        if op == "supersede":
            live = [(e.src, e.dst) for e in graph.edges if e.active and e.kind == EDGE_SEMANTIC]
            spare = sorted(graph.semantic)
            if not live or len(spare) < 2:
                op = "semantic"  # not enough structure to rewire yet; keep the op count exact
        if op == "object":
            if graph.objects and rng.random() < 0.3:
                oid = rng.choice(sorted(graph.objects))
                before = len(graph.objects)
                assert graph.upsert_object(graph.objects[oid].category, object_id=oid, timestamp=t) == oid
                assert len(graph.objects) == before, "upsert of a known id created a node"
            else:
                graph.upsert_object(rng.choice(categories), object_id=f"item_{i:04d}", timestamp=t)
        elif op == "semantic":
            oid = rng.choice(sorted(graph.objects))
            emb = unit()
            sid = graph.add_semantic(oid, f"prop_{i} = value_{i}", emb, t)
            if rng.random() < 0.3:  # dedup idempotence: same statement collapses in place
                before = len(graph.semantic)
                assert graph.add_semantic(oid, f"prop_{i} = value_{i}", emb, t) == sid
                assert len(graph.semantic) == before, "re-adding an identical statement created a node"
        elif op == "episodic":
            oid = rng.choice(sorted(graph.objects))
            success = rng.random() < 0.5
            node_id = graph.add_episodic(
                oid,
                episode_id=f"run:{i:04d}",
                instruction=f"find item {i}",
                success=success,
                room_sequence=["hallway", "den"],
                unpromising_rooms=["hallway"] if not success else [],
                found_room="den" if success else None,
                path_length_m=float(rng.randrange(0, 40)),
                rendered_text=f"episode {i}",
                timestamp=t,
            )
            episodic_order.append(node_id)
        else:  # supersede
            src, old = rng.choice(sorted(live))
            new = rng.choice([s for s in spare if s != old])
            graph.supersede(src, old, new, t)
            assert sum(e.active for e in graph.edges if e.src == src and e.dst == old) == 0
            assert sum(e.active for e in graph.edges if e.src == src and e.dst == new) == 1
        counts[op] += 1
        if t % 100 == 0:
            check_invariants()
    check_invariants()
    assert sum(counts.values()) == 1000

    doc = graph.to_json()
    assert MemoryGraph.from_json(doc).to_json() == doc, "round trip changed the graph"
    first, second = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    graph.save(first)
    MemoryGraph.load(first).save(second)
    files_identical = filecmp.cmp(first, second, shallow=False)

    # re-memorizing a real scenario's episodes must not mint new semantic nodes
    specs, episodes, _ = _suite("compositional-single", 0)
    fresh = MemoryGraph()
    for episode in episodes[specs[0].scenario_id]:
        memorize(episode, fresh)
    once = len(fresh.semantic)
    for episode in episodes[specs[0].scenario_id]:
        memorize(episode, fresh)
    dedup_stable = len(fresh.semantic) == once

    rows = [row for key, value in _CACHE.items() if key[0] == "report" for row in value.rows]
    if not rows:
        rows = _report("compositional-single", 0, "polar").rows
    max_steps = max(row["steps"] for row in rows)

    ok = files_identical and dedup_stable and max_steps <= 700
    _verdict(
        capsys, 6, ok,
        f"1000 randomized ops ({counts['object']} object / {counts['semantic']} semantic / "
        f"{counts['episodic']} episodic / {counts['supersede']} supersede) kept invariants; "
        f"persistence byte-identical={files_identical}; re-memorize kept {once} semantic nodes; "
        f"max steps {max_steps}/{len(rows)} rows (need <=700)",
    )


def test_criterion_7_episodic_memory_shortens_joint_searches(capsys):
    """Attached episode renderings cut the walked path versus retrieval without them."""
    with_memory = [row for seed in SEEDS for row in _report("compositional-joint", seed, "polar").rows]
    without = [
        row
        for seed in SEEDS
        for row in _report("compositional-joint", seed, "polar-instruction-only", with_episodes=False).rows
    ]
    p_memory = _mean(row["path_m"] for row in with_memory)
    p_bare = _mean(row["path_m"] for row in without)
    ok = len(with_memory) == len(without) == len(SEEDS) * N and p_memory < p_bare
    _verdict(
        capsys, 7, ok,
        f"compositional-joint seeds 0-4 x {N}: mean path {p_memory:.2f} m with episodic memory "
        f"< {p_bare:.2f} m instruction-only (need strictly less)",
    )


def test_criterion_8_full_pipeline_is_bitwise_deterministic(tmp_path, capsys):
    """Two identical run-all invocations write byte-identical artifacts."""
    dirs = (str(tmp_path / "runs-a"), str(tmp_path / "runs-b"))
    for out_dir in dirs:
        assert cli_main(["run-all", "--seed", "0", "--out-dir", out_dir]) == 0
    rel_files = sorted(
        os.path.relpath(os.path.join(root, name), dirs[0])
        for root, _, names in os.walk(dirs[0])
        for name in names
    )
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], rel_files, shallow=False)
    ok = bool(rel_files) and "metrics.json" in rel_files and not mismatch and not errors
    _verdict(
        capsys, 8, ok,
        f"run-all --seed 0 twice: {len(match)}/{len(rel_files)} files byte-identical"
        + (f"; differing: {mismatch + errors}" if mismatch or errors else ""),
    )
