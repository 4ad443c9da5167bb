"""Acquisition, memorization, baseline execution, and metrics.

Each scenario is an isolated little universe: its acquisition episodes are
memorized into their own graph (object ids repeat across scenarios, so a
shared graph would cross-contaminate facts). The evaluation stage rebuilds
the scenario's world, relocates the gold object to its evaluation position,
and runs one episode per spec under the requested context mode:

- no-prior: only the instruction and the world's category vocabulary;
- raw-interaction: a seeded sample of 15 raw episode logs that always
  contains every gold episode, grounded by lexical overlap;
- polar: top-k semantic retrieval expanded into candidates, full episodic
  renderings attached;
- polar-instruction-only / polar-raw-trajectory / polar-summary: the same
  retrieval with the candidates' episodic context swapped for the ablated
  trajectory representation.

Metrics: SR (ending within the success radius of gold), SPL
(1/N · Σ S·l/max(p,l), where p counts forward meters), CM (ending at a
same-category non-gold instance instead), and recall@k for the semantic,
BM25, and dense retrievers. For multi-episode gold sets the raw recalls
are the fraction of gold episodes retrieved.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from .agent import GroundingDecision, NaiveMatcher, NoPriorContext, OraclePlanner, RunConfig, run_episode
from .distiller import EpisodeLog, memorize, summarize_episodic, trajectory_text
from .encoder import EncoderConfig, DEFAULT_ENCODER
from .errors import ConfigurationError, ParseError, RejectedInput
from .graph import MemoryGraph, THETA_DEDUP, THETA_OBJ
from .retrieval import RetrievalResult, raw_retrieve, recall_at_k, retrieve
from .scenarios import ScenarioSpec
from .world import AgentState, World, gen_world

FORMAT_VERSION = 1
MODES = (
    "no-prior",
    "raw-interaction",
    "polar",
    "polar-instruction-only",
    "polar-raw-trajectory",
    "polar-summary",
)
RAW_SAMPLE_SIZE = 15

_WORLD_CACHE: dict[tuple, World] = {}


def world_for_spec(spec: ScenarioSpec) -> World:
    key = (spec.world_seed, spec.world_n_rooms, tuple(spec.world_objects))
    world = _WORLD_CACHE.get(key)
    if world is None:
        if len(_WORLD_CACHE) >= 16:
            _WORLD_CACHE.clear()
        world = gen_world(spec.world_seed, spec.world_n_rooms, list(spec.world_objects))
        _WORLD_CACHE[key] = world
    return world


# -- acquisition + memorization ---------------------------------------------------


def acquire(spec: ScenarioSpec, config: RunConfig | None = None) -> list[EpisodeLog]:
    """Execute every acquisition script with explicit grounding; logs feed memorization."""
    config = config or RunConfig()
    world = world_for_spec(spec)
    logs = []
    for idx, script in enumerate(sorted(spec.scripts, key=lambda s: (s.timestamp, s.target_object_id))):
        staged = world
        obj = world.objects[script.target_object_id]
        if script.object_position != obj.position:
            staged = world.move_object(script.target_object_id, script.object_position)
        decision = GroundingDecision(
            script.target_object_id, obj.category, None, "acquisition: target given explicitly", "polar"
        )
        log, _ = run_episode(
            staged,
            script.instruction,
            None,
            OraclePlanner(),
            config,
            gold_object_id=script.target_object_id,
            start=AgentState(script.agent_start, script.agent_heading),
            episode_id=f"{spec.scenario_id}:acq:{idx:02d}",
            timestamp=script.timestamp,
            facts=script.facts,
            reference_feature=obj.feature,
            decision=decision,
        )
        logs.append(log)
    return logs


def group_by_scenario(episodes: list[EpisodeLog]) -> dict[str, list[EpisodeLog]]:
    groups: dict[str, list[EpisodeLog]] = {}
    for episode in episodes:
        scenario_id = episode.episode_id.split(":", 1)[0]
        groups.setdefault(scenario_id, []).append(episode)
    return groups


def memorize_suite(
    episodes: list[EpisodeLog],
    *,
    theta_dedup: float = THETA_DEDUP,
    theta_obj: float = THETA_OBJ,
    encoder_config: EncoderConfig = DEFAULT_ENCODER,
) -> dict[str, MemoryGraph]:
    """One isolated graph per scenario, episodes ingested in timestamp order."""
    graphs = {}
    for scenario_id, group in sorted(group_by_scenario(episodes).items()):
        graph = MemoryGraph(theta_dedup=theta_dedup, theta_obj=theta_obj)
        for episode in sorted(group, key=lambda e: (e.timestamp, e.episode_id)):
            memorize(episode, graph, encoder_config=encoder_config)
        graphs[scenario_id] = graph
    return graphs


def save_graphs(graphs: dict[str, MemoryGraph], path: str) -> None:
    from .fileio import dump_json

    dump_json(path, {"format_version": FORMAT_VERSION, "graphs": {k: g.to_json() for k, g in sorted(graphs.items())}})


def load_graphs(path: str) -> dict[str, MemoryGraph]:
    import json

    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise ParseError("unsupported or missing graph bundle format_version")
    return {k: MemoryGraph.from_json(g) for k, g in doc.get("graphs", {}).items()}


# -- evaluation contexts ----------------------------------------------------------


def _raw_sample(spec: ScenarioSpec, logs: list[EpisodeLog], seed: int) -> list[EpisodeLog]:
    """Seeded 15-episode sample that always contains every gold episode."""
    rng = random.Random(f"{seed}:{spec.scenario_id}:raw")
    gold = [e for e in logs if e.target_object_id == spec.gold_object_id]
    others = sorted(
        (e for e in logs if e.target_object_id != spec.gold_object_id), key=lambda e: e.episode_id
    )
    take = min(max(RAW_SAMPLE_SIZE - len(gold), 0), len(others))
    sample = gold + rng.sample(others, take)
    return sorted(sample, key=lambda e: (e.timestamp, e.episode_id))


def _summary_digest(node) -> str:
    rooms = ", ".join(node.room_sequence)
    if node.success and node.found_room:
        return f"found it in {node.found_room} after searching {rooms}"
    return f"failed after searching {rooms}"


def _ablated_result(result: RetrievalResult, mode: str, graph: MemoryGraph, logs: list[EpisodeLog] | None) -> RetrievalResult:
    if mode == "polar":
        return result
    logs_by_id = {e.episode_id: e for e in logs or []}
    candidates = []
    for cand in result.candidates:
        if mode == "polar-instruction-only":
            renderings: list[str] = []
        else:
            renderings = []
            for epi_id, _ts in graph.neighbors(cand.object_id, kind="episodic", active_only=True):
                node = graph.episodic[epi_id]
                if mode == "polar-raw-trajectory":
                    episode = logs_by_id.get(node.episode_id)
                    if episode is not None:
                        renderings.append(trajectory_text(episode))
                else:  # polar-summary
                    renderings.append(_summary_digest(node))
        candidates.append(replace(cand, episodic_memories=renderings))
    return RetrievalResult(result.instruction, result.hits, candidates)


_MEMORY_MODE = {
    "polar": "episodic",
    "polar-instruction-only": "none",
    "polar-raw-trajectory": "raw",
    "polar-summary": "summary",
}


# -- metrics -----------------------------------------------------------------------


@dataclass
class MetricsReport:
    mode: str
    kind: str
    n: int
    sr: float | None
    spl: float | None
    cm: float | None
    recall: dict[str, float | None]
    rows: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "kind": self.kind,
            "n": self.n,
            "sr": self.sr,
            "spl": self.spl,
            "cm": self.cm,
            "recall": dict(self.recall),
            "rows": list(self.rows),
        }


def spl_term(success: bool, path_m: float, shortest_m: float) -> float:
    """One episode's SPL contribution: S · l / max(p, l), degenerate p=l=0 scores S."""
    if not success:
        return 0.0
    denom = max(path_m, shortest_m)
    return 1.0 if denom <= 0 else shortest_m / denom


def aggregate(rows: list[dict]) -> dict:
    n = len(rows)
    if n == 0:
        return {"n": 0, "sr": None, "spl": None, "cm": None}
    return {
        "n": n,
        "sr": sum(r["success"] for r in rows) / n,
        "spl": sum(r["spl"] for r in rows) / n,
        "cm": sum(r["cm"] for r in rows) / n,
    }


def _mean_or_none(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return sum(present) / len(present) if present else None


def evaluate(
    specs: list[ScenarioSpec],
    mode: str,
    config: RunConfig | None = None,
    *,
    graphs: dict[str, MemoryGraph] | None = None,
    episodes: dict[str, list[EpisodeLog]] | None = None,
    encoder_config: EncoderConfig = DEFAULT_ENCODER,
    only_retrieval_hits: bool = False,
) -> MetricsReport:
    if mode not in MODES:
        raise RejectedInput(f"unknown evaluation mode {mode!r}; expected one of {', '.join(MODES)}")
    config = config or RunConfig(mode=mode)
    rows = []
    for spec in sorted(specs, key=lambda s: s.scenario_id):
        rows.append(
            _evaluate_one(
                spec,
                mode,
                config,
                graph=(graphs or {}).get(spec.scenario_id),
                logs=(episodes or {}).get(spec.scenario_id),
                encoder_config=encoder_config,
            )
        )
    if only_retrieval_hits:
        rows = [r for r in rows if _all_retrievers_hit(r)]
    kinds = sorted({s.kind for s in specs})
    stats = aggregate(rows)
    recall = {
        name: _mean_or_none([r[f"recall_{name}"] for r in rows]) for name in ("semantic", "bm25", "dense")
    }
    return MetricsReport(
        mode=mode,
        kind=kinds[0] if len(kinds) == 1 else ("mixed" if kinds else "-"),
        n=stats["n"],
        sr=stats["sr"],
        spl=stats["spl"],
        cm=stats["cm"],
        recall=recall,
        rows=rows,
    )


def _all_retrievers_hit(row: dict) -> bool:
    values = [row[k] for k in ("recall_semantic", "recall_bm25", "recall_dense") if row[k] is not None]
    return bool(values) and all(v >= 1.0 for v in values)


def _evaluate_one(
    spec: ScenarioSpec,
    mode: str,
    config: RunConfig,
    *,
    graph: MemoryGraph | None,
    logs: list[EpisodeLog] | None,
    encoder_config: EncoderConfig,
) -> dict:
    world = world_for_spec(spec)
    eval_world = world.move_object(spec.gold_object_id, spec.eval_gold_position)
    retrieval_result = None
    if mode.startswith("polar"):
        if graph is None:
            raise ConfigurationError(f"mode {mode!r} needs a memorized graph for {spec.scenario_id!r} (run memorize first)")
        retrieval_result = retrieve(graph, spec.eval_instruction, config.k, encoder_config=encoder_config)
        context = _ablated_result(retrieval_result, mode, graph, logs)
        planner = OraclePlanner(encoder_config, memory_mode=_MEMORY_MODE[mode])
    elif mode == "raw-interaction":
        if not logs:
            raise ConfigurationError(f"mode raw-interaction needs acquisition episodes for {spec.scenario_id!r}")
        context = _raw_sample(spec, logs, config.seed)
        planner = NaiveMatcher()
    else:  # no-prior
        categories = tuple(sorted({o.category for o in eval_world.objects.values()}))
        context = NoPriorContext(categories)
        planner = OraclePlanner(encoder_config)

    log, decision = run_episode(
        eval_world,
        spec.eval_instruction,
        context,
        planner,
        config,
        gold_object_id=spec.gold_object_id,
        start=AgentState(spec.eval_agent_start, spec.eval_agent_heading),
        episode_id=f"{spec.scenario_id}:eval",
        timestamp=max(s.timestamp for s in spec.scripts) + 1 if spec.scripts else 1,
    )
    path_m = summarize_episodic(log).path_length_m
    shortest_m = eval_world.shortest_path_length(spec.eval_agent_start, spec.eval_gold_position)
    reachable = not math.isinf(shortest_m)
    gold_pos = spec.eval_gold_position
    near_decoy = any(
        o.category == eval_world.objects[spec.gold_object_id].category
        and o.object_id != spec.gold_object_id
        and math.hypot(log.final_position[0] - o.position[0], log.final_position[1] - o.position[1])
        <= config.success_radius_m + 1e-9
        for o in eval_world.objects.values()
    )
    recall_semantic = None
    if graph is not None:
        semantic = retrieval_result or retrieve(graph, spec.eval_instruction, config.k, encoder_config=encoder_config)
        recall_semantic = float(recall_at_k(semantic, gold_object_id=spec.gold_object_id))
    recall_bm25 = recall_dense = None
    if logs:
        gold_ids = [e.episode_id for e in logs if e.target_object_id == spec.gold_object_id]
        if gold_ids:
            for name in ("bm25", "dense"):
                ranked = raw_retrieve(logs, spec.eval_instruction, config.k, name, encoder_config=encoder_config)
                hit = sum(recall_at_k(ranked, gold_episode_id=g) for g in gold_ids) / len(gold_ids)
                if name == "bm25":
                    recall_bm25 = hit
                else:
                    recall_dense = hit
    return {
        "spec_id": spec.scenario_id,
        "kind": spec.kind,
        "success": int(log.success),
        "path_m": path_m,
        "shortest_m": shortest_m if reachable else None,
        "spl": spl_term(log.success, path_m, shortest_m) if reachable else 0.0,
        "cm": int(near_decoy and not log.success),
        "grounded_object_id": decision.chosen_object_id,
        "grounding_correct": int(decision.chosen_object_id == spec.gold_object_id),
        "steps": len(log.trajectory) - 1,
        "recall_semantic": recall_semantic,
        "recall_bm25": recall_bm25,
        "recall_dense": recall_dense,
    }


# -- reporting ---------------------------------------------------------------------


_PRIMARY_RETRIEVER = {"raw-interaction": "bm25"}


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def render_table(reports: list[MetricsReport]) -> str:
    header = f"{'mode':<24}{'kind':<24}{'N':>5}{'SR':>9}{'SPL':>9}{'CM':>9}{'recall@5':>10}"
    lines = [header, "-" * len(header)]
    for report in reports:
        retriever = _PRIMARY_RETRIEVER.get(report.mode, "semantic" if report.mode.startswith("polar") else None)
        recall = report.recall.get(retriever) if retriever else None
        lines.append(
            f"{report.mode:<24}{report.kind:<24}{report.n:>5}"
            f"{_fmt(report.sr):>9}{_fmt(report.spl):>9}{_fmt(report.cm):>9}{_fmt(recall):>10}"
        )
    return "\n".join(lines) + "\n"


def write_report(reports: list[MetricsReport] | MetricsReport, json_path: str, table_path: str | None = None) -> str:
    from .fileio import atomic_write_text, dump_json

    if isinstance(reports, MetricsReport):
        reports = [reports]
    dump_json(json_path, {"format_version": FORMAT_VERSION, "reports": [r.to_json() for r in reports]})
    table = render_table(reports)
    if table_path:
        atomic_write_text(table_path, table)
    return table


def load_reports(path: str) -> list[MetricsReport]:
    import json

    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, line=exc.lineno) from exc
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise ParseError("unsupported or missing metrics format_version")
    reports = []
    for row in doc.get("reports", []):
        try:
            reports.append(
                MetricsReport(
                    row["mode"], row["kind"], int(row["n"]), row["sr"], row["spl"], row["cm"],
                    dict(row["recall"]), list(row["rows"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed metrics report: {exc}") from exc
    return reports
