"""Retrieval over the memory graph plus raw-episode baselines.

The graph path scores every semantic node that still has a linking edge
against the instruction embedding, keeps the top k, and expands each hit
through its active edges into candidate objects carrying all of their
active statements, episodic renderings, and past instructions. The raw
baselines (Okapi BM25 and dense cosine) rank whole episode documents —
raw instruction plus the flat trajectory token stream — with no
distillation, for head-to-head recall comparisons.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .distiller import EpisodeLog, trajectory_text
from .encoder import EncoderConfig, DEFAULT_ENCODER, cosine, encode
from .errors import RejectedInput
from .graph import MemoryGraph

DEFAULT_K = 5
BM25_K1 = 1.2
BM25_B = 0.75


@dataclass
class SemanticHit:
    node_id: str
    score: float
    timestamp: int  # newest linking edge
    object_ids: list[str]


@dataclass
class CandidateStatement:
    text: str
    score: float
    timestamp: int
    active: bool
    node_id: str = ""


@dataclass
class CandidateObject:
    object_id: str
    category: str
    statements: list[CandidateStatement]
    episodic_memories: list[str] = field(default_factory=list)  # renderings, newest first
    instructions: list[str] = field(default_factory=list)


@dataclass
class RetrievalResult:
    instruction: str
    hits: list[SemanticHit]
    candidates: list[CandidateObject]


def retrieve_semantic(
    graph: MemoryGraph,
    instruction: str,
    k: int = DEFAULT_K,
    *,
    active_only: bool = True,
    recency_tiebreak: bool = True,
    encoder_config: EncoderConfig = DEFAULT_ENCODER,
) -> list[SemanticHit]:
    """Top-k semantic nodes by cosine; ties break to newer edges, then node id."""
    if k < 1:
        raise RejectedInput(f"k must be >= 1, got {k}")
    query = encode(instruction, encoder_config)
    hits = []
    for node_id in sorted(graph.semantic):
        linking = graph.neighbors(node_id, kind="object", active_only=active_only)
        if not linking:
            continue
        newest = linking[0][1]
        score = cosine(query, graph.semantic[node_id].embedding)
        hits.append(SemanticHit(node_id, score, newest, sorted({obj for obj, _ in linking})))
    if recency_tiebreak:
        hits.sort(key=lambda h: (-h.score, -h.timestamp, h.node_id))
    else:
        hits.sort(key=lambda h: (-h.score, h.node_id))
    return hits[:k]


def assemble_candidates(
    graph: MemoryGraph,
    hits: list[SemanticHit],
    *,
    instruction_embedding: np.ndarray | None = None,
) -> list[CandidateObject]:
    """Expand hits into deduplicated candidate objects, in first-hit order.

    Expansion always follows active edges, so every candidate carries at
    least one active statement. Statement scores are cosines against the
    instruction embedding when one is supplied, else 0.
    """
    candidates: list[CandidateObject] = []
    seen: set[str] = set()
    for hit in hits:
        for object_id, _ts in graph.neighbors(hit.node_id, kind="object", active_only=True):
            if object_id in seen:
                continue
            seen.add(object_id)
            statements = []
            for sem_id, ts in graph.neighbors(object_id, kind="semantic", active_only=True):
                node = graph.semantic[sem_id]
                score = 0.0 if instruction_embedding is None else cosine(instruction_embedding, node.embedding)
                statements.append(CandidateStatement(node.statement, score, ts, True, sem_id))
            renderings, instructions = [], []
            for epi_id, _ets in graph.neighbors(object_id, kind="episodic", active_only=True):
                node = graph.episodic[epi_id]
                renderings.append(node.rendered_text)
                instructions.append(node.instruction)
            candidates.append(
                CandidateObject(object_id, graph.objects[object_id].category, statements, renderings, instructions)
            )
    return candidates


def retrieve(
    graph: MemoryGraph,
    instruction: str,
    k: int = DEFAULT_K,
    *,
    active_only: bool = True,
    recency_tiebreak: bool = True,
    encoder_config: EncoderConfig = DEFAULT_ENCODER,
) -> RetrievalResult:
    """retrieve_semantic + assemble_candidates in one call."""
    hits = retrieve_semantic(
        graph,
        instruction,
        k,
        active_only=active_only,
        recency_tiebreak=recency_tiebreak,
        encoder_config=encoder_config,
    )
    query = encode(instruction, encoder_config)
    return RetrievalResult(instruction, hits, assemble_candidates(graph, hits, instruction_embedding=query))


# -- raw-episode baselines --------------------------------------------------


def episode_document(episode: EpisodeLog) -> str:
    return f"{episode.instruction} {trajectory_text(episode)}"


def _tokens(text: str) -> list[str]:
    return text.lower().split()


def _bm25_scores(docs: list[list[str]], query: list[str]) -> list[float]:
    n = len(docs)
    avgdl = sum(len(d) for d in docs) / n
    df: Counter = Counter()
    for doc in docs:
        df.update(set(doc))
    scores = []
    for doc in docs:
        counts = Counter(doc)
        norm = BM25_K1 * (1 - BM25_B + BM25_B * len(doc) / avgdl)
        score = 0.0
        for term in query:
            tf = counts.get(term, 0)
            if tf == 0:
                continue
            idf = math.log(1 + (n - df[term] + 0.5) / (df[term] + 0.5))
            score += idf * tf * (BM25_K1 + 1) / (tf + norm)
        scores.append(score)
    return scores


def raw_retrieve(
    episodes: list[EpisodeLog],
    instruction: str,
    k: int = DEFAULT_K,
    mode: str = "bm25",
    *,
    encoder_config: EncoderConfig = DEFAULT_ENCODER,
) -> list[tuple[str, float]]:
    """Rank raw episode documents; returns (episode_id, score), best first."""
    if k < 1:
        raise RejectedInput(f"k must be >= 1, got {k}")
    if mode not in ("bm25", "dense"):
        raise RejectedInput(f"unknown raw retrieval mode {mode!r}")
    if not episodes:
        return []
    docs = [(e.episode_id, episode_document(e)) for e in episodes]
    if mode == "bm25":
        scores = _bm25_scores([_tokens(text) for _, text in docs], _tokens(instruction))
    else:
        query = encode(instruction, encoder_config)
        scores = [cosine(query, encode(text, encoder_config)) for _, text in docs]
    ranked = sorted(zip(docs, scores), key=lambda row: (-row[1], row[0][0]))
    return [(episode_id, score) for (episode_id, _), score in ranked[:k]]


def recall_at_k(
    result: RetrievalResult | list[tuple[str, float]],
    *,
    gold_object_id: str | None = None,
    gold_episode_id: str | None = None,
) -> int:
    """1 iff gold is present: object-level for graph results, episode-level for raw."""
    if isinstance(result, RetrievalResult):
        if gold_object_id is None:
            raise RejectedInput("graph results need gold_object_id")
        return int(any(c.object_id == gold_object_id for c in result.candidates))
    if gold_episode_id is None:
        raise RejectedInput("raw results need gold_episode_id")
    return int(any(episode_id == gold_episode_id for episode_id, _ in result))
