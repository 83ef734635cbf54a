"""Inference-time entity ranking: the link-count prior smoothed by pooled
per-axis type beliefs.

score(e) = P_link(e|m) * (1 - beta + beta * prod_i(1 - a_i + a_i * P_i(t_i)))

where t_i is e's type on axis i and P_i the mention-pooled belief for that
type.  With beta = 0 (or all a_i = 0) the ranking reduces to the link prior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .evalcore import Accuracy, AnnotatedCorpus, Document, resolve_corpus
from .kg import KnowledgeGraph, LinkStats
from .typesys import MembershipCache, TypeSystem
from .typeclf import TokenClassifierModel, predict


@dataclass(frozen=True)
class SmoothingParams:
    """Per-axis smoothing ``alpha`` plus the global type weight ``beta``."""

    alpha: tuple[float, ...]
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        for a in self.alpha:
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"alpha values must be in [0, 1], got {a}")

    @staticmethod
    def uniform(n_axes: int, alpha: float = 0.9, beta: float = 0.9) -> "SmoothingParams":
        return SmoothingParams(alpha=(alpha,) * n_axes, beta=beta)

    def as_dict(self) -> dict:
        return {"alpha": list(self.alpha), "beta": self.beta}


@dataclass(frozen=True)
class LinkDecision:
    doc_id: str
    mention_idx: int
    text: str
    chosen: int
    ranked: tuple[tuple[int, float], ...]  # (entity, score), best first


def pool_mention_beliefs(
    beliefs: Sequence[np.ndarray], span: tuple[int, int], mode: str = "max"
) -> list[np.ndarray]:
    """Combine per-token beliefs over a mention span, per axis.

    "max" keeps the elementwise maximum over the span (the pooled vector is a
    per-type score, not a distribution); "product" multiplies instead.
    """
    start, end = span
    if end <= start:
        raise ValueError(f"empty mention span [{start}, {end})")
    out = []
    for axis_beliefs in beliefs:
        window = axis_beliefs[start:end]
        if len(window) != end - start:
            raise ValueError(f"span [{start}, {end}) outside document of {len(axis_beliefs)} tokens")
        if mode == "max":
            out.append(window.max(axis=0))
        elif mode == "product":
            out.append(window.prod(axis=0))
        else:
            raise ValueError(f"unknown pooling mode {mode!r}")
    return out


def _type_columns(system: TypeSystem) -> list[dict[str, int]]:
    return [{name: i for i, name in enumerate(axis.type_names)} for axis in system.axes]


def _score(
    p_link: float,
    type_indices: Sequence[int],
    pooled: Sequence[np.ndarray],
    params: SmoothingParams,
) -> float:
    prod = 1.0
    for i, t in enumerate(type_indices):
        a = params.alpha[i]
        prod *= 1.0 - a + a * float(pooled[i][t])
    return p_link * (1.0 - params.beta + params.beta * prod)


def entity_score(
    entity: int,
    pooled: Sequence[np.ndarray],
    mention: str,
    stats: LinkStats,
    graph: KnowledgeGraph,
    system: TypeSystem,
    params: SmoothingParams,
    cache: MembershipCache | None = None,
) -> float:
    """Smoothed score of one candidate entity for a mention."""
    cache = cache or MembershipCache(graph)
    row = stats.counts(mention)
    if entity not in row:
        raise ValueError(f"entity {entity} is not a candidate of mention {mention!r}")
    p_link = row[entity] / sum(row.values())
    labels = cache.label_entity(system, entity)
    columns = _type_columns(system)
    indices = [columns[i][t] for i, t in enumerate(labels)]
    return _score(p_link, indices, pooled, params)


def link(
    document: Document,
    model: TokenClassifierModel,
    system: TypeSystem,
    stats: LinkStats,
    graph: KnowledgeGraph,
    params: SmoothingParams,
    cache: MembershipCache | None = None,
    pooling: str = "max",
    top_k: int = 5,
) -> list[LinkDecision]:
    """One decision per linkable mention of a document.

    Work is O(tokens + total candidates x axes): no pairwise entity
    interactions enter the score.
    """
    cache = cache or MembershipCache(graph)
    beliefs = predict(model, document.tokens)
    label_matrix = cache.system_labels(system)
    columns = _type_columns(system)
    decisions: list[LinkDecision] = []
    for idx, m in enumerate(document.mentions):
        text = document.mention_text(m)
        if m.candidates is not None:
            cands = list(dict.fromkeys(m.candidates))
        else:
            cands = stats.candidate_ids(text)
        if not cands:
            continue  # unlinkable: no decision
        counts = {e: stats.count(text, e) for e in cands}
        total = sum(counts.values())
        pooled = pool_mention_beliefs(beliefs, (m.start, m.end), mode=pooling)
        scored: list[tuple[int, float]] = []
        for e in cands:
            p_link = counts[e] / total if total else 1.0 / len(cands)
            if graph.has(e):
                col = label_matrix[:, graph.index_of(e)]
                indices = [int(col[i]) for i in range(len(system.axes))]
            else:
                indices = [columns[i][system.axes[i].type_names[-1]] for i in range(len(system.axes))]
            scored.append((e, _score(p_link, indices, pooled, params)))
        scored.sort(key=lambda es: (-es[1], es[0]))
        decisions.append(
            LinkDecision(
                doc_id=document.doc_id,
                mention_idx=idx,
                text=text,
                chosen=scored[0][0],
                ranked=tuple(scored[:top_k]),
            )
        )
    return decisions


def link_corpus(
    corpus: AnnotatedCorpus,
    model: TokenClassifierModel,
    system: TypeSystem,
    stats: LinkStats,
    graph: KnowledgeGraph,
    params: SmoothingParams,
    cache: MembershipCache | None = None,
    pooling: str = "max",
) -> list[LinkDecision]:
    cache = cache or MembershipCache(graph)
    out: list[LinkDecision] = []
    for doc in corpus.documents:
        out.extend(link(doc, model, system, stats, graph, params, cache=cache, pooling=pooling))
    return out


def decisions_to_predictions(decisions: Sequence[LinkDecision]) -> dict[tuple[str, int], int]:
    return {(d.doc_id, d.mention_idx): d.chosen for d in decisions}


def fit_smoothing(
    corpus: AnnotatedCorpus,
    model: TokenClassifierModel,
    system: TypeSystem,
    stats: LinkStats,
    graph: KnowledgeGraph,
    alphas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 0.9, 1.0),
    betas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 0.9, 1.0),
    cache: MembershipCache | None = None,
    pooling: str = "max",
) -> tuple[SmoothingParams, Accuracy]:
    """Grid-search (shared alpha, beta) maximising accuracy on a validation
    corpus; deterministic scan order, first maximum wins."""
    if not len(alphas) or not len(betas):
        raise ValueError("empty smoothing grid")
    cache = cache or MembershipCache(graph)
    label_matrix = cache.system_labels(system)
    n_axes = len(system.axes)

    # precompute per-mention invariants once; the grid scan is then cheap
    prepared = []  # (gold, [(entity, p_link, type idx per axis)], pooled)
    for doc in corpus.documents:
        beliefs = predict(model, doc.tokens)
        for m in doc.mentions:
            text = doc.mention_text(m)
            cands = list(dict.fromkeys(m.candidates)) if m.candidates is not None else stats.candidate_ids(text)
            if not cands:
                continue
            counts = {e: stats.count(text, e) for e in cands}
            total = sum(counts.values())
            pooled = pool_mention_beliefs(beliefs, (m.start, m.end), mode=pooling)
            rows = []
            for e in cands:
                p_link = counts[e] / total if total else 1.0 / len(cands)
                indices = [int(label_matrix[i, graph.index_of(e)]) for i in range(n_axes)]
                rows.append((e, p_link, indices))
            prepared.append((m.gold, rows, pooled))
    if not prepared:
        raise ValueError("validation corpus has no linkable mentions")

    best: tuple[SmoothingParams, Accuracy] | None = None
    for alpha in alphas:
        for beta in betas:
            params = SmoothingParams(alpha=(alpha,) * n_axes, beta=beta)
            hits = 0
            for gold, rows, pooled in prepared:
                chosen = min(
                    rows,
                    key=lambda epi: (-_score(epi[1], epi[2], pooled, params), epi[0]),
                )[0]
                hits += chosen == gold
            acc = Accuracy(hits, len(prepared))
            if best is None or acc.hits > best[1].hits:
                best = (params, acc)
    return best
