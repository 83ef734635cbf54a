"""Annotated corpora, the link-count baseline, oracle accuracy, and the
search objective.

Accuracy conventions used throughout:
  * a mention with an empty candidate set is *unlinkable* and excluded from
    accuracy denominators (reported separately),
  * a linkable mention whose gold entity is missing from its candidates
    counts as wrong for every system (gold recall is reported separately).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .kg import KnowledgeGraph, LinkStats, WorldFormatError
from .typesys import MembershipCache, TypeSystem

DEFAULT_LAMBDA = 0.00007


@dataclass
class Mention:
    """Token span [start, end) with its gold entity.

    ``candidates`` defaults to the link-stats candidate set of the mention
    text when omitted.
    """

    start: int
    end: int
    gold: int
    candidates: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.end <= self.start:
            raise WorldFormatError(f"mention span [{self.start}, {self.end}) is empty")
        if self.candidates is not None:
            self.candidates = tuple(self.candidates)


@dataclass
class Document:
    doc_id: str
    lang: str
    tokens: list[str]
    mentions: list[Mention] = field(default_factory=list)

    def __post_init__(self):
        last_end = 0
        for m in sorted(self.mentions, key=lambda m: m.start):
            if m.start < last_end:
                raise WorldFormatError(f"overlapping mentions in document {self.doc_id!r}")
            if m.end > len(self.tokens):
                raise WorldFormatError(
                    f"mention span [{m.start}, {m.end}) outside document {self.doc_id!r} of {len(self.tokens)} tokens"
                )
            last_end = m.end

    def mention_text(self, m: Mention) -> str:
        return " ".join(self.tokens[m.start : m.end])


@dataclass
class AnnotatedCorpus:
    documents: list[Document] = field(default_factory=list)

    def __post_init__(self):
        ids = [d.doc_id for d in self.documents]
        if len(set(ids)) != len(ids):
            raise WorldFormatError("duplicate doc_id in corpus")

    @property
    def n_mentions(self) -> int:
        return sum(len(d.mentions) for d in self.documents)

    def __len__(self) -> int:
        return len(self.documents)


def load_corpus(path: str) -> AnnotatedCorpus:
    """Read a corpus.jsonl file (one document object per line)."""
    if not os.path.isfile(path):
        raise WorldFormatError("file not found", path)
    docs: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise WorldFormatError(f"invalid JSON: {exc}", path, lineno) from None
            try:
                mentions = [
                    Mention(
                        start=m["start"],
                        end=m["end"],
                        gold=m["gold"],
                        candidates=tuple(m["candidates"]) if "candidates" in m else None,
                    )
                    for m in data.get("mentions", [])
                ]
                docs.append(
                    Document(
                        doc_id=str(data["doc_id"]),
                        lang=str(data.get("lang", "und")),
                        tokens=list(data["tokens"]),
                        mentions=mentions,
                    )
                )
            except (KeyError, TypeError) as exc:
                raise WorldFormatError(f"bad document object: {exc}", path, lineno) from None
            except WorldFormatError as exc:
                raise WorldFormatError(str(exc), path, lineno) from None
    return AnnotatedCorpus(docs)


def save_corpus(corpus: AnnotatedCorpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus.documents:
            obj = {
                "doc_id": doc.doc_id,
                "lang": doc.lang,
                "tokens": doc.tokens,
                "mentions": [
                    {
                        "start": m.start,
                        "end": m.end,
                        "gold": m.gold,
                        **({"candidates": list(m.candidates)} if m.candidates is not None else {}),
                    }
                    for m in doc.mentions
                ],
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


# -- resolved view -----------------------------------------------------------


@dataclass(frozen=True)
class ResolvedMention:
    """A mention with its candidate set materialised in rank order
    (descending link count, ties by ascending entity id)."""

    doc_idx: int
    mention_idx: int
    text: str
    gold: int
    candidates: tuple[int, ...]
    counts: tuple[int, ...]

    @property
    def linkable(self) -> bool:
        return bool(self.candidates)

    @property
    def gold_present(self) -> bool:
        return self.gold in self.candidates

    @property
    def greedy_prediction(self) -> int | None:
        return self.candidates[0] if self.candidates else None


def resolve_corpus(corpus: AnnotatedCorpus, stats: LinkStats) -> list[ResolvedMention]:
    """Materialise every mention's candidates and counts against link stats."""
    out: list[ResolvedMention] = []
    for d, doc in enumerate(corpus.documents):
        for i, m in enumerate(doc.mentions):
            text = doc.mention_text(m)
            if m.candidates is not None:
                cands = list(dict.fromkeys(m.candidates))
            else:
                cands = stats.candidate_ids(text)
            counts = {e: stats.count(text, e) for e in cands}
            cands.sort(key=lambda e: (-counts[e], e))
            out.append(
                ResolvedMention(
                    doc_idx=d,
                    mention_idx=i,
                    text=text,
                    gold=m.gold,
                    candidates=tuple(cands),
                    counts=tuple(counts[e] for e in cands),
                )
            )
    return out


# -- accuracy ----------------------------------------------------------------


@dataclass(frozen=True)
class Accuracy:
    """Exact hit/total pair; compare counts, not floats, in tests."""

    hits: int
    total: int

    @property
    def value(self) -> float:
        return self.hits / self.total if self.total else 0.0

    def as_dict(self) -> dict:
        return {"hits": self.hits, "total": self.total, "value": self.value}

    def __float__(self) -> float:
        return self.value


def s_greedy(corpus: AnnotatedCorpus, stats: LinkStats) -> Accuracy:
    """Accuracy of always picking the most-linked candidate."""
    resolved = resolve_corpus(corpus, stats)
    linkable = [r for r in resolved if r.linkable]
    hits = sum(1 for r in linkable if r.greedy_prediction == r.gold)
    return Accuracy(hits, len(linkable))


def gold_recall(corpus: AnnotatedCorpus, stats: LinkStats) -> Accuracy:
    """Fraction of linkable mentions whose candidate set contains gold."""
    resolved = resolve_corpus(corpus, stats)
    linkable = [r for r in resolved if r.linkable]
    return Accuracy(sum(1 for r in linkable if r.gold_present), len(linkable))


def unlinkable_count(corpus: AnnotatedCorpus, stats: LinkStats) -> int:
    return sum(1 for r in resolve_corpus(corpus, stats) if not r.linkable)


def oracle_prediction(
    r: ResolvedMention, labels: Mapping[int, tuple], counts: Mapping[int, int]
) -> int | None:
    """Prune candidates to those matching gold's label tuple, then pick the
    most-linked survivor (ties by ascending id)."""
    if not r.linkable:
        return None
    if not r.gold_present:
        pruned = list(r.candidates)
    else:
        gold_tuple = labels[r.gold]
        pruned = [e for e in r.candidates if labels[e] == gold_tuple]
    return max(pruned, key=lambda e: (counts[e], -e))


def oracle_accuracy(
    corpus: AnnotatedCorpus,
    graph: KnowledgeGraph,
    system: TypeSystem,
    stats: LinkStats,
    cache: MembershipCache | None = None,
) -> Accuracy:
    """Upper-bound accuracy of a perfect type classifier for this system.

    Straightforward per-mention implementation; the search module carries a
    vectorised equivalent that must agree with this one.
    """
    cache = cache or MembershipCache(graph)
    label_matrix = cache.system_labels(system)
    resolved = resolve_corpus(corpus, stats)
    hits = 0
    total = 0
    for r in resolved:
        if not r.linkable:
            continue
        total += 1
        counts = dict(zip(r.candidates, r.counts))
        labels = {e: tuple(label_matrix[:, graph.index_of(e)]) for e in r.candidates + (r.gold,)}
        if oracle_prediction(r, labels, counts) == r.gold:
            hits += 1
    return Accuracy(hits, total)


def system_accuracy(
    predictions: Mapping[tuple[str, int], int],
    corpus: AnnotatedCorpus,
    stats: LinkStats,
) -> Accuracy:
    """Accuracy of explicit predictions keyed by (doc_id, mention index).

    Every linkable mention must have a prediction.
    """
    resolved = resolve_corpus(corpus, stats)
    hits = 0
    total = 0
    for r in resolved:
        if not r.linkable:
            continue
        key = (corpus.documents[r.doc_idx].doc_id, r.mention_idx)
        if key not in predictions:
            raise ValueError(f"missing prediction for linkable mention {key}")
        total += 1
        if predictions[key] == r.gold:
            hits += 1
    return Accuracy(hits, total)


# -- objective ---------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveConfig:
    """Per-axis size penalty for the search objective."""

    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be non-negative, got {self.lam}")


def objective_j(
    s_oracle: float,
    s_greedy: float,
    learnability: float,
    axis_count: int,
    config: ObjectiveConfig | float = ObjectiveConfig(),
) -> float:
    """Search objective: oracle headroom discounted by learnability, plus the
    baseline, minus a per-axis penalty.

    J = (S_oracle - S_greedy) * Learnability + S_greedy - axis_count * lambda
    """
    lam = config.lam if isinstance(config, ObjectiveConfig) else float(config)
    return (s_oracle - s_greedy) * learnability + s_greedy - axis_count * lam


# -- error analysis ----------------------------------------------------------


@dataclass(frozen=True)
class ErrorRow:
    gold_types: tuple[str, ...]
    mentions: int
    errors: int
    top_confusions: tuple[tuple[int, int], ...]  # (predicted entity, count)

    def as_dict(self, graph: KnowledgeGraph | None = None) -> dict:
        confusions = [
            {"entity": e, "count": c, **({"label": graph.entities.get(e, "")} if graph else {})}
            for e, c in self.top_confusions
        ]
        return {
            "gold_types": list(self.gold_types),
            "mentions": self.mentions,
            "errors": self.errors,
            "top_confusions": confusions,
        }


def error_analysis(
    predictions: Mapping[tuple[str, int], int],
    corpus: AnnotatedCorpus,
    graph: KnowledgeGraph,
    system: TypeSystem,
    stats: LinkStats,
    cache: MembershipCache | None = None,
    top_confusions: int = 3,
) -> list[ErrorRow]:
    """Group linkable mentions by the gold entity's type tuple and count
    errors; rows sorted by descending error count."""
    cache = cache or MembershipCache(graph)
    resolved = resolve_corpus(corpus, stats)
    groups: dict[tuple[str, ...], dict] = {}
    for r in resolved:
        if not r.linkable:
            continue
        key = (corpus.documents[r.doc_idx].doc_id, r.mention_idx)
        if key not in predictions:
            raise ValueError(f"missing prediction for linkable mention {key}")
        gold_types = cache.label_entity(system, r.gold) if graph.has(r.gold) else ("<unknown>",) * len(system.axes)
        g = groups.setdefault(gold_types, {"mentions": 0, "errors": 0, "confusions": {}})
        g["mentions"] += 1
        pred = predictions[key]
        if pred != r.gold:
            g["errors"] += 1
            g["confusions"][pred] = g["confusions"].get(pred, 0) + 1
    rows = [
        ErrorRow(
            gold_types=types,
            mentions=g["mentions"],
            errors=g["errors"],
            top_confusions=tuple(
                sorted(g["confusions"].items(), key=lambda ec: (-ec[1], ec[0]))[:top_confusions]
            ),
        )
        for types, g in groups.items()
    ]
    rows.sort(key=lambda row: (-row.errors, -row.mentions, row.gold_types))
    return rows


def greedy_predictions(corpus: AnnotatedCorpus, stats: LinkStats) -> dict[tuple[str, int], int]:
    """Most-linked-candidate predictions for every linkable mention."""
    out: dict[tuple[str, int], int] = {}
    for r in resolve_corpus(corpus, stats):
        if r.linkable:
            out[(corpus.documents[r.doc_idx].doc_id, r.mention_idx)] = r.greedy_prediction
    return out
