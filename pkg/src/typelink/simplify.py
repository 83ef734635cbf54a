"""Anaphora link simplification: fold link counts of specific entities into
their more-linked generic parents, iterated to a fixed point.

Annotators frequently link a generic mention ("king") to a specific entity
(Charles I), which inflates mention polysemy and distorts link priors.  When
a mention's candidate set contains both an entity and one of its ancestors in
the property graph, and the ancestor is more linked, the descendant's counts
are merged into the ancestor.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from .kg import (
    INSTANCE_OF,
    IS_A_LIST_OF,
    OCCUPATION,
    POSITION_HELD,
    SERIES,
    SUBCLASS_OF,
    KnowledgeGraph,
    LinkStats,
)

# Kinds that chain into arbitrarily long ancestor paths, and kinds that count
# as parenthood only across a single edge.
TRANSITIVE_PARENT_KINDS = frozenset({INSTANCE_OF, SUBCLASS_OF, IS_A_LIST_OF})
SINGLE_HOP_PARENT_KINDS = frozenset({OCCUPATION, POSITION_HELD, SERIES})

DEFAULT_MAX_DEPTH = 16


def is_parent(
    graph: KnowledgeGraph,
    a: int,
    b: int,
    transitive_kinds: frozenset[str] = TRANSITIVE_PARENT_KINDS,
    single_hop_kinds: frozenset[str] = SINGLE_HOP_PARENT_KINDS,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> bool:
    """True iff ``a`` is an ancestor of ``b``: reachable from ``b`` by a
    non-empty path of transitive kinds, or by exactly one single-hop edge.

    Single-hop kinds do not chain and do not mix into transitive paths.
    Cycle-safe; traversal depth is capped at ``max_depth``.
    """
    graph.require(a)
    graph.require(b)
    if a == b:
        raise ValueError("is_parent is undefined for identical entities")
    for kind, parent in graph.parents(b):
        if kind in single_hop_kinds and parent == a:
            return True
    seen = {b}
    frontier = [b]
    depth = 0
    while frontier and depth < max_depth:
        depth += 1
        nxt: list[int] = []
        for node in frontier:
            for kind, parent in graph.parents(node):
                if kind not in transitive_kinds or parent in seen:
                    continue
                if parent == a:
                    return True
                seen.add(parent)
                nxt.append(parent)
        frontier = nxt
    return False


@dataclass
class IterationRow:
    step: int
    replacements: int
    links_changed: int


@dataclass
class PolysemySummary:
    """Mean candidate-set size over polysemous mentions (>= 2 senses)."""

    mean_senses: float
    polysemous_mentions: int
    histogram: dict[int, int]

    @property
    def defined(self) -> bool:
        return self.polysemous_mentions > 0


@dataclass
class SimplificationReport:
    iterations: list[IterationRow] = field(default_factory=list)
    polysemy_before: PolysemySummary | None = None
    polysemy_after: PolysemySummary | None = None

    @property
    def total_replacements(self) -> int:
        return sum(r.replacements for r in self.iterations)

    @property
    def total_links_changed(self) -> int:
        return sum(r.links_changed for r in self.iterations)


def polysemy_stats(stats: LinkStats) -> PolysemySummary:
    """Sense-count histogram plus the mean over polysemous mentions.

    With no polysemous mentions the mean is reported as 0 and the summary
    is flagged undefined via ``polysemous_mentions == 0``.
    """
    histogram: dict[int, int] = {}
    for mention in stats.mentions():
        n = len(stats.table[mention])
        histogram[n] = histogram.get(n, 0) + 1
    poly_total = sum(n * c for n, c in histogram.items() if n >= 2)
    poly_mentions = sum(c for n, c in histogram.items() if n >= 2)
    mean = poly_total / poly_mentions if poly_mentions else 0.0
    return PolysemySummary(mean_senses=mean, polysemous_mentions=poly_mentions, histogram=dict(sorted(histogram.items())))


def _merge_target(
    graph: KnowledgeGraph,
    entity: int,
    snapshot: dict[int, int],
    parent_cache: dict[tuple[int, int], bool],
    max_depth: int,
) -> int | None:
    """Most-linked strictly-more-linked co-candidate ancestor of ``entity``
    (ties by ascending id), or None."""
    best: tuple[int, int] | None = None  # (-count, id) ordering via tuple compare
    count_b = snapshot[entity]
    for other, count_a in snapshot.items():
        if other == entity or count_a <= count_b:
            continue
        key = (other, entity)
        hit = parent_cache.get(key)
        if hit is None:
            hit = is_parent(graph, other, entity, max_depth=max_depth)
            parent_cache[key] = hit
        if hit and (best is None or (-count_a, other) < best):
            best = (-count_a, other)
    return None if best is None else best[1]


def simplify(
    stats: LinkStats,
    graph: KnowledgeGraph,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> tuple[LinkStats, SimplificationReport]:
    """Iterate per-mention fold steps until an iteration makes no replacement.

    Comparisons within an iteration use counts snapshotted at iteration
    start, which makes the fixed point independent of mention order.  Total
    count mass per mention is conserved.
    """
    report = SimplificationReport(polysemy_before=polysemy_stats(stats))
    table = {m: dict(row) for m, row in stats.table.items()}
    parent_cache: dict[tuple[int, int], bool] = {}
    step = 0
    while True:
        step += 1
        replacements = 0
        links_changed = 0
        for mention, snapshot in table.items():
            if len(snapshot) < 2:
                continue
            moves: dict[int, int] = {}
            for entity in snapshot:
                target = _merge_target(graph, entity, snapshot, parent_cache, max_depth)
                if target is not None:
                    moves[entity] = target
            if not moves:
                continue
            new_row: dict[int, int] = {}
            for entity, count in snapshot.items():
                target = moves.get(entity, entity)
                new_row[target] = new_row.get(target, 0) + count
            table[mention] = new_row
            replacements += len(moves)
            links_changed += sum(snapshot[e] for e in moves)
        report.iterations.append(IterationRow(step=step, replacements=replacements, links_changed=links_changed))
        if replacements == 0:
            break
    result = LinkStats(table)
    report.polysemy_after = polysemy_stats(result)
    return result, report


def report_rows(report: SimplificationReport) -> list[tuple[int, int, int]]:
    """(step, replacements, links changed) rows for the report TSV."""
    return [(r.step, r.replacements, r.links_changed) for r in report.iterations]
