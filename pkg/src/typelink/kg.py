"""Knowledge graphs, mention link statistics, and the TSV world format.

A *world* is a directory holding ``entities.tsv`` (``id<TAB>label``),
``edges.tsv`` (``child_id<TAB>kind<TAB>parent_id``) and usually
``links.tsv`` (``mention<TAB>entity_id<TAB>count``).  All ids are decimal
integers, lines starting with ``#`` are comments, encoding is UTF-8.
"""

from __future__ import annotations

import os
from typing import Iterable, Iterator, Mapping, Sequence

# Canonical edge kinds. Worlds may declare further kinds in their edge files;
# the set of kinds observed at load time is closed for the session.
INSTANCE_OF = "instance_of"
SUBCLASS_OF = "subclass_of"
WIKIPEDIA_CATEGORY = "wikipedia_category"
IS_A_LIST_OF = "is_a_list_of"
OCCUPATION = "occupation"
POSITION_HELD = "position_held"
SERIES = "series"

BASE_EDGE_KINDS = frozenset(
    {
        INSTANCE_OF,
        SUBCLASS_OF,
        WIKIPEDIA_CATEGORY,
        IS_A_LIST_OF,
        OCCUPATION,
        POSITION_HELD,
        SERIES,
    }
)


class WorldFormatError(ValueError):
    """A world file (or in-memory world data) violates the format contract."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:" if line is None else f"{path}:{line}: "
        super().__init__(f"{where}{message}")


def _check_kind(kind: str) -> str:
    if not kind or not kind.isascii() or any(c.isspace() for c in kind):
        raise WorldFormatError(f"edge kind must be non-empty ASCII without whitespace, got {kind!r}")
    return kind


class KnowledgeGraph:
    """Entities plus kind-labelled child->parent edges.

    Immutable after construction; safe for concurrent reads.  Adjacency is
    indexed both ways: ``children(parent, kind)`` for downward traversal and
    ``parents(child)`` for upward traversal.
    """

    def __init__(self, entities: Mapping[int, str], edges: Iterable[tuple[int, str, int]]):
        self.entities: dict[int, str] = {}
        for eid, label in entities.items():
            if not isinstance(eid, int) or eid < 0:
                raise WorldFormatError(f"entity id must be a non-negative integer, got {eid!r}")
            if "\t" in label or "\n" in label:
                raise WorldFormatError(f"entity label may not contain tabs/newlines: {label!r}")
            self.entities[eid] = label

        self.edges: list[tuple[int, str, int]] = []
        self._children: dict[tuple[int, str], list[int]] = {}
        self._parents: dict[int, list[tuple[str, int]]] = {}
        self.kinds: set[str] = set()
        seen: set[tuple[int, str, int]] = set()
        for child, kind, parent in edges:
            _check_kind(kind)
            if child == parent:
                raise WorldFormatError(f"self-loop edge on entity {child}")
            if child not in self.entities:
                raise WorldFormatError(f"edge references undeclared child entity {child}")
            if parent not in self.entities:
                raise WorldFormatError(f"edge references undeclared parent entity {parent}")
            triple = (child, kind, parent)
            if triple in seen:
                raise WorldFormatError(f"duplicate edge {triple}")
            seen.add(triple)
            self.edges.append(triple)
            self.kinds.add(kind)
            self._children.setdefault((parent, kind), []).append(child)
            self._parents.setdefault(child, []).append((kind, parent))

        # dense index for bitset-backed membership caches
        self._ids: tuple[int, ...] = tuple(sorted(self.entities))
        self._index: dict[int, int] = {eid: i for i, eid in enumerate(self._ids)}

    # -- lookups ---------------------------------------------------------

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def entity_ids(self) -> tuple[int, ...]:
        """All entity ids in ascending order (the dense-index order)."""
        return self._ids

    def has(self, eid: int) -> bool:
        return eid in self.entities

    def require(self, eid: int) -> int:
        if eid not in self.entities:
            raise KeyError(f"undeclared entity {eid}")
        return eid

    def label(self, eid: int) -> str:
        return self.entities[self.require(eid)]

    def index_of(self, eid: int) -> int:
        """Dense index of an entity id (ascending-id order)."""
        return self._index[self.require(eid)]

    def id_at(self, index: int) -> int:
        return self._ids[index]

    def children(self, parent: int, kind: str) -> Sequence[int]:
        return self._children.get((parent, kind), ())

    def parents(self, child: int) -> Sequence[tuple[str, int]]:
        return self._parents.get(child, ())

    def parent_counts(self, kinds: Iterable[str]) -> dict[tuple[int, str], int]:
        """Number of children per (parent, kind), restricted to ``kinds``."""
        wanted = set(kinds)
        return {
            (parent, kind): len(childs)
            for (parent, kind), childs in self._children.items()
            if kind in wanted
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.entities == other.entities and set(self.edges) == set(other.edges)

    def __repr__(self) -> str:
        return f"KnowledgeGraph(|E|={self.n_entities}, |edges|={len(self.edges)})"


class LinkStats:
    """mention -> (entity -> positive link count) table.

    The keys of a mention's row form its candidate set; row-normalised counts
    give the link prior used for ranking.  Immutable by convention.
    """

    def __init__(self, table: Mapping[str, Mapping[int, int]]):
        self.table: dict[str, dict[int, int]] = {}
        for mention, row in table.items():
            if not mention or "\t" in mention or "\n" in mention:
                raise WorldFormatError(f"bad mention string {mention!r}")
            clean: dict[int, int] = {}
            for eid, count in row.items():
                if not isinstance(count, int) or count <= 0:
                    raise WorldFormatError(
                        f"link count for mention {mention!r}, entity {eid} must be a positive integer, got {count!r}"
                    )
                clean[int(eid)] = count
            if clean:
                self.table[mention] = clean

    def mentions(self) -> Iterator[str]:
        return iter(self.table)

    def __contains__(self, mention: str) -> bool:
        return mention in self.table

    def __len__(self) -> int:
        return len(self.table)

    def counts(self, mention: str) -> dict[int, int]:
        """Raw counts for a mention; empty dict when unknown."""
        return dict(self.table.get(mention, ()))

    def count(self, mention: str, eid: int) -> int:
        return self.table.get(mention, {}).get(eid, 0)

    def candidate_ids(self, mention: str) -> list[int]:
        """Candidates in rank order: descending count, ties ascending id."""
        row = self.table.get(mention)
        if not row:
            return []
        return sorted(row, key=lambda e: (-row[e], e))

    def total_links(self) -> int:
        return sum(sum(row.values()) for row in self.table.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinkStats):
            return NotImplemented
        return self.table == other.table

    def __repr__(self) -> str:
        return f"LinkStats(|mentions|={len(self.table)}, links={self.total_links()})"


def candidates(stats: LinkStats, mention: str) -> list[tuple[int, float]]:
    """Ranked candidates with their normalised link prior.

    Probabilities sum to 1 for known mentions; descending probability,
    ties broken by ascending entity id.  Unknown mentions give ``[]``.
    """
    row = stats.table.get(mention)
    if not row:
        return []
    total = sum(row.values())
    return [(eid, row[eid] / total) for eid in stats.candidate_ids(mention)]


# -- TSV I/O ---------------------------------------------------------------


def _tsv_rows(path: str) -> Iterator[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split("\t")


def _parse_id(field: str, path: str, lineno: int, what: str) -> int:
    try:
        value = int(field)
    except ValueError:
        raise WorldFormatError(f"{what} is not a decimal integer: {field!r}", path, lineno) from None
    if value < 0:
        raise WorldFormatError(f"{what} must be non-negative, got {value}", path, lineno)
    return value


def load_graph(path: str) -> KnowledgeGraph:
    """Load a graph from a world directory (or from an entities.tsv path with
    edges.tsv alongside).  The first violating line is reported on failure."""
    if os.path.isdir(path):
        entities_path = os.path.join(path, "entities.tsv")
        edges_path = os.path.join(path, "edges.tsv")
    else:
        entities_path = path
        edges_path = os.path.join(os.path.dirname(path), "edges.tsv")
    for p in (entities_path, edges_path):
        if not os.path.isfile(p):
            raise WorldFormatError("file not found", p)

    entities: dict[int, str] = {}
    for lineno, fields in _tsv_rows(entities_path):
        if len(fields) != 2:
            raise WorldFormatError(f"expected 2 tab-separated fields, got {len(fields)}", entities_path, lineno)
        eid = _parse_id(fields[0], entities_path, lineno, "entity id")
        if eid in entities:
            raise WorldFormatError(f"duplicate entity id {eid}", entities_path, lineno)
        entities[eid] = fields[1]

    edges: list[tuple[int, str, int]] = []
    seen: set[tuple[int, str, int]] = set()
    for lineno, fields in _tsv_rows(edges_path):
        if len(fields) != 3:
            raise WorldFormatError(f"expected 3 tab-separated fields, got {len(fields)}", edges_path, lineno)
        child = _parse_id(fields[0], edges_path, lineno, "child id")
        kind = fields[1]
        parent = _parse_id(fields[2], edges_path, lineno, "parent id")
        try:
            _check_kind(kind)
        except WorldFormatError as exc:
            raise WorldFormatError(str(exc), edges_path, lineno) from None
        if child == parent:
            raise WorldFormatError(f"self-loop edge on entity {child}", edges_path, lineno)
        for eid in (child, parent):
            if eid not in entities:
                raise WorldFormatError(f"edge references undeclared entity {eid}", edges_path, lineno)
        triple = (child, kind, parent)
        if triple in seen:
            raise WorldFormatError(f"duplicate edge {triple}", edges_path, lineno)
        seen.add(triple)
        edges.append(triple)

    return KnowledgeGraph(entities, edges)


def save_graph(graph: KnowledgeGraph, path: str) -> None:
    """Write entities.tsv and edges.tsv into directory ``path`` (created if
    needed), in canonical sorted order so output is reproducible."""
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "entities.tsv"), "w", encoding="utf-8") as fh:
        for eid in sorted(graph.entities):
            fh.write(f"{eid}\t{graph.entities[eid]}\n")
    with open(os.path.join(path, "edges.tsv"), "w", encoding="utf-8") as fh:
        for child, kind, parent in sorted(graph.edges):
            fh.write(f"{child}\t{kind}\t{parent}\n")


def load_links(path: str, graph: KnowledgeGraph) -> LinkStats:
    """Load mention link statistics; duplicate (mention, entity) rows are
    summed, zero/negative counts and unknown entity ids are rejected."""
    if not os.path.isfile(path):
        raise WorldFormatError("file not found", path)
    table: dict[str, dict[int, int]] = {}
    for lineno, fields in _tsv_rows(path):
        if len(fields) != 3:
            raise WorldFormatError(f"expected 3 tab-separated fields, got {len(fields)}", path, lineno)
        mention = fields[0]
        if not mention:
            raise WorldFormatError("empty mention string", path, lineno)
        eid = _parse_id(fields[1], path, lineno, "entity id")
        if not graph.has(eid):
            raise WorldFormatError(f"link references undeclared entity {eid}", path, lineno)
        try:
            count = int(fields[2])
        except ValueError:
            raise WorldFormatError(f"count is not a decimal integer: {fields[2]!r}", path, lineno) from None
        if count <= 0:
            raise WorldFormatError(f"count must be positive, got {count}", path, lineno)
        row = table.setdefault(mention, {})
        row[eid] = row.get(eid, 0) + count
    return LinkStats(table)


def save_links(stats: LinkStats, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mention in sorted(stats.table):
            row = stats.table[mention]
            for eid in sorted(row):
                fh.write(f"{mention}\t{eid}\t{row[eid]}\n")
