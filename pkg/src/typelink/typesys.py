"""Relations, Boolean type expressions, type axes, and entity labelling.

A relation selects the set of entities attached (via a membership edge kind)
to a root entity or to any of the root's descendants along configured
transitive edge kinds.  Discovered axes wrap a single relation and split the
world into member/nonmember; authored axes are an ordered list of named
Boolean rules over relations with an implicit catch-all "Other".
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .kg import SUBCLASS_OF, WIKIPEDIA_CATEGORY, KnowledgeGraph, WorldFormatError

DEFAULT_TRANSITIVE_KINDS = frozenset({SUBCLASS_OF, WIKIPEDIA_CATEGORY})

OTHER_TYPE = "Other"
MEMBER_TYPE = "member"
NONMEMBER_TYPE = "nonmember"


class SystemSchemaError(WorldFormatError):
    """Type-system JSON violates the schema; carries the offending node path."""

    def __init__(self, message: str, node_path: str):
        self.node_path = node_path
        super().__init__(f"{message} (at {node_path})")


@dataclass(frozen=True)
class Relation:
    """Membership rule: entities with a ``membership_edge`` edge into the
    closure of ``root`` under ``transitive_kinds``.

    The root itself is not a member unless it carries such an edge too, or
    ``include_root`` is set.
    """

    root: int
    membership_edge: str
    transitive_kinds: frozenset[str] = DEFAULT_TRANSITIVE_KINDS
    include_root: bool = False

    def key(self) -> tuple[int, str]:
        return (self.root, self.membership_edge)


class TypeExpr:
    """Base class for Boolean expression trees over relations."""

    __slots__ = ()


@dataclass(frozen=True)
class Rel(TypeExpr):
    relation: Relation


@dataclass(frozen=True)
class Not(TypeExpr):
    operand: TypeExpr


def _check_operands(operands: tuple[TypeExpr, ...], op: str) -> None:
    if len(operands) < 2:
        raise ValueError(f"{op} requires at least 2 operands, got {len(operands)}")
    for o in operands:
        if not isinstance(o, TypeExpr):
            raise TypeError(f"{op} operand must be a TypeExpr, got {type(o).__name__}")


@dataclass(frozen=True)
class And(TypeExpr):
    operands: tuple[TypeExpr, ...]

    def __post_init__(self):
        _check_operands(self.operands, "AND")


@dataclass(frozen=True)
class Or(TypeExpr):
    operands: tuple[TypeExpr, ...]

    def __post_init__(self):
        _check_operands(self.operands, "OR")


@dataclass(frozen=True)
class TypeAxis:
    """One axis of a type system.

    Exactly one of ``relation`` (discovered axis: member/nonmember) or
    ``rules`` (authored axis: ordered (type name, expression) pairs, first
    match wins, catch-all "Other") must be set.
    """

    name: str
    relation: Relation | None = None
    rules: tuple[tuple[str, TypeExpr], ...] = ()

    def __post_init__(self):
        if (self.relation is None) == (not self.rules):
            raise ValueError(f"axis {self.name!r} must have either a relation or rules")
        names = [n for n, _ in self.rules]
        if len(set(names)) != len(names):
            raise ValueError(f"axis {self.name!r} has duplicate type names")
        if OTHER_TYPE in names:
            raise ValueError(f"axis {self.name!r} may not name a rule {OTHER_TYPE!r}; it is implicit")

    @property
    def kind(self) -> str:
        return "discovered" if self.relation is not None else "authored"

    @property
    def type_names(self) -> tuple[str, ...]:
        if self.relation is not None:
            return (MEMBER_TYPE, NONMEMBER_TYPE)
        return tuple(n for n, _ in self.rules) + (OTHER_TYPE,)


@dataclass(frozen=True)
class TypeSystem:
    """Ordered collection of uniquely named type axes."""

    axes: tuple[TypeAxis, ...] = ()

    def __post_init__(self):
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("axis names must be unique within a type system")

    def __len__(self) -> int:
        return len(self.axes)

    def with_axis(self, axis: TypeAxis) -> "TypeSystem":
        return TypeSystem(self.axes + (axis,))

    @staticmethod
    def discovered(relations: Iterable[Relation], prefix: str = "axis") -> "TypeSystem":
        axes = tuple(
            TypeAxis(name=f"{prefix}{i:03d}:{r.membership_edge}:{r.root}", relation=r)
            for i, r in enumerate(relations)
        )
        return TypeSystem(axes)


# -- membership ------------------------------------------------------------


def _closure(graph: KnowledgeGraph, root: int, transitive_kinds: frozenset[str]) -> set[int]:
    """Root plus all descendants reachable downward via transitive kinds."""
    seen = {root}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for kind in transitive_kinds:
            for child in graph.children(node, kind):
                if child not in seen:
                    seen.add(child)
                    queue.append(child)
    return seen


def members(graph: KnowledgeGraph, relation: Relation) -> frozenset[int]:
    """All entities selected by a relation.  Cycle-safe; errors on an
    undeclared root."""
    graph.require(relation.root)
    targets = _closure(graph, relation.root, relation.transitive_kinds)
    out: set[int] = set()
    for target in targets:
        out.update(graph.children(target, relation.membership_edge))
    if relation.include_root:
        out.add(relation.root)
    return frozenset(out)


class MembershipCache:
    """Per-graph cache of relation membership bitsets and axis label arrays.

    Built once, then read-only; search and the designer service evaluate
    thousands of axis subsets and need O(1) membership tests.
    """

    def __init__(self, graph: KnowledgeGraph):
        self.graph = graph
        self._bitsets: dict[Relation, np.ndarray] = {}
        self._axis_labels: dict[TypeAxis, np.ndarray] = {}

    def members(self, relation: Relation) -> frozenset[int]:
        bits = self.bitset(relation)
        return frozenset(self.graph.id_at(i) for i in np.flatnonzero(bits))

    def bitset(self, relation: Relation) -> np.ndarray:
        """Boolean membership over the graph's dense entity index."""
        cached = self._bitsets.get(relation)
        if cached is None:
            bits = np.zeros(self.graph.n_entities, dtype=bool)
            for eid in members(self.graph, relation):
                bits[self.graph.index_of(eid)] = True
            bits.setflags(write=False)
            self._bitsets[relation] = cached = bits
        return cached

    def expr_bitset(self, expr: TypeExpr) -> np.ndarray:
        if isinstance(expr, Rel):
            return self.bitset(expr.relation)
        if isinstance(expr, Not):
            return ~self.expr_bitset(expr.operand)
        if isinstance(expr, And):
            return np.logical_and.reduce([self.expr_bitset(o) for o in expr.operands])
        if isinstance(expr, Or):
            return np.logical_or.reduce([self.expr_bitset(o) for o in expr.operands])
        raise TypeError(f"unknown expression node {type(expr).__name__}")

    def axis_labels(self, axis: TypeAxis) -> np.ndarray:
        """Type index per entity (dense order) for one axis.

        Discovered axes: 0=member, 1=nonmember.  Authored axes: index of the
        first matching rule, else the final catch-all index.
        """
        cached = self._axis_labels.get(axis)
        if cached is not None:
            return cached
        if axis.relation is not None:
            labels = np.where(self.bitset(axis.relation), 0, 1).astype(np.int32)
        else:
            other = len(axis.rules)
            labels = np.full(self.graph.n_entities, other, dtype=np.int32)
            assigned = np.zeros(self.graph.n_entities, dtype=bool)
            for i, (_, expr) in enumerate(axis.rules):
                mask = self.expr_bitset(expr) & ~assigned
                labels[mask] = i
                assigned |= mask
        labels.setflags(write=False)
        self._axis_labels[axis] = labels
        return labels

    def system_labels(self, system: TypeSystem) -> np.ndarray:
        """(n_axes, n_entities) matrix of type indices."""
        if not system.axes:
            return np.zeros((0, self.graph.n_entities), dtype=np.int32)
        return np.stack([self.axis_labels(a) for a in system.axes])

    def label_entity(self, system: TypeSystem, eid: int) -> tuple[str, ...]:
        idx = self.graph.index_of(eid)
        return tuple(
            axis.type_names[self.axis_labels(axis)[idx]] for axis in system.axes
        )


def eval_expr(graph: KnowledgeGraph, expr: TypeExpr, eid: int, cache: MembershipCache | None = None) -> bool:
    """Standard Boolean semantics of an expression for one entity."""
    cache = cache or MembershipCache(graph)
    graph.require(eid)
    return bool(cache.expr_bitset(expr)[graph.index_of(eid)])


def label_entity(
    graph: KnowledgeGraph, system: TypeSystem, eid: int, cache: MembershipCache | None = None
) -> tuple[str, ...]:
    """One type name per axis: member/nonmember for discovered axes, first
    matching rule (declared order) else "Other" for authored axes."""
    cache = cache or MembershipCache(graph)
    graph.require(eid)
    return cache.label_entity(system, eid)


# -- JSON schema -------------------------------------------------------------

_REL_KEYS = {"root", "edge", "transitive", "include_root"}


def _relation_to_json(r: Relation) -> dict:
    out: dict = {"root": r.root, "edge": r.membership_edge}
    if r.transitive_kinds != DEFAULT_TRANSITIVE_KINDS:
        out["transitive"] = sorted(r.transitive_kinds)
    if r.include_root:
        out["include_root"] = True
    return out


def relation_from_json(data: object, node_path: str = "relation") -> Relation:
    if not isinstance(data, dict):
        raise SystemSchemaError("relation must be an object", node_path)
    unknown = set(data) - _REL_KEYS
    if unknown:
        raise SystemSchemaError(f"unknown relation fields {sorted(unknown)}", node_path)
    if "root" not in data or "edge" not in data:
        raise SystemSchemaError("relation requires 'root' and 'edge'", node_path)
    root = data["root"]
    if not isinstance(root, int) or root < 0:
        raise SystemSchemaError(f"relation root must be a non-negative integer, got {root!r}", node_path)
    edge = data["edge"]
    if not isinstance(edge, str) or not edge:
        raise SystemSchemaError("relation edge must be a non-empty string", node_path)
    transitive = data.get("transitive")
    if transitive is None:
        kinds = DEFAULT_TRANSITIVE_KINDS
    else:
        if not isinstance(transitive, list) or not all(isinstance(k, str) for k in transitive):
            raise SystemSchemaError("'transitive' must be a list of edge kinds", node_path)
        kinds = frozenset(transitive)
    include_root = data.get("include_root", False)
    if not isinstance(include_root, bool):
        raise SystemSchemaError("'include_root' must be a boolean", node_path)
    return Relation(root=root, membership_edge=edge, transitive_kinds=kinds, include_root=include_root)


def _expr_to_json(expr: TypeExpr) -> dict:
    if isinstance(expr, Rel):
        out = _relation_to_json(expr.relation)
        out["op"] = "rel"
        return out
    if isinstance(expr, Not):
        return {"op": "not", "arg": _expr_to_json(expr.operand)}
    if isinstance(expr, (And, Or)):
        op = "and" if isinstance(expr, And) else "or"
        return {"op": op, "args": [_expr_to_json(o) for o in expr.operands]}
    raise TypeError(f"unknown expression node {type(expr).__name__}")


def expr_from_json(data: object, node_path: str = "expr") -> TypeExpr:
    if not isinstance(data, dict):
        raise SystemSchemaError("expression must be an object", node_path)
    op = data.get("op")
    if op == "rel":
        rel = {k: v for k, v in data.items() if k != "op"}
        return Rel(relation_from_json(rel, node_path))
    if op == "not":
        unknown = set(data) - {"op", "arg"}
        if unknown:
            raise SystemSchemaError(f"unknown fields {sorted(unknown)} on 'not'", node_path)
        if "arg" not in data:
            raise SystemSchemaError("'not' requires a single 'arg'", node_path)
        return Not(expr_from_json(data["arg"], f"{node_path}.arg"))
    if op in ("and", "or"):
        unknown = set(data) - {"op", "args"}
        if unknown:
            raise SystemSchemaError(f"unknown fields {sorted(unknown)} on {op!r}", node_path)
        args = data.get("args")
        if not isinstance(args, list) or len(args) < 2:
            raise SystemSchemaError(f"{op!r} requires a list of at least 2 'args'", node_path)
        operands = tuple(expr_from_json(a, f"{node_path}.args[{i}]") for i, a in enumerate(args))
        return And(operands) if op == "and" else Or(operands)
    raise SystemSchemaError(f"unknown expression op {op!r}", node_path)


def serialize_system(system: TypeSystem) -> dict:
    axes = []
    for axis in system.axes:
        if axis.relation is not None:
            axes.append({"name": axis.name, "kind": "discovered", "relation": _relation_to_json(axis.relation)})
        else:
            axes.append(
                {
                    "name": axis.name,
                    "kind": "authored",
                    "rules": [{"type": n, "expr": _expr_to_json(e)} for n, e in axis.rules],
                }
            )
    return {"axes": axes}


def parse_system(data: object) -> TypeSystem:
    """Parse a type-system JSON object; schema errors carry the node path."""
    if not isinstance(data, dict):
        raise SystemSchemaError("type system must be an object", "$")
    unknown = set(data) - {"axes"}
    if unknown:
        raise SystemSchemaError(f"unknown fields {sorted(unknown)}", "$")
    raw_axes = data.get("axes")
    if not isinstance(raw_axes, list):
        raise SystemSchemaError("'axes' must be a list", "$.axes")
    axes: list[TypeAxis] = []
    for i, raw in enumerate(raw_axes):
        path = f"$.axes[{i}]"
        if not isinstance(raw, dict):
            raise SystemSchemaError("axis must be an object", path)
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            raise SystemSchemaError("axis requires a non-empty 'name'", path)
        kind = raw.get("kind")
        if kind == "discovered":
            unknown = set(raw) - {"name", "kind", "relation"}
            if unknown:
                raise SystemSchemaError(f"unknown fields {sorted(unknown)}", path)
            if "relation" not in raw:
                raise SystemSchemaError("discovered axis requires 'relation'", path)
            axes.append(TypeAxis(name=name, relation=relation_from_json(raw["relation"], f"{path}.relation")))
        elif kind == "authored":
            unknown = set(raw) - {"name", "kind", "rules"}
            if unknown:
                raise SystemSchemaError(f"unknown fields {sorted(unknown)}", path)
            rules_raw = raw.get("rules")
            if not isinstance(rules_raw, list):
                raise SystemSchemaError("authored axis requires a 'rules' list", path)
            rules: list[tuple[str, TypeExpr]] = []
            for j, rule in enumerate(rules_raw):
                rpath = f"{path}.rules[{j}]"
                if not isinstance(rule, dict) or set(rule) - {"type", "expr"}:
                    raise SystemSchemaError("rule must be an object with 'type' and 'expr'", rpath)
                tname = rule.get("type")
                if not isinstance(tname, str) or not tname:
                    raise SystemSchemaError("rule requires a non-empty 'type' name", rpath)
                rules.append((tname, expr_from_json(rule.get("expr"), f"{rpath}.expr")))
            try:
                axes.append(TypeAxis(name=name, rules=tuple(rules)))
            except ValueError as exc:
                raise SystemSchemaError(str(exc), path) from None
        else:
            raise SystemSchemaError(f"axis kind must be 'discovered' or 'authored', got {kind!r}", path)
    try:
        return TypeSystem(tuple(axes))
    except ValueError as exc:
        raise SystemSchemaError(str(exc), "$.axes") from None


def save_system(system: TypeSystem, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(serialize_system(system), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_system(path: str) -> TypeSystem:
    with open(path, encoding="utf-8") as fh:
        return parse_system(json.load(fh))


# -- relation pools ----------------------------------------------------------


def enumerate_relations(
    graph: KnowledgeGraph,
    kinds: Sequence[str] = ("instance_of", "wikipedia_category"),
    min_children: int = 2,
    max_roots: int | None = None,
    rank_by: str = "children",
    stats=None,
) -> list[Relation]:
    """Candidate (root, edge kind) relations ranked by commonness.

    ``rank_by`` is "children" (number of direct children, default) or
    "links" (total link-count mass of the root in ``stats``); the commonness
    metric is a knob because either is defensible.
    """
    counts = graph.parent_counts(kinds)
    pairs = [(parent, kind) for (parent, kind), n in counts.items() if n >= min_children]
    if rank_by == "children":
        rank = {pk: counts[pk] for pk in pairs}
    elif rank_by == "links":
        if stats is None:
            raise ValueError("rank_by='links' requires link stats")
        mass: dict[int, int] = {}
        for mention in stats.mentions():
            for eid, c in stats.table[mention].items():
                mass[eid] = mass.get(eid, 0) + c
        rank = {(parent, kind): mass.get(parent, 0) for parent, kind in pairs}
    else:
        raise ValueError(f"unknown rank_by {rank_by!r}")
    pairs.sort(key=lambda pk: (-rank[pk], pk[0], pk[1]))
    if max_roots is not None:
        pairs = pairs[:max_roots]
    return [Relation(root=parent, membership_edge=kind) for parent, kind in pairs]


def save_relations(relations: Sequence[Relation], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"relations": [_relation_to_json(r) for r in relations]}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_relations(path: str) -> list[Relation]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or set(data) - {"relations"}:
        raise SystemSchemaError("pool file must be {'relations': [...]}", "$")
    raw = data.get("relations")
    if not isinstance(raw, list):
        raise SystemSchemaError("'relations' must be a list", "$.relations")
    return [relation_from_json(r, f"$.relations[{i}]") for i, r in enumerate(raw)]
