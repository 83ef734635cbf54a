"""HTTP/JSON service for interactive type-system design sessions.

A session pins an immutable world (graph, link stats, corpus) and holds the
current authored rule set.  Rule evaluations answer with oracle statistics
and a per-gold-type error table, the feedback loop a human designer
iterates against.  All evaluation responses are pure functions of
(world, request) up to the timing field.

The objective J reported here fixes the learnability factor at 1.0: rule
evaluation must stay interactive, and for deltas such as adding a duplicate
axis the learnability term cancels anyway.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__
from .evalcore import (
    AnnotatedCorpus,
    ObjectiveConfig,
    error_analysis,
    load_corpus,
    objective_j,
    oracle_prediction,
    resolve_corpus,
)
from .kg import KnowledgeGraph, LinkStats, WorldFormatError, load_graph, load_links
from .learnability import learnability
from .typesys import (
    MembershipCache,
    Relation,
    SystemSchemaError,
    TypeAxis,
    TypeSystem,
    parse_system,
    relation_from_json,
    serialize_system,
)

MAX_ERROR_GROUPS = 50
INLINE_ERROR_ROWS = 10


def _error(status: int, code: str, message: str, path: str | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"code": code, "message": message, "path": path}},
    )


@dataclass
class EvaluationOutcome:
    body: dict
    error_rows: list[dict]


def evaluate_system(
    graph: KnowledgeGraph,
    stats: LinkStats,
    corpus: AnnotatedCorpus,
    system: TypeSystem,
    lam: float = ObjectiveConfig().lam,
    cache: MembershipCache | None = None,
    resolved=None,
) -> EvaluationOutcome:
    """Oracle statistics plus the per-gold-type error table for a rule set.

    The batch CLI and the service both report through this function, so
    their numbers agree byte for byte.
    """
    cache = cache or MembershipCache(graph)
    resolved = resolved if resolved is not None else resolve_corpus(corpus, stats)
    label_matrix = cache.system_labels(system)
    hits = 0
    total = 0
    gold_hits = 0
    unlinkable = 0
    predictions: dict[tuple[str, int], int] = {}
    for r in resolved:
        if not r.linkable:
            unlinkable += 1
            continue
        total += 1
        gold_hits += r.gold_present
        counts = dict(zip(r.candidates, r.counts))
        labels = {e: tuple(label_matrix[:, graph.index_of(e)]) for e in r.candidates}
        if graph.has(r.gold):
            labels[r.gold] = tuple(label_matrix[:, graph.index_of(r.gold)])
        else:
            labels.setdefault(r.gold, ())
        pred = oracle_prediction(r, labels, counts)
        predictions[(corpus.documents[r.doc_idx].doc_id, r.mention_idx)] = pred
        hits += pred == r.gold
    greedy_hits = sum(1 for r in resolved if r.linkable and r.greedy_prediction == r.gold)
    s_greedy = greedy_hits / total if total else 0.0
    s_oracle = hits / total if total else 0.0
    j = objective_j(s_oracle, s_greedy, 1.0, len(system.axes), ObjectiveConfig(lam=lam))

    rows = [r for r in error_analysis(predictions, corpus, graph, system, stats, cache=cache) if r.errors]
    error_rows = [row.as_dict(graph) for row in rows[:MAX_ERROR_GROUPS]]

    member_counts = []
    for axis in system.axes:
        labels_arr = cache.axis_labels(axis)
        counts_by_type = {name: int((labels_arr == i).sum()) for i, name in enumerate(axis.type_names)}
        member_counts.append({"axis": axis.name, "types": counts_by_type})

    body = {
        "s_greedy": {"hits": greedy_hits, "total": total, "value": s_greedy},
        "s_oracle": {"hits": hits, "total": total, "value": s_oracle},
        "j": j,
        "lambda": lam,
        "axis_count": len(system.axes),
        "gold_recall": {"hits": gold_hits, "total": total, "value": gold_hits / total if total else 0.0},
        "unlinkable": unlinkable,
        "axis_member_counts": member_counts,
        "error_groups": len(rows),
        "errors": error_rows[:INLINE_ERROR_ROWS],
    }
    return EvaluationOutcome(body=body, error_rows=error_rows)


class DesignSession:
    """One immutable world plus the mutable authored system."""

    def __init__(self, session_id: str, graph: KnowledgeGraph, stats: LinkStats, corpus: AnnotatedCorpus, lam: float):
        self.session_id = session_id
        self.graph = graph
        self.stats = stats
        self.corpus = corpus
        self.lam = lam
        self.cache = MembershipCache(graph)
        self.system = TypeSystem()
        self.version = 0
        self.lock = threading.Lock()
        self._eval_cache: dict[TypeSystem, EvaluationOutcome] = {}
        self._relation_list: list[dict] | None = None
        self._resolved = resolve_corpus(corpus, stats)

    def evaluate(self, system: TypeSystem) -> EvaluationOutcome:
        cached = self._eval_cache.get(system)
        if cached is None:
            cached = evaluate_system(
                self.graph, self.stats, self.corpus, system, lam=self.lam, cache=self.cache, resolved=self._resolved
            )
            self._eval_cache[system] = cached
        return cached

    def relations(self) -> list[dict]:
        if self._relation_list is None:
            items = []
            for (parent, kind), n_children in sorted(self.graph.parent_counts(self.graph.kinds).items()):
                rel = Relation(root=parent, membership_edge=kind)
                members = int(self.cache.bitset(rel).sum())
                items.append(
                    {
                        "root": parent,
                        "label": self.graph.entities.get(parent, ""),
                        "edge": kind,
                        "children": n_children,
                        "members": members,
                    }
                )
            items.sort(key=lambda r: (-r["members"], r["root"], r["edge"]))
            self._relation_list = items
        return self._relation_list


def _whatif_axis_name(system: TypeSystem, relation: Relation) -> str:
    base = f"whatif:{relation.membership_edge}:{relation.root}"
    name = base
    suffix = 1
    existing = {a.name for a in system.axes}
    while name in existing:
        suffix += 1
        name = f"{base}#{suffix}"
    return name


def create_app(
    default_world: dict | None = None,
    lam: float = ObjectiveConfig().lam,
    whatif_learnability_runs: int = 2,
) -> FastAPI:
    """Build the service; ``default_world`` maps graph/links/corpus paths
    used when a session request omits them."""
    app = FastAPI(title="typelink designer service", version=__version__)
    state = {"sessions": {}, "counter": 0, "lock": threading.Lock()}

    def get_session(session_id: str) -> DesignSession | None:
        return state["sessions"].get(session_id)

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        try:
            body = await request.json() if await request.body() else {}
        except json.JSONDecodeError:
            return _error(400, "bad_json", "request body is not valid JSON")
        paths = dict(default_world or {})
        paths.update({k: v for k, v in body.items() if k in ("graph", "links", "corpus")})
        missing = [k for k in ("graph", "links", "corpus") if not paths.get(k)]
        if missing:
            return _error(400, "missing_world", f"world paths required: {', '.join(missing)}")
        try:
            graph = load_graph(paths["graph"])
            stats = load_links(paths["links"], graph)
            corpus = load_corpus(paths["corpus"])
        except WorldFormatError as exc:
            return _error(400, "bad_world", str(exc), path=exc.path)
        with state["lock"]:
            state["counter"] += 1
            session_id = f"s{state['counter']}"
            lam_value = float(body.get("lambda", lam))
            session = DesignSession(session_id, graph, stats, corpus, lam_value)
            state["sessions"][session_id] = session
        return {
            "session_id": session_id,
            "entities": graph.n_entities,
            "edges": len(graph.edges),
            "mentions": corpus.n_mentions,
            "documents": len(corpus.documents),
            "version": session.version,
        }

    @app.get("/sessions/{session_id}")
    def session_info(session_id: str):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        return {
            "session_id": session_id,
            "version": session.version,
            "system": serialize_system(session.system),
            "entities": session.graph.n_entities,
            "mentions": session.corpus.n_mentions,
        }

    @app.put("/sessions/{session_id}/rules")
    async def put_rules(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        try:
            data = await request.json()
        except json.JSONDecodeError:
            return _error(400, "bad_json", "request body is not valid JSON")
        try:
            system = parse_system(data)
        except SystemSchemaError as exc:
            return _error(400, "bad_system", str(exc), path=exc.node_path)
        for axis in system.axes:
            for rel in _axis_relations(axis):
                if not session.graph.has(rel.root):
                    return _error(400, "unknown_root", f"axis {axis.name!r} references unknown entity {rel.root}")
        t0 = time.perf_counter()
        outcome = session.evaluate(system)
        with session.lock:
            session.system = system
            session.version += 1
            version = session.version
        return {"version": version, **outcome.body, "timing_ms": (time.perf_counter() - t0) * 1e3}

    @app.post("/sessions/{session_id}/whatif")
    async def whatif(session_id: str, request: Request):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        try:
            data = await request.json()
        except json.JSONDecodeError:
            return _error(400, "bad_json", "request body is not valid JSON")
        try:
            relation = relation_from_json(data, "$")
        except SystemSchemaError as exc:
            return _error(400, "bad_relation", str(exc), path=exc.node_path)
        if not session.graph.has(relation.root):
            return _error(400, "unknown_root", f"unknown root entity {relation.root}")
        t0 = time.perf_counter()
        base_system = session.system
        axis = TypeAxis(name=_whatif_axis_name(base_system, relation), relation=relation)
        base = session.evaluate(base_system)
        extended = session.evaluate(base_system.with_axis(axis))
        learn = learnability(
            [relation], session.corpus, session.graph, master_seed=0, runs=whatif_learnability_runs, cache=session.cache
        )
        return {
            "version": session.version,
            "delta_s_oracle": extended.body["s_oracle"]["value"] - base.body["s_oracle"]["value"],
            "delta_j": extended.body["j"] - base.body["j"],
            "learnability_estimate": learn.axes[0].auc_mean,
            "members": int(session.cache.bitset(relation).sum()),
            "timing_ms": (time.perf_counter() - t0) * 1e3,
        }

    @app.get("/sessions/{session_id}/relations")
    def relations(session_id: str, query: str = "", limit: int = 50):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        needle = query.lower()
        items = [
            r
            for r in session.relations()
            if needle in r["label"].lower() or needle in r["edge"].lower() or needle == str(r["root"])
        ] if needle else session.relations()
        return {"relations": items[: max(1, min(limit, 200))], "total": len(items)}

    @app.get("/sessions/{session_id}/errors")
    def errors(session_id: str, group: str = "", page: int = 0, page_size: int = 10):
        session = get_session(session_id)
        if session is None:
            return _error(404, "unknown_session", f"no session {session_id!r}")
        outcome = session.evaluate(session.system)
        rows = outcome.error_rows
        if group:
            rows = [r for r in rows if group in r["gold_types"]]
        page_size = max(1, min(page_size, MAX_ERROR_GROUPS))
        start = max(0, page) * page_size
        return {
            "version": session.version,
            "total_groups": len(rows),
            "page": page,
            "page_size": page_size,
            "rows": rows[start : start + page_size],
        }

    return app


def _axis_relations(axis: TypeAxis) -> list[Relation]:
    if axis.relation is not None:
        return [axis.relation]
    out: list[Relation] = []

    def walk(expr) -> None:
        from .typesys import And, Not, Or, Rel

        if isinstance(expr, Rel):
            out.append(expr.relation)
        elif isinstance(expr, Not):
            walk(expr.operand)
        elif isinstance(expr, (And, Or)):
            for o in expr.operands:
                walk(o)

    for _, expr in axis.rules:
        walk(expr)
    return out


def serve(
    graph: str | None = None,
    links: str | None = None,
    corpus: str | None = None,
    host: str = "127.0.0.1",
    port: int = 8000,
    lam: float = ObjectiveConfig().lam,
) -> None:
    """Run the designer service with uvicorn (handles signals for graceful
    shutdown)."""
    import uvicorn

    default_world = None
    if graph and links and corpus:
        default_world = {"graph": graph, "links": links, "corpus": corpus}
    app = create_app(default_world=default_world, lam=lam)
    uvicorn.run(app, host=host, port=port)
