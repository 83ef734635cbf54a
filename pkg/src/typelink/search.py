"""Discrete search over candidate type axes: greedy/beam, cross-entropy
method, microbial genetic algorithm, and a random-subset baseline.

All methods maximise the same objective J through a shared, memoised
``SubsetEvaluator``.  The evaluator vectorises oracle pruning: every
(mention, candidate) pair carries a bitmask of axes on which the candidate's
type differs from gold's, so a candidate survives pruning for a subset mask
``s`` iff ``diff & s == 0``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .evalcore import (
    Accuracy,
    AnnotatedCorpus,
    ObjectiveConfig,
    objective_j,
    resolve_corpus,
)
from .kg import KnowledgeGraph, LinkStats
from .learnability import LearnabilityScore
from .typesys import MembershipCache, Relation, TypeAxis, TypeSystem

# seed-stream namespaces so the methods draw from unrelated RNG streams
_CEM_TAG = 1
_GA_TAG = 2
_RANDOM_TAG = 3

LEARNABILITY_FLOOR = 0.51  # axes at or below chance stay out of the pool

_WORD_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class SearchConfig:
    """Hyperparameters for all search methods (method-specific fields are
    ignored by the others).  Defaults are full-scale settings; desk-scale
    runs usually shrink the stochastic budgets."""

    method: str = "greedy"
    beam_width: int = 1
    # cross-entropy method
    cem_samples: int = 1000  # masks sampled per iteration
    cem_elite: int = 200  # winners kept for the refit
    p_start: float | None = None  # default: expected_size / pool size
    expected_size: int = 50
    binary_eps: float = 0.02
    cem_max_iters: int = 500
    # genetic algorithm
    generations: int = 200
    population: int = 1000
    mutation_prob: float = 0.5
    crossover_prob: float = 0.2
    # shared
    lam: float = ObjectiveConfig().lam
    seed: int = 0
    max_evaluations: int | None = None

    def __post_init__(self):
        if self.cem_elite > self.cem_samples:
            raise ValueError("cem_elite must not exceed cem_samples")
        for name in ("mutation_prob", "crossover_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.p_start is not None and not 0.0 < self.p_start < 1.0:
            raise ValueError(f"p_start must be in (0, 1), got {self.p_start}")

    def objective(self) -> ObjectiveConfig:
        return ObjectiveConfig(lam=self.lam)


@dataclass(frozen=True)
class CandidatePool:
    """Filtered candidate axes with precomputed membership bitsets and
    cached per-axis learnability."""

    relations: tuple[Relation, ...]
    bitsets: np.ndarray  # (n_axes, n_entities) bool
    learnability: np.ndarray  # (n_axes,) float

    def __post_init__(self):
        keys = [r.key() for r in self.relations]
        if len(set(keys)) != len(keys):
            raise ValueError("pool contains duplicate (root, edge) relations")
        if len(self.relations) != self.bitsets.shape[0] or len(self.relations) != len(self.learnability):
            raise ValueError("pool arrays disagree on axis count")

    def __len__(self) -> int:
        return len(self.relations)

    def subset_system(self, indices: Iterable[int], graph: KnowledgeGraph | None = None) -> TypeSystem:
        """Discovered-axis type system for a subset of pool indices."""
        rels = [self.relations[i] for i in sorted(indices)]
        if graph is None:
            return TypeSystem.discovered(rels)
        names: list[str] = []
        seen: dict[str, int] = {}
        for r in rels:
            base = f"{r.membership_edge}:{graph.entities.get(r.root, str(r.root))}"
            seen[base] = seen.get(base, 0) + 1
            names.append(base if seen[base] == 1 else f"{base}#{seen[base]}")
        return TypeSystem(tuple(TypeAxis(name=n, relation=r) for n, r in zip(names, rels)))


def build_pool(
    graph: KnowledgeGraph,
    relations: Sequence[Relation],
    learnability: LearnabilityScore | Sequence[float] | None = None,
    cache: MembershipCache | None = None,
    floor: float = LEARNABILITY_FLOOR,
) -> CandidatePool:
    """Assemble a pool, dropping axes whose learnability is at chance.

    ``learnability=None`` assigns 1.0 everywhere (for callers that study pure
    oracle behaviour); otherwise per-axis means are cached in the pool.
    """
    cache = cache or MembershipCache(graph)
    if learnability is None:
        scores = [1.0] * len(relations)
    elif isinstance(learnability, LearnabilityScore):
        by_rel = {a.relation: a.auc_mean for a in learnability.axes}
        scores = [by_rel[r] for r in relations]
    else:
        scores = list(learnability)
        if len(scores) != len(relations):
            raise ValueError("learnability scores must match relations")
    kept = [(r, s) for r, s in zip(relations, scores) if s > floor]
    if not kept:
        return CandidatePool(
            relations=(), bitsets=np.zeros((0, graph.n_entities), dtype=bool), learnability=np.zeros(0)
        )
    rels = tuple(r for r, _ in kept)
    bitsets = np.stack([cache.bitset(r) for r in rels])
    return CandidatePool(relations=rels, bitsets=bitsets, learnability=np.array([s for _, s in kept]))


@dataclass(frozen=True)
class EvalOutcome:
    j: float
    oracle: Accuracy
    learnability: float


class SubsetEvaluator:
    """Memoised objective evaluation for axis-subset masks.

    ``requested`` counts every objective evaluation a search asked for
    (including memo hits, matching how search budgets are usually quoted);
    ``computed`` counts cache misses.  Reporting helpers use ``peek`` which
    does not touch the counters.
    """

    def __init__(
        self,
        pool: CandidatePool,
        corpus: AnnotatedCorpus,
        stats: LinkStats,
        graph: KnowledgeGraph,
        config: ObjectiveConfig = ObjectiveConfig(),
    ):
        self.pool = pool
        self.config = config
        n_axes = len(pool)
        self._n_words = max(1, (n_axes + 63) // 64)

        resolved = [r for r in resolve_corpus(corpus, stats) if r.linkable]
        self.total = len(resolved)

        diff_rows: list[np.ndarray] = []
        ranks: list[int] = []
        starts: list[int] = []
        gold_ranks: list[int] = []
        pos = 0
        for r in resolved:
            if not r.gold_present:
                continue  # constant miss under every system
            starts.append(pos)
            gold_ranks.append(r.candidates.index(r.gold))
            gold_bits = pool.bitsets[:, graph.index_of(r.gold)] if n_axes else None
            for rank, e in enumerate(r.candidates):
                words = np.zeros(self._n_words, dtype=np.uint64)
                if n_axes:
                    diff = gold_bits != pool.bitsets[:, graph.index_of(e)]
                    for axis in np.flatnonzero(diff):
                        words[axis >> 6] |= np.uint64(1) << np.uint64(int(axis) & 63)
                diff_rows.append(words)
                ranks.append(rank)
                pos += 1
        self._diff = (
            np.stack(diff_rows) if diff_rows else np.zeros((0, self._n_words), dtype=np.uint64)
        )
        self._ranks = np.array(ranks, dtype=np.int64)
        self._starts = np.array(starts, dtype=np.int64)
        self._gold_ranks = np.array(gold_ranks, dtype=np.int64)

        self._memo: dict[int, EvalOutcome] = {}
        self.requested = 0
        self.computed = 0
        self._s_greedy_value = self._compute(0).oracle.value  # empty mask = no pruning

    @property
    def s_greedy(self) -> Accuracy:
        return self._memo[0].oracle

    # -- mask helpers -----------------------------------------------------

    def mask_of(self, indices: Iterable[int]) -> int:
        mask = 0
        for i in indices:
            mask |= 1 << int(i)
        return mask

    @staticmethod
    def indices_of(mask: int) -> tuple[int, ...]:
        out = []
        i = 0
        while mask:
            if mask & 1:
                out.append(i)
            mask >>= 1
            i += 1
        return tuple(out)

    def _mask_words(self, mask: int) -> np.ndarray:
        words = np.zeros(self._n_words, dtype=np.uint64)
        for w in range(self._n_words):
            words[w] = (mask >> (64 * w)) & _WORD_MASK
        return words

    # -- evaluation -------------------------------------------------------

    def oracle_hits(self, mask: int) -> int:
        if len(self._starts) == 0:
            return 0
        pruned_out = (self._diff & self._mask_words(mask)).any(axis=1)
        values = np.where(pruned_out, np.iinfo(np.int64).max, self._ranks)
        min_ranks = np.minimum.reduceat(values, self._starts)
        return int((min_ranks == self._gold_ranks).sum())

    def _compute(self, mask: int) -> EvalOutcome:
        outcome = self._memo.get(mask)
        if outcome is not None:
            return outcome
        self.computed += 1
        oracle = Accuracy(self.oracle_hits(mask), self.total)
        indices = self.indices_of(mask)
        learn = float(self.pool.learnability[list(indices)].mean()) if indices else 1.0
        sg = self._memo[0].oracle.value if 0 in self._memo else oracle.value
        j = objective_j(oracle.value, sg, learn, len(indices), self.config)
        outcome = EvalOutcome(j=j, oracle=oracle, learnability=learn)
        self._memo[mask] = outcome
        return outcome

    def evaluate(self, subset: int | Iterable[int]) -> EvalOutcome:
        mask = subset if isinstance(subset, int) else self.mask_of(subset)
        self.requested += 1
        return self._compute(mask)

    def peek(self, subset: int | Iterable[int]) -> EvalOutcome:
        """Evaluation for reporting; does not count against search budgets."""
        mask = subset if isinstance(subset, int) else self.mask_of(subset)
        return self._compute(mask)

    def budget_left(self, config: SearchConfig) -> bool:
        return config.max_evaluations is None or self.requested < config.max_evaluations


def evaluate_subset(
    pool: CandidatePool,
    subset: Iterable[int],
    corpus: AnnotatedCorpus,
    stats: LinkStats,
    graph: KnowledgeGraph,
    config: ObjectiveConfig = ObjectiveConfig(),
) -> EvalOutcome:
    """One-shot subset evaluation (builds a throwaway evaluator)."""
    ev = SubsetEvaluator(pool, corpus, stats, graph, config)
    return ev.evaluate(ev.mask_of(subset))


# -- results -----------------------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    step: int
    j: float
    s_oracle: float
    learnability: float
    size: int
    axes: tuple[int, ...]


@dataclass
class SearchResult:
    method: str
    selected: tuple[int, ...]
    relations: tuple[Relation, ...]
    j: float
    accuracy: Accuracy
    learnability: float
    trace: list[TraceRow]
    requested_evaluations: int
    computed_evaluations: int
    wall_seconds: float
    seed: int

    def to_system(self, pool: CandidatePool, graph: KnowledgeGraph | None = None) -> TypeSystem:
        return pool.subset_system(self.selected, graph)


def _trace_row(step: int, evaluator: SubsetEvaluator, mask: int) -> TraceRow:
    out = evaluator.peek(mask)
    return TraceRow(
        step=step,
        j=out.j,
        s_oracle=out.oracle.value,
        learnability=out.learnability,
        size=bin(mask).count("1"),
        axes=evaluator.indices_of(mask),
    )


def _result(
    method: str,
    evaluator: SubsetEvaluator,
    mask: int,
    trace: list[TraceRow],
    t0: float,
    seed: int,
) -> SearchResult:
    out = evaluator.peek(mask)
    indices = evaluator.indices_of(mask)
    return SearchResult(
        method=method,
        selected=indices,
        relations=tuple(evaluator.pool.relations[i] for i in indices),
        j=out.j,
        accuracy=out.oracle,
        learnability=out.learnability,
        trace=trace,
        requested_evaluations=evaluator.requested,
        computed_evaluations=evaluator.computed,
        wall_seconds=time.perf_counter() - t0,
        seed=seed,
    )


# -- greedy / beam -----------------------------------------------------------


def _beam_key(evaluator: SubsetEvaluator, mask: int) -> tuple:
    out = evaluator.peek(mask)
    return (-out.j, bin(mask).count("1"), evaluator.indices_of(mask))


def greedy_beam_core(evaluator: SubsetEvaluator, config: SearchConfig) -> tuple[int, list[TraceRow]]:
    n = len(evaluator.pool)
    b = max(1, config.beam_width)
    beam = [0]
    trace = [_trace_row(0, evaluator, 0)]
    for step in range(1, n + 1):
        candidates: set[int] = set(beam)
        for mask in beam:
            for axis in range(n):
                bit = 1 << axis
                if mask & bit:
                    continue
                if not evaluator.budget_left(config):
                    break
                candidates.add(mask | bit)
                evaluator.evaluate(mask | bit)
        new_beam = sorted(candidates, key=lambda m: _beam_key(evaluator, m))[:b]
        if set(new_beam) == set(beam):
            break
        beam = new_beam
        trace.append(_trace_row(step, evaluator, beam[0]))
        if not evaluator.budget_left(config):
            break
    best = min(beam, key=lambda m: _beam_key(evaluator, m))
    return best, trace


def greedy_beam(
    pool: CandidatePool,
    corpus: AnnotatedCorpus,
    stats: LinkStats,
    graph: KnowledgeGraph,
    config: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Iteratively add the axis that most improves J; with beam_width > 1 the
    top-b states are retained.  Stops when no extension improves the beam, so
    the best-member J trace is non-decreasing."""
    t0 = time.perf_counter()
    evaluator = SubsetEvaluator(pool, corpus, stats, graph, config.objective())
    best, trace = greedy_beam_core(evaluator, config)
    method = "greedy" if config.beam_width <= 1 else "beam"
    return _result(method, evaluator, best, trace, t0, config.seed)


# -- cross-entropy method ------------------------------------------------------


def cem_core(evaluator: SubsetEvaluator, config: SearchConfig) -> tuple[int, list[TraceRow], int]:
    """Returns (thresholded final mask, trace, iterations run)."""
    n = len(evaluator.pool)
    if n == 0:
        return 0, [_trace_row(0, evaluator, 0)], 0
    p_start = config.p_start if config.p_start is not None else min(0.5, config.expected_size / n)
    p = np.full(n, p_start)
    trace: list[TraceRow] = []
    iters = 0
    for t in range(config.cem_max_iters):
        if not evaluator.budget_left(config):
            break
        iters += 1
        rng = np.random.default_rng([config.seed, _CEM_TAG, t])
        samples = rng.random((config.cem_samples, n)) < p
        masks = [evaluator.mask_of(int(i) for i in np.flatnonzero(row)) for row in samples]
        order = sorted(range(len(masks)), key=lambda i: (-evaluator.evaluate(masks[i]).j, i))
        elites = samples[order[: config.cem_elite]]
        p = elites.mean(axis=0)
        trace.append(_trace_row(t + 1, evaluator, masks[order[0]]))
        if np.all((p <= config.binary_eps) | (p >= 1.0 - config.binary_eps)):
            break
    final_mask = evaluator.mask_of(int(i) for i in np.flatnonzero(p > 0.5))
    trace.append(_trace_row(iters + 1, evaluator, final_mask))
    return final_mask, trace, iters


def cem(
    pool: CandidatePool,
    corpus: AnnotatedCorpus,
    stats: LinkStats,
    graph: KnowledgeGraph,
    config: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Iterated Bernoulli sampling with elite refitting; stops when every
    probability is within ``binary_eps`` of 0 or 1 (or at the iteration cap)
    and returns the thresholded vector as the selected subset."""
    t0 = time.perf_counter()
    evaluator = SubsetEvaluator(pool, corpus, stats, graph, config.objective())
    mask, trace, _ = cem_core(evaluator, config)
    return _result("cem", evaluator, mask, trace, t0, config.seed)


# -- microbial genetic algorithm ------------------------------------------------


def microbial_ga_core(
    n_genes: int,
    fitness: Callable[[int], float],
    config: SearchConfig,
    budget_left: Callable[[], bool] = lambda: True,
    init_population: Sequence[np.ndarray] | None = None,
) -> tuple[int, float, list[tuple[int, float, int]]]:
    """Tournament GA: the loser copies winner genes (per-gene crossover
    probability), then flips one uniformly chosen gene with the mutation
    probability.  Returns (best mask, best fitness, per-generation
    (generation, best fitness, best mask) history)."""
    if config.population < 2:
        raise ValueError("population must be at least 2")
    rng = np.random.default_rng([config.seed, _GA_TAG, 0])
    if init_population is not None:
        if len(init_population) != config.population:
            raise ValueError("init_population size must match config.population")
        population = [np.array(g, dtype=bool) for g in init_population]
    else:
        population = [(rng.random(n_genes) < 0.5) for _ in range(config.population)]

    def mask_of(genes: np.ndarray) -> int:
        m = 0
        for i in np.flatnonzero(genes):
            m |= 1 << int(i)
        return m

    best_mask = mask_of(population[0])
    best_fit = fitness(best_mask)
    history: list[tuple[int, float, int]] = []
    for g in range(1, config.generations + 1):
        rng_g = np.random.default_rng([config.seed, _GA_TAG, g])
        for _ in range(config.population):
            if not budget_left():
                history.append((g, best_fit, best_mask))
                return best_mask, best_fit, history
            i = int(rng_g.integers(config.population))
            j = int(rng_g.integers(config.population - 1))
            if j >= i:
                j += 1
            mi, mj = mask_of(population[i]), mask_of(population[j])
            fi, fj = fitness(mi), fitness(mj)
            for m, f in ((mi, fi), (mj, fj)):
                if f > best_fit:
                    best_fit, best_mask = f, m
            win, lose = (i, j) if fi >= fj else (j, i)
            copy = rng_g.random(n_genes) < config.crossover_prob
            population[lose][copy] = population[win][copy]
            if rng_g.random() < config.mutation_prob:
                flip = int(rng_g.integers(n_genes))
                population[lose][flip] = ~population[lose][flip]
        history.append((g, best_fit, best_mask))
    return best_mask, best_fit, history


def ga(
    pool: CandidatePool,
    corpus: AnnotatedCorpus,
    stats: LinkStats,
    graph: KnowledgeGraph,
    config: SearchConfig = SearchConfig(),
) -> SearchResult:
    """Microbial GA over axis-inclusion genes; fitness is J; returns the
    best-ever individual."""
    t0 = time.perf_counter()
    evaluator = SubsetEvaluator(pool, corpus, stats, graph, config.objective())
    best_mask, _, history = microbial_ga_core(
        len(pool),
        lambda m: evaluator.evaluate(m).j,
        config,
        budget_left=lambda: evaluator.budget_left(config),
    )
    trace = [_trace_row(g, evaluator, mask) for g, _, mask in history]
    return _result("ga", evaluator, best_mask, trace, t0, config.seed)


# -- random baseline -----------------------------------------------------------


@dataclass(frozen=True)
class RandomBaseline:
    mean_j: float
    std_j: float
    mean_accuracy: float
    std_accuracy: float
    trials: int
    k: int


def random_baseline(
    pool: CandidatePool,
    k: int,
    trials: int,
    seed: int,
    corpus: AnnotatedCorpus,
    stats: LinkStats,
    graph: KnowledgeGraph,
    config: ObjectiveConfig = ObjectiveConfig(),
) -> RandomBaseline:
    """Mean and std of J and oracle accuracy over uniform k-subsets,
    deterministic per seed."""
    n = len(pool)
    if k > n:
        raise ValueError(f"k={k} exceeds pool size {n}")
    evaluator = SubsetEvaluator(pool, corpus, stats, graph, config)
    js, hits = [], []
    total = max(evaluator.total, 1)
    for trial in range(trials):
        rng = np.random.default_rng([seed, _RANDOM_TAG, trial])
        subset = rng.choice(n, size=k, replace=False) if k else np.zeros(0, dtype=int)
        out = evaluator.evaluate(evaluator.mask_of(int(i) for i in subset))
        js.append(out.j)
        hits.append(out.oracle.hits)
    # accuracy statistics run on integer hit counts so degenerate cases
    # (k = 0 or k = pool size) come out exact
    return RandomBaseline(
        mean_j=float(np.mean(js)),
        std_j=float(np.std(js)),
        mean_accuracy=sum(hits) / (trials * total),
        std_accuracy=float(np.std(hits)) / total,
        trials=trials,
        k=k,
    )


def run_search(
    method: str,
    pool: CandidatePool,
    corpus: AnnotatedCorpus,
    stats: LinkStats,
    graph: KnowledgeGraph,
    config: SearchConfig,
) -> SearchResult:
    """Dispatch by method name; greedy/beam normalise the beam width."""
    if method == "greedy":
        cfg = config if config.beam_width == 1 else replace(config, beam_width=1)
        return greedy_beam(pool, corpus, stats, graph, cfg)
    if method == "beam":
        cfg = config if config.beam_width > 1 else replace(config, beam_width=8)
        return greedy_beam(pool, corpus, stats, graph, cfg)
    if method == "cem":
        return cem(pool, corpus, stats, graph, config)
    if method == "ga":
        return ga(pool, corpus, stats, graph, config)
    raise ValueError(f"unknown search method {method!r}")
