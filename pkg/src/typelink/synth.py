"""Deterministic synthetic worlds for development, testing, and benchmarks.

A generated world embeds a latent ground-truth type system whose axes are
instance_of relations over class entities.  Confusable candidates of a
mention share their type memberships except along one or two designated
latent axes (the way real same-name entities differ along few dimensions),
so specific axes resolve specific mentions and arbitrary axes resolve
nothing.  Context cue tokens near each mention encode the gold entity's
axis memberships with configurable noise, which makes the latent axes
learnable by window classifiers.

Candidate pools over these worlds contain realistic distractors:

  * subclass axes: sub-roots of the latent classes (narrower, partly useful),
  * weak wikipedia_category axes with noisier cues that resolve only some
    collision mentions,
  * context axes whose membership is shared by every candidate of a mention
    and signalled through the filler token distribution: learnable but
    useless for pruning (the dominant species in real ontologies).

An optional fraction of mentions carries anaphora noise (specific entities
linked where a generic parent is meant) for the link simplifier to clean up.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evalcore import AnnotatedCorpus, Document, Mention
from .kg import INSTANCE_OF, POSITION_HELD, SUBCLASS_OF, WIKIPEDIA_CATEGORY, KnowledgeGraph, LinkStats
from .typesys import Relation, TypeSystem


@dataclass(frozen=True)
class SynthConfig:
    n_entities: int = 1100  # leaf entities (candidates live here)
    n_axes: int = 12  # latent instance_of class axes
    n_subclasses: int = 2  # subclasses per latent axis
    n_categories: int = 8  # weak wikipedia_category axes
    n_context_axes: int = 60  # learnable axes that never split a candidate set
    n_mention_strings: int = 250
    n_documents: int = 120
    mentions_per_document: int = 8
    candidates_low: int = 2
    candidates_high: int = 4
    separable_fraction: float = 0.85  # mentions fully split by the latent axes
    greedy_fraction: float = 0.6  # P(gold is the most-linked candidate)
    anaphora_fraction: float = 0.1  # mention strings with foldable specific links
    axis_cue_noise: float = 0.05  # latent cue polarity corruption
    axis_cue_emit: float = 0.9  # P(latent cue appears near a mention)
    category_cue_noise: float = 0.35
    category_cue_emit: float = 0.6
    context_cue_noise: float = 0.08
    context_cue_emit: float = 0.65  # P(a filler slot carries a context token)
    context_member_prob: float = 0.5  # per mention string, not per entity
    filler_vocab: int = 120
    two_token_fraction: float = 0.15  # mention strings spanning two tokens
    subclass_attach_prob: float = 0.35
    member_prob: float = 0.5  # latent membership rate (base rows, free leaves)
    category_member_prob: float = 0.4

    def validate(self) -> None:
        if min(self.n_entities, self.n_mention_strings, self.n_documents, self.mentions_per_document) < 1:
            raise ValueError("all sizes must be at least 1")
        if self.n_axes > self.n_entities:
            raise ValueError(f"more axes ({self.n_axes}) than entities ({self.n_entities})")
        if not 1 <= self.candidates_low <= self.candidates_high:
            raise ValueError("need 1 <= candidates_low <= candidates_high")
        slots = self.n_mention_strings * max(self.candidates_high, 3)
        if slots > self.n_entities:
            raise ValueError(
                f"{self.n_entities} entities cannot host disjoint candidate sets for "
                f"{self.n_mention_strings} mentions of up to {max(self.candidates_high, 3)} candidates"
            )
        for name in (
            "separable_fraction",
            "greedy_fraction",
            "anaphora_fraction",
            "axis_cue_noise",
            "axis_cue_emit",
            "category_cue_noise",
            "category_cue_emit",
            "context_cue_noise",
            "context_cue_emit",
            "context_member_prob",
            "two_token_fraction",
            "subclass_attach_prob",
            "member_prob",
            "category_member_prob",
        ):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")


@dataclass
class SyntheticWorld:
    graph: KnowledgeGraph
    stats: LinkStats
    corpus: AnnotatedCorpus
    latent_system: TypeSystem
    latent_relations: tuple[Relation, ...]
    category_relations: tuple[Relation, ...]
    context_relations: tuple[Relation, ...]
    config: SynthConfig

    def as_tuple(self) -> tuple[KnowledgeGraph, LinkStats, AnnotatedCorpus]:
        return self.graph, self.stats, self.corpus


def _bit_combos(n_bits: int, count: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """``count`` combos of ``n_bits`` bits, distinct while 2**n_bits lasts."""
    combos = [tuple((v >> b) & 1 for b in range(n_bits)) for v in range(2**n_bits)]
    order = rng.permutation(len(combos))
    out = [combos[int(i)] for i in order]
    while len(out) < count:  # degenerate worlds (fewer axes than needed)
        out.append(out[len(out) % max(len(combos), 1)])
    return out[:count]


def generate_synthetic_world(seed: int, config: SynthConfig = SynthConfig()) -> SyntheticWorld:
    """Build a world; identical seeds give bit-identical worlds.

    With ``separable_fraction=1.0`` and at least two latent axes the latent
    system's oracle accuracy on the generated corpus is exactly 1.0 by
    construction.
    """
    config.validate()
    rng = np.random.default_rng([seed, 0x7E57])
    E, K, S = config.n_entities, config.n_axes, config.n_subclasses
    C, X, M = config.n_categories, config.n_context_axes, config.n_mention_strings

    # -- entities ---------------------------------------------------------
    entities: dict[int, str] = {e: f"ent_{e:04d}" for e in range(E)}
    class_ids = list(range(E, E + K))
    for k, cid in enumerate(class_ids):
        entities[cid] = f"class_{k:02d}"
    sub_ids: dict[int, list[int]] = {}
    nxt = E + K
    for k in range(K):
        sub_ids[k] = list(range(nxt, nxt + S))
        for s, sid in enumerate(sub_ids[k]):
            entities[sid] = f"class_{k:02d}_sub_{s}"
        nxt += S
    cat_ids = list(range(nxt, nxt + C))
    for j, cid in enumerate(cat_ids):
        entities[cid] = f"cat_{j:02d}"
    nxt += C
    ctx_ids = list(range(nxt, nxt + X))
    for j, cid in enumerate(ctx_ids):
        entities[cid] = f"ctx_{j:02d}"

    # base memberships; candidate leaves are overwritten per mention below
    latent = rng.random((E, K)) < config.member_prob
    cats = rng.random((E, C)) < config.category_member_prob

    # -- mentions: disjoint candidate sets with designed confusability ------
    n_anaphora = int(round(config.anaphora_fraction * M))
    next_leaf = 0

    def take_leaves(n: int) -> list[int]:
        nonlocal next_leaf
        if next_leaf + n > E:
            raise ValueError("ran out of leaf entities for disjoint candidate sets")
        out = list(range(next_leaf, next_leaf + n))
        next_leaf += n
        return out

    mention_tokens: list[tuple[str, ...]] = []
    mention_candidates: list[list[int]] = []
    mention_counts: list[dict[int, int]] = []
    mention_is_anaphora: list[bool] = []
    anaphora_pairs: list[tuple[int, int]] = []

    def assign_rows(cands: list[int], separable: bool, resolvable_by_cat: bool) -> None:
        """Give candidates a shared base row; separable mentions differ only
        on one or two designated latent axes."""
        base_lat = rng.random(K) < config.member_prob
        base_cat = rng.random(C) < config.category_member_prob
        for e in cands:
            latent[e] = base_lat
            cats[e] = base_cat
        if separable and K:
            n_d = 1 if len(cands) <= 2 else min(2, K)
            axes_d = rng.choice(K, size=n_d, replace=False)
            for e, combo in zip(cands, _bit_combos(n_d, len(cands), rng)):
                for b, k in enumerate(axes_d):
                    latent[e, int(k)] = bool(combo[b])
        elif not separable and resolvable_by_cat and C and len(cands) >= 2:
            cats[cands[1], int(rng.integers(C))] ^= True  # one weak axis can split the pair

    for m in range(M):
        toks = (f"m{m:04d}a", f"m{m:04d}b") if rng.random() < config.two_token_fraction else (f"m{m:04d}",)
        if m < n_anaphora:
            a, b, extra = take_leaves(3)
            cands = [a, b, extra]
            assign_rows(cands, separable=True, resolvable_by_cat=False)
            anaphora_pairs.append((a, b))
            ja, jb, jd = (float(rng.uniform(0.9, 1.1)) for _ in range(3))
            ca, cb = int(round(50 * ja)), int(round(30 * jb))
            cd = max(int(round(55 * jd)), ca + 3)  # distractor outranks the generic sense
            counts = {a: ca, b: cb, extra: cd}
            mention_is_anaphora.append(True)
        else:
            size = int(rng.integers(config.candidates_low, config.candidates_high + 1))
            separable = size < 2 or rng.random() < config.separable_fraction
            cands = take_leaves(size)
            # two thirds of the collision mentions stay resolvable by one
            # category axis, the rest are genuinely ambiguous
            assign_rows(cands, separable=separable, resolvable_by_cat=rng.random() < 2 / 3)
            base = [140, 70, 34, 16, 8, 4][: len(cands)]
            perm = rng.permutation(len(cands))
            counts = {}
            for rank, ci in enumerate(perm):
                jitter = float(rng.uniform(0.85, 1.15))
                counts[cands[int(ci)]] = max(1, int(round(base[rank] * jitter)))
            mention_is_anaphora.append(False)
        mention_tokens.append(toks)
        mention_candidates.append(cands)
        mention_counts.append(counts)

    # context memberships: drawn per mention string and shared by all of its
    # candidates, so pruning on these axes never removes anything
    ctx_mention = rng.random((M, X)) < config.context_member_prob
    ctx = np.zeros((E, X), dtype=bool)
    for m in range(M):
        for e in mention_candidates[m]:
            ctx[e] |= ctx_mention[m]

    # -- edges ------------------------------------------------------------
    # subclass attachment is drawn once per (mention, axis) so subclass axes
    # refine their parent class instead of randomly splitting candidates
    attach_target: dict[int, int] = {}  # leaf -> mention index (candidates only)
    for m, cands in enumerate(mention_candidates):
        for e in cands:
            attach_target[e] = m
    mention_attach: list[dict[int, int]] = []
    for m in range(M):
        choice: dict[int, int] = {}
        for k in range(K):
            if S and rng.random() < config.subclass_attach_prob:
                choice[k] = sub_ids[k][int(rng.integers(S))]
            else:
                choice[k] = class_ids[k]
        mention_attach.append(choice)

    edges: list[tuple[int, str, int]] = []
    for k in range(K):
        for sid in sub_ids[k]:
            edges.append((sid, SUBCLASS_OF, class_ids[k]))
    for e in range(E):
        for k in range(K):
            if latent[e, k]:
                if e in attach_target:
                    target = mention_attach[attach_target[e]][k]
                elif S and rng.random() < config.subclass_attach_prob:
                    target = sub_ids[k][int(rng.integers(S))]
                else:
                    target = class_ids[k]
                edges.append((e, INSTANCE_OF, target))
        for j in range(C):
            if cats[e, j]:
                edges.append((e, WIKIPEDIA_CATEGORY, cat_ids[j]))
        for j in range(X):
            if ctx[e, j]:
                edges.append((e, INSTANCE_OF, ctx_ids[j]))
    for a, b in anaphora_pairs:
        edges.append((b, POSITION_HELD, a))

    graph = KnowledgeGraph(entities, edges)
    latent_relations = tuple(Relation(root=cid, membership_edge=INSTANCE_OF) for cid in class_ids)
    category_relations = tuple(Relation(root=cid, membership_edge=WIKIPEDIA_CATEGORY) for cid in cat_ids)
    context_relations = tuple(Relation(root=cid, membership_edge=INSTANCE_OF) for cid in ctx_ids)
    latent_system = TypeSystem.discovered(latent_relations, prefix="latent")

    stats = LinkStats({" ".join(mention_tokens[m]): mention_counts[m] for m in range(M)})

    # -- corpus ------------------------------------------------------------
    def cue_tokens_for(gold: int) -> tuple[list[str], list[str]]:
        """(inner cues for the +-5 window, outer cues for the +-10 window)."""
        inner: list[str] = []
        outer: list[str] = []
        for k in range(K):
            if rng.random() >= config.axis_cue_emit:
                continue
            pol = bool(latent[gold, k])
            if rng.random() < config.axis_cue_noise:
                pol = not pol
            inner.append(f"c{k:02d}{'p' if pol else 'n'}")
        for j in range(C):
            if rng.random() >= config.category_cue_emit:
                continue
            pol = bool(cats[gold, j])
            if rng.random() < config.category_cue_noise:
                pol = not pol
            outer.append(f"k{j:02d}{'p' if pol else 'n'}")
        inner = [inner[int(i)] for i in rng.permutation(len(inner))]
        # inner cue overflow moves outward so it stays inside the +-10 window
        return inner[:10], (inner[10:] + outer)[:10]

    def make_filler(mention_idx: int):
        """Filler slots carry context-axis tokens for the mention's member
        axes, so those axes are learnable without competing for cue slots."""
        members_j = np.flatnonzero(ctx_mention[mention_idx]) if X else np.zeros(0, dtype=int)
        others_j = np.flatnonzero(~ctx_mention[mention_idx]) if X else np.zeros(0, dtype=int)

        def filler() -> str:
            if members_j.size and rng.random() < config.context_cue_emit:
                if others_j.size and rng.random() < config.context_cue_noise:
                    return f"x{int(rng.choice(others_j)):02d}m"
                return f"x{int(rng.choice(members_j)):02d}m"
            return f"w{int(rng.integers(config.filler_vocab)):03d}"

        return filler

    documents: list[Document] = []
    for d in range(config.n_documents):
        tokens: list[str] = []
        mentions: list[Mention] = []
        for _ in range(config.mentions_per_document):
            m = int(rng.integers(M))
            cands = mention_candidates[m]
            counts = mention_counts[m]
            if mention_is_anaphora[m]:
                gold = cands[0]  # the generic parent is the intended meaning
            else:
                ranked = sorted(cands, key=lambda e: (-counts[e], e))
                if len(ranked) == 1 or rng.random() < config.greedy_fraction:
                    gold = ranked[0]
                else:
                    gold = ranked[1 + int(rng.integers(len(ranked) - 1))]
            filler = make_filler(m)
            inner, outer = cue_tokens_for(gold)
            half_inner = len(inner) // 2
            inner_left, inner_right = inner[:half_inner], inner[half_inner:]
            half_outer = len(outer) // 2
            outer_left, outer_right = outer[:half_outer], outer[half_outer:]
            left = (outer_left + inner_left)[-10:]
            left = [filler() for _ in range(10 - len(left))] + left
            right = (inner_right + outer_right)[:10]
            right = right + [filler() for _ in range(10 - len(right))]
            start = len(tokens) + len(left)
            span = mention_tokens[m]
            tokens.extend(left)
            tokens.extend(span)
            tokens.extend(right)
            mentions.append(Mention(start=start, end=start + len(span), gold=gold))
        documents.append(Document(doc_id=f"doc_{d:03d}", lang="en", tokens=tokens, mentions=mentions))

    corpus = AnnotatedCorpus(documents)
    return SyntheticWorld(
        graph=graph,
        stats=stats,
        corpus=corpus,
        latent_system=latent_system,
        latent_relations=latent_relations,
        category_relations=category_relations,
        context_relations=context_relations,
        config=config,
    )
