"""Per-axis learnability: cheap context-window classifiers scored by AUC.

Each candidate relation gets a tiny logistic classifier over the 10 tokens
before and after each mention (mean-pooled 5-dim word embeddings).  The mean
held-out AUC over several seeded runs estimates how learnable the axis is;
the mean over axes is the system-level learnability term in the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evalcore import AnnotatedCorpus
from .kg import KnowledgeGraph
from .typesys import MembershipCache, Relation

PAD_ID = 0
WINDOW = 10  # tokens kept on each side of a mention

CHANCE_EPS = 0.01  # axes with mean AUC <= 0.5 + eps are flagged unlearnable


@dataclass(frozen=True)
class WindowSample:
    """Context token ids (exactly 2 * WINDOW after padding) and a binary
    relation-membership label for the mention's gold entity."""

    context: tuple[int, ...]
    label: bool


def build_window_vocab(corpus: AnnotatedCorpus) -> dict[str, int]:
    """Token -> id map over the corpus; id 0 is reserved for padding."""
    vocab: dict[str, int] = {}
    for doc in corpus.documents:
        for tok in doc.tokens:
            if tok not in vocab:
                vocab[tok] = len(vocab) + 1
    return vocab


def build_window_dataset(
    corpus: AnnotatedCorpus,
    graph: KnowledgeGraph,
    relation: Relation,
    cache: MembershipCache | None = None,
    vocab: dict[str, int] | None = None,
) -> tuple[list[WindowSample], dict[str, int]]:
    """One sample per mention: label is membership of the gold entity."""
    cache = cache or MembershipCache(graph)
    vocab = vocab if vocab is not None else build_window_vocab(corpus)
    member = cache.members(relation)
    samples: list[WindowSample] = []
    for doc in corpus.documents:
        ids = [vocab.get(t, PAD_ID) for t in doc.tokens]
        for m in doc.mentions:
            left = ids[max(0, m.start - WINDOW) : m.start]
            right = ids[m.end : m.end + WINDOW]
            context = (
                [PAD_ID] * (WINDOW - len(left)) + left + right + [PAD_ID] * (WINDOW - len(right))
            )
            samples.append(WindowSample(context=tuple(context), label=m.gold in member))
    return samples, vocab


# -- AUC ----------------------------------------------------------------------


def auc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Area under the ROC curve via the rank-sum statistic; tied scores
    contribute 1/2 per pair.  Requires at least one positive and one
    negative label."""
    if len(scores) != len(labels):
        raise ValueError("scores and labels must have equal length")
    n_pos = sum(1 for l in labels if l)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC requires both a positive and a negative example")
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    ranks = [0.0] * len(scores)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        tied_rank = (i + j) / 2 + 1  # average 1-based rank of the tie group
        for k in range(i, j + 1):
            ranks[order[k]] = tied_rank
        i = j + 1
    rank_sum = sum(r for r, l in zip(ranks, labels) if l)
    u = rank_sum - n_pos * (n_pos + 1) / 2
    return u / (n_pos * n_neg)


# -- window classifier --------------------------------------------------------


@dataclass(frozen=True)
class WindowTrainConfig:
    # the effective step is lr times the tiny mean-pooled activations, so a
    # nominally large lr is what lets two passes suffice
    lr: float = 10.0
    epochs: int = 2
    batch_size: int = 128
    dropout: float = 0.5
    emb_dim: int = 5
    emb_init_scale: float = 0.1
    weight_init_scale: float = 0.3
    holdout_fraction: float = 0.2
    holdout: bool = True  # score AUC on the held-out split (vs in-sample)


@dataclass
class WindowClassifierModel:
    """Mean-pooled embeddings -> linear -> sigmoid.  Inference is
    deterministic (dropout applies at training time only)."""

    embeddings: np.ndarray  # (vocab+1, emb_dim); row 0 = padding, fixed zero
    weights: np.ndarray  # (emb_dim,)
    bias: float

    def scores(self, contexts: np.ndarray) -> np.ndarray:
        pooled = self.embeddings[contexts].mean(axis=1)
        z = pooled @ self.weights + self.bias
        return 1.0 / (1.0 + np.exp(-z))


def _sample_arrays(samples: Sequence[WindowSample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([s.context for s in samples], dtype=np.int64)
    y = np.array([s.label for s in samples], dtype=np.float64)
    return x, y


def train_window_classifier(
    samples: Sequence[WindowSample],
    seed: int | Sequence[int],
    config: WindowTrainConfig = WindowTrainConfig(),
    vocab_size: int | None = None,
) -> WindowClassifierModel:
    """SGD on the log loss, two passes by default; deterministic per seed.

    Requires at least one positive and one negative sample.
    """
    if not samples:
        raise ValueError("cannot train on an empty dataset")
    x, y = _sample_arrays(samples)
    if y.min() == y.max():
        raise ValueError("training requires both classes present")
    rng = np.random.default_rng(seed)
    if vocab_size is None:
        vocab_size = int(x.max()) + 1
    emb = rng.normal(0.0, config.emb_init_scale, size=(vocab_size, config.emb_dim))
    emb[PAD_ID] = 0.0
    # non-zero output weights let embeddings receive gradient from step one
    w = rng.normal(0.0, config.weight_init_scale, size=config.emb_dim)
    b = 0.0
    n = len(samples)
    width = x.shape[1]
    keep = 1.0 - config.dropout
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x[idx], y[idx]
            pooled = emb[xb].mean(axis=1)  # (B, d)
            if config.dropout > 0:
                mask = (rng.random(pooled.shape) < keep) / keep
                pooled = pooled * mask
            else:
                mask = np.ones_like(pooled)
            z = pooled @ w + b
            p = 1.0 / (1.0 + np.exp(-z))
            dz = (p - yb) / len(idx)  # (B,)
            gw = pooled.T @ dz
            gb = dz.sum()
            # embedding gradient: each context slot contributes w*mask/width
            gemb_rows = np.outer(dz, w)[:, None, :] * mask[:, None, :] / width  # (B, 1, d) widened
            gemb_rows = np.repeat(gemb_rows, width, axis=1)
            w -= config.lr * gw
            b -= config.lr * gb
            np.subtract.at(emb, xb, config.lr * gemb_rows)
            emb[PAD_ID] = 0.0  # padding stays neutral
    return WindowClassifierModel(embeddings=emb, weights=w, bias=float(b))


# -- learnability scores -------------------------------------------------------


@dataclass(frozen=True)
class AxisLearnability:
    relation: Relation
    auc_mean: float
    auc_std: float
    run_aucs: tuple[float, ...]
    flagged_zero: bool


@dataclass(frozen=True)
class LearnabilityScore:
    axes: tuple[AxisLearnability, ...]

    @property
    def system_score(self) -> float:
        """Mean of per-axis AUC means; 0 for an empty axis list."""
        if not self.axes:
            return 0.0
        return float(np.mean([a.auc_mean for a in self.axes]))


def _run_auc(
    x: np.ndarray,
    y: np.ndarray,
    run_seed: Sequence[int],
    config: WindowTrainConfig,
    vocab_size: int,
) -> float:
    rng = np.random.default_rng(run_seed)
    # stratified split keeps both classes in train whenever possible
    pos = np.flatnonzero(y > 0.5)
    neg = np.flatnonzero(y <= 0.5)
    rng.shuffle(pos)
    rng.shuffle(neg)
    n_hold_pos = int(len(pos) * config.holdout_fraction)
    n_hold_neg = int(len(neg) * config.holdout_fraction)
    hold = np.concatenate([pos[:n_hold_pos], neg[:n_hold_neg]])
    tr = np.concatenate([pos[n_hold_pos:], neg[n_hold_neg:]])
    samples = [WindowSample(tuple(x[i]), bool(y[i])) for i in tr]
    model = train_window_classifier(samples, rng, config, vocab_size=vocab_size)
    if config.holdout and len(hold) > 0 and y[hold].min() != y[hold].max():
        eval_idx = hold
    else:
        # degenerate split (e.g. a near-single-class axis): score in-sample
        eval_idx = np.arange(len(y))
    scores = model.scores(x[eval_idx])
    return auc(scores.tolist(), [bool(v) for v in y[eval_idx]])


def learnability(
    axes: Sequence[Relation],
    corpus: AnnotatedCorpus,
    graph: KnowledgeGraph,
    master_seed: int = 0,
    runs: int = 4,
    config: WindowTrainConfig = WindowTrainConfig(),
    cache: MembershipCache | None = None,
) -> LearnabilityScore:
    """Per-axis mean AUC over seeded runs; the per-run RNG stream is derived
    from (master seed, axis index, run index) so any execution schedule gives
    identical results.  Single-class axes score 0.5 without training."""
    cache = cache or MembershipCache(graph)
    vocab = build_window_vocab(corpus)
    vocab_size = len(vocab) + 1
    results: list[AxisLearnability] = []
    for axis_idx, relation in enumerate(axes):
        samples, _ = build_window_dataset(corpus, graph, relation, cache=cache, vocab=vocab)
        x, y = _sample_arrays(samples) if samples else (np.zeros((0, 2 * WINDOW), dtype=np.int64), np.zeros(0))
        if len(y) == 0 or y.min() == y.max():
            run_aucs = tuple(0.5 for _ in range(runs))
        else:
            run_aucs = tuple(
                _run_auc(x, y, [master_seed, axis_idx, run_idx], config, vocab_size)
                for run_idx in range(runs)
            )
        mean = float(np.mean(run_aucs))
        std = float(np.std(run_aucs))
        results.append(
            AxisLearnability(
                relation=relation,
                auc_mean=mean,
                auc_std=std,
                run_aucs=run_aucs,
                flagged_zero=mean <= 0.5 + CHANCE_EPS,
            )
        )
    return LearnabilityScore(axes=tuple(results))


@dataclass(frozen=True)
class EdgeKindRow:
    edge_kind: str
    n_axes: int
    auc_mean: float
    auc_std: float
    scatter: tuple[tuple[float, float], ...]  # per axis (auc mean, auc std)


def learnability_report(score: LearnabilityScore) -> list[EdgeKindRow]:
    """Group axis AUC statistics by membership edge kind."""
    groups: dict[str, list[AxisLearnability]] = {}
    for axis in score.axes:
        groups.setdefault(axis.relation.membership_edge, []).append(axis)
    rows = []
    for kind in sorted(groups):
        axes = groups[kind]
        means = [a.auc_mean for a in axes]
        rows.append(
            EdgeKindRow(
                edge_kind=kind,
                n_axes=len(axes),
                auc_mean=float(np.mean(means)),
                auc_std=float(np.std(means)),
                scatter=tuple((a.auc_mean, a.auc_std) for a in axes),
            )
        )
    return rows
