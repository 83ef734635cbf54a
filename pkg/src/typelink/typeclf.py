"""Per-token multi-axis type classifier: windowed feedforward net trained
with Adam on the summed per-axis negative log likelihood of labeled tokens.

Supervision is partial: only mention tokens carry axis labels, everything
else is MISSING and contributes no loss.  The classifier hides behind
``train``/``predict`` so a different sequence model can replace it without
touching oracle, search, or linker code.
"""

from __future__ import annotations

import base64
import json
import zlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .evalcore import AnnotatedCorpus
from .kg import KnowledgeGraph
from .typesys import MembershipCache, TypeSystem

PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"
PAD_ID = 0
UNK_ID = 1
MISSING = -1

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    anneal_factor: float = 0.99
    anneal_every: int = 10_000
    epochs: int = 20
    batch_size: int = 32
    emb_dim: int = 32
    hidden_dim: int = 64
    radius: int = 5
    unk_prob: float = 0.05
    decap_prob: float = 0.05
    strip_s_prob: float = 0.02
    # hashed 2/3-character prefix/suffix embeddings, appended to each token's
    # representation (helps out-of-vocabulary morphology); off by default
    affix_features: bool = False
    affix_dim: int = 6
    affix_buckets: int = 97
    seed: int = 0

    def __post_init__(self):
        for name in ("unk_prob", "decap_prob", "strip_s_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @property
    def token_dim(self) -> int:
        return self.emb_dim + (N_AFFIXES * self.affix_dim if self.affix_features else 0)


N_AFFIXES = 4  # 2-char prefix, 2-char suffix, 3-char prefix, 3-char suffix


def affix_ids(token: str, buckets: int) -> tuple[int, int, int, int]:
    """Stable hash buckets for the token's character affixes."""
    parts = (token[:2], token[-2:], token[:3], token[-3:])
    return tuple(zlib.crc32(p.encode("utf-8")) % buckets for p in parts)


def effective_lr(config: TrainConfig, completed_steps: int) -> float:
    """Learning rate after ``completed_steps`` updates (annealed by a fixed
    factor every ``anneal_every`` steps)."""
    return config.lr * config.anneal_factor ** (completed_steps // config.anneal_every)


def augment(tokens: Sequence[str], config: TrainConfig, rng: np.random.Generator) -> list[str]:
    """Independent per-token training-time noise: UNK swap, decapitalise,
    strip a trailing 's'."""
    out: list[str] = []
    for tok in tokens:
        if rng.random() < config.unk_prob:
            out.append(UNK_TOKEN)
            continue
        if rng.random() < config.decap_prob:
            tok = tok.lower()
        if rng.random() < config.strip_s_prob and len(tok) > 1 and tok.endswith("s"):
            tok = tok[:-1]
        out.append(tok)
    return out


# -- labeling ------------------------------------------------------------------


@dataclass(frozen=True)
class AxisSpec:
    name: str
    types: tuple[str, ...]


@dataclass
class TokenLabeling:
    """Per document: (n_tokens, n_axes) int array of type indices, MISSING
    for unsupervised tokens."""

    axes: tuple[AxisSpec, ...]
    labels: list[np.ndarray]

    @property
    def n_labeled_tokens(self) -> int:
        return int(sum((arr != MISSING).any(axis=1).sum() for arr in self.labels))


def label_corpus(
    corpus: AnnotatedCorpus,
    graph: KnowledgeGraph,
    system: TypeSystem,
    cache: MembershipCache | None = None,
) -> TokenLabeling:
    """Mention tokens receive the gold entity's type index per axis;
    all other tokens stay MISSING."""
    cache = cache or MembershipCache(graph)
    axes = tuple(AxisSpec(name=a.name, types=a.type_names) for a in system.axes)
    label_matrix = cache.system_labels(system)
    out: list[np.ndarray] = []
    for doc in corpus.documents:
        arr = np.full((len(doc.tokens), len(system.axes)), MISSING, dtype=np.int32)
        for m in doc.mentions:
            if not graph.has(m.gold):
                raise KeyError(f"gold entity {m.gold} not in graph (doc {doc.doc_id})")
            col = label_matrix[:, graph.index_of(m.gold)]
            arr[m.start : m.end, :] = col
        out.append(arr)
    return TokenLabeling(axes=axes, labels=out)


# -- model ---------------------------------------------------------------------


@dataclass
class TokenClassifierModel:
    vocab: dict[str, int]
    axes: tuple[AxisSpec, ...]
    config: TrainConfig
    emb: np.ndarray  # (V, emb_dim)
    w1: np.ndarray  # ((2r+1)*token_dim, hidden)
    b1: np.ndarray  # (hidden,)
    heads: list[tuple[np.ndarray, np.ndarray]]  # per axis (hidden x n_types, n_types)
    affix_emb: np.ndarray | None = None  # (affix_buckets, affix_dim)
    steps: int = 0

    def params(self) -> list[np.ndarray]:
        flat: list[np.ndarray] = [self.emb, self.w1, self.b1]
        if self.affix_emb is not None:
            flat.append(self.affix_emb)
        for w, b in self.heads:
            flat.extend((w, b))
        return flat

    def token_ids(self, tokens: Sequence[str]) -> np.ndarray:
        return np.array([self.vocab.get(t, UNK_ID) for t in tokens], dtype=np.int64)

    def token_affixes(self, tokens: Sequence[str]) -> np.ndarray | None:
        if not self.config.affix_features:
            return None
        buckets = self.config.affix_buckets
        return np.array([affix_ids(t, buckets) for t in tokens], dtype=np.int64)

    def windows(self, ids: np.ndarray, positions: np.ndarray | None = None) -> np.ndarray:
        r = self.config.radius
        padded = np.concatenate([np.full(r, PAD_ID, dtype=np.int64), ids, np.full(r, PAD_ID, dtype=np.int64)])
        pos = np.arange(len(ids)) if positions is None else positions
        return np.stack([padded[p : p + 2 * r + 1] for p in pos])

    def affix_windows(self, affixes: np.ndarray | None, positions: np.ndarray | None = None) -> np.ndarray | None:
        if affixes is None:
            return None
        r = self.config.radius
        pad_row = np.array(affix_ids(PAD_TOKEN, self.config.affix_buckets), dtype=np.int64)
        padded = np.concatenate([np.tile(pad_row, (r, 1)), affixes, np.tile(pad_row, (r, 1))])
        pos = np.arange(len(affixes)) if positions is None else positions
        return np.stack([padded[p : p + 2 * r + 1] for p in pos])


def init_model(vocab: dict[str, int], axes: tuple[AxisSpec, ...], config: TrainConfig) -> TokenClassifierModel:
    """Head weights start at zero so an untrained model emits uniform
    distributions."""
    rng = np.random.default_rng([config.seed, 0xC1F])
    v = len(vocab)
    width = (2 * config.radius + 1) * config.token_dim
    emb = rng.normal(0.0, 0.1, size=(v, config.emb_dim))
    emb[PAD_ID] = 0.0
    affix_emb = (
        rng.normal(0.0, 0.1, size=(config.affix_buckets, config.affix_dim)) if config.affix_features else None
    )
    w1 = rng.normal(0.0, 1.0 / np.sqrt(width), size=(width, config.hidden_dim))
    b1 = np.zeros(config.hidden_dim)
    heads = [(np.zeros((config.hidden_dim, len(a.types))), np.zeros(len(a.types))) for a in axes]
    return TokenClassifierModel(
        vocab=vocab, axes=axes, config=config, emb=emb, w1=w1, b1=b1, heads=heads, affix_emb=affix_emb
    )


def _token_reps(model: TokenClassifierModel, windows: np.ndarray, affix_windows: np.ndarray | None) -> np.ndarray:
    """(batch, window, token_dim) representations."""
    parts = [model.emb[windows]]
    if model.affix_emb is not None:
        if affix_windows is None:
            raise ValueError("model uses affix features; affix windows are required")
        b, w = affix_windows.shape[:2]
        parts.append(model.affix_emb[affix_windows].reshape(b, w, -1))
    return np.concatenate(parts, axis=2) if len(parts) > 1 else parts[0]


def _forward(
    model: TokenClassifierModel, windows: np.ndarray, affix_windows: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    x = _token_reps(model, windows, affix_windows).reshape(len(windows), -1)
    h = np.tanh(x @ model.w1 + model.b1)
    probs = []
    for w2, b2 in model.heads:
        logits = h @ w2 + b2
        logits = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        probs.append(e / e.sum(axis=1, keepdims=True))
    return x, h, probs


def nll_loss(
    model: TokenClassifierModel,
    windows: np.ndarray,
    labels: np.ndarray,
    affix_windows: np.ndarray | None = None,
) -> float:
    """Mean over batch rows of the summed per-axis NLL on labeled entries."""
    _, _, probs = _forward(model, windows, affix_windows)
    total = 0.0
    for i, p in enumerate(probs):
        mask = labels[:, i] != MISSING
        if mask.any():
            total += -np.log(p[mask, labels[mask, i]]).sum()
    return float(total / len(windows))


def loss_and_grads(
    model: TokenClassifierModel,
    windows: np.ndarray,
    labels: np.ndarray,
    affix_windows: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Backprop for ``nll_loss``; gradients align with ``model.params()``."""
    batch = len(windows)
    x, h, probs = _forward(model, windows, affix_windows)
    loss = 0.0
    dh = np.zeros_like(h)
    head_grads: list[tuple[np.ndarray, np.ndarray]] = []
    for i, (w2, _) in enumerate(model.heads):
        p = probs[i]
        mask = labels[:, i] != MISSING
        dlogits = np.zeros_like(p)
        if mask.any():
            rows = np.flatnonzero(mask)
            picked = labels[rows, i]
            loss += -np.log(p[rows, picked]).sum()
            dlogits[rows] = p[rows]
            dlogits[rows, picked] -= 1.0
        dlogits /= batch
        head_grads.append((h.T @ dlogits, dlogits.sum(axis=0)))
        dh += dlogits @ w2.T
    loss /= batch
    dz = dh * (1.0 - h * h)
    gw1 = x.T @ dz
    gb1 = dz.sum(axis=0)
    dx = (dz @ model.w1.T).reshape(batch, -1, model.config.token_dim)
    gemb = np.zeros_like(model.emb)
    np.add.at(gemb, windows, dx[:, :, : model.config.emb_dim])
    grads: list[np.ndarray] = [gemb, gw1, gb1]
    if model.affix_emb is not None:
        gaffix = np.zeros_like(model.affix_emb)
        daffix = dx[:, :, model.config.emb_dim :].reshape(batch, -1, N_AFFIXES, model.config.affix_dim)
        np.add.at(gaffix, affix_windows, daffix)
        grads.append(gaffix)
    for gw, gb in head_grads:
        grads.extend((gw, gb))
    return float(loss), grads


class _Adam:
    def __init__(self, params: list[np.ndarray], config: TrainConfig):
        self.config = config
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        c = self.config
        self.t += 1
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            m_hat = m / (1 - c.beta1**self.t)
            v_hat = v / (1 - c.beta2**self.t)
            p -= lr * m_hat / (np.sqrt(v_hat) + c.eps)


def build_vocab(corpus: AnnotatedCorpus) -> dict[str, int]:
    vocab = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
    for doc in corpus.documents:
        for tok in doc.tokens:
            if tok not in vocab:
                vocab[tok] = len(vocab)
    return vocab


def train(
    corpus: AnnotatedCorpus,
    labeling: TokenLabeling,
    config: TrainConfig = TrainConfig(),
) -> tuple[TokenClassifierModel, list[float]]:
    """Train on labeled tokens only; deterministic per seed.  Returns the
    model and the per-step loss curve."""
    if len(labeling.labels) != len(corpus.documents):
        raise ValueError("labeling does not match corpus")
    if labeling.n_labeled_tokens == 0:
        raise ValueError("cannot train without any labeled token")
    vocab = build_vocab(corpus)
    model = init_model(vocab, labeling.axes, config)
    optimizer = _Adam(model.params(), config)
    rng = np.random.default_rng([config.seed, 0xADA])

    positions = [
        (d, int(t))
        for d, arr in enumerate(labeling.labels)
        for t in np.flatnonzero((arr != MISSING).any(axis=1))
    ]
    augmenting = config.unk_prob > 0 or config.decap_prob > 0 or config.strip_s_prob > 0
    base_tokens = [doc.tokens for doc in corpus.documents]
    loss_curve: list[float] = []
    for _ in range(config.epochs):
        if augmenting:
            epoch_tokens = [augment(toks, config, rng) for toks in base_tokens]
        else:
            epoch_tokens = base_tokens
        doc_ids = [model.token_ids(toks) for toks in epoch_tokens]
        doc_affixes = [model.token_affixes(toks) for toks in epoch_tokens]
        order = rng.permutation(len(positions))
        for start in range(0, len(order), config.batch_size):
            chunk = [positions[i] for i in order[start : start + config.batch_size]]
            windows = np.concatenate([model.windows(doc_ids[d], np.array([t])) for d, t in chunk])
            if config.affix_features:
                affix_windows = np.concatenate(
                    [model.affix_windows(doc_affixes[d], np.array([t])) for d, t in chunk]
                )
            else:
                affix_windows = None
            labels = np.stack([labeling.labels[d][t] for d, t in chunk])
            loss, grads = loss_and_grads(model, windows, labels, affix_windows)
            lr = effective_lr(config, model.steps)
            optimizer.step(model.params(), grads, lr)
            model.steps += 1
            loss_curve.append(loss)
    return model, loss_curve


def predict(model: TokenClassifierModel, tokens: Sequence[str]) -> list[np.ndarray]:
    """Per-axis (n_tokens, n_types) belief matrices; unknown words map to
    UNK.  Each row is a distribution."""
    if len(tokens) == 0:
        return [np.zeros((0, len(a.types))) for a in model.axes]
    ids = model.token_ids(tokens)
    windows = model.windows(ids)
    affix_windows = model.affix_windows(model.token_affixes(tokens))
    _, _, probs = _forward(model, windows, affix_windows)
    return probs


# -- checkpoints -----------------------------------------------------------------


def _encode(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).decode("ascii"),
    }


def _decode(obj: dict) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(obj["data"]), dtype=np.float64).copy()
    return arr.reshape(obj["shape"])


def save_model(model: TokenClassifierModel, path: str) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": {k: getattr(model.config, k) for k in TrainConfig.__dataclass_fields__},
        "steps": model.steps,
        "vocab": sorted(model.vocab, key=model.vocab.get),
        "axes": [{"name": a.name, "types": list(a.types)} for a in model.axes],
        "params": {
            "emb": _encode(model.emb),
            "w1": _encode(model.w1),
            "b1": _encode(model.b1),
            **({"affix_emb": _encode(model.affix_emb)} if model.affix_emb is not None else {}),
            "heads": [[_encode(w), _encode(b)] for w, b in model.heads],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> TokenClassifierModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    config = TrainConfig(**payload["config"])
    vocab = {tok: i for i, tok in enumerate(payload["vocab"])}
    axes = tuple(AxisSpec(name=a["name"], types=tuple(a["types"])) for a in payload["axes"])
    params = payload["params"]
    return TokenClassifierModel(
        vocab=vocab,
        axes=axes,
        config=config,
        emb=_decode(params["emb"]),
        w1=_decode(params["w1"]),
        b1=_decode(params["b1"]),
        heads=[(_decode(w), _decode(b)) for w, b in params["heads"]],
        affix_emb=_decode(params["affix_emb"]) if "affix_emb" in params else None,
        steps=int(payload["steps"]),
    )
