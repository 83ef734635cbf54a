import numpy as np
import pytest

from typelink.evalcore import AnnotatedCorpus, Document, Mention, oracle_accuracy, s_greedy
from typelink.kg import INSTANCE_OF, KnowledgeGraph, LinkStats
from typelink.linker import (
    LinkDecision,
    SmoothingParams,
    decisions_to_predictions,
    entity_score,
    fit_smoothing,
    link,
    link_corpus,
    pool_mention_beliefs,
)
from typelink.typeclf import AxisSpec, TokenClassifierModel, TrainConfig, init_model, label_corpus, train
from typelink.typesys import MembershipCache, Relation, TypeSystem
from typelink.synth import SynthConfig, generate_synthetic_world


class TestPooling:
    def test_single_token_unchanged(self):
        beliefs = [np.array([[0.2, 0.8], [0.6, 0.4]])]
        pooled = pool_mention_beliefs(beliefs, (1, 2))
        assert np.allclose(pooled[0], [0.6, 0.4])

    def test_elementwise_max(self):
        beliefs = [np.array([[0.2, 0.8], [0.7, 0.3]])]
        pooled = pool_mention_beliefs(beliefs, (0, 2))
        assert np.allclose(pooled[0], [0.7, 0.8])

    def test_product_mode(self):
        beliefs = [np.array([[0.2, 0.8], [0.7, 0.3]])]
        pooled = pool_mention_beliefs(beliefs, (0, 2), mode="product")
        assert np.allclose(pooled[0], [0.14, 0.24])

    def test_matches_loop_oracle_on_fuzz_spans(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n_tokens = int(rng.integers(2, 12))
            axes = [rng.random((n_tokens, int(rng.integers(2, 5)))) for _ in range(3)]
            start = int(rng.integers(0, n_tokens - 1))
            end = int(rng.integers(start + 1, n_tokens + 1))
            pooled = pool_mention_beliefs(axes, (start, end))
            for axis_beliefs, got in zip(axes, pooled):
                want = axis_beliefs[start]
                for t in range(start + 1, end):
                    want = np.maximum(want, axis_beliefs[t])
                assert np.allclose(got, want)

    def test_empty_span_rejected(self):
        with pytest.raises(ValueError):
            pool_mention_beliefs([np.zeros((3, 2))], (1, 1))


def jaguar_world():
    graph = KnowledgeGraph(
        {0: "jaguar (animal)", 1: "jaguar (car)", 2: "animal", 3: "vehicle"},
        [(0, INSTANCE_OF, 2), (1, INSTANCE_OF, 3)],
    )
    stats = LinkStats({"jaguar": {1: 7, 0: 3}})  # the car sense is more linked
    system = TypeSystem.discovered([Relation(root=2, membership_edge=INSTANCE_OF)])
    return graph, stats, system


class TestEntityScore:
    def test_beta_zero_reduces_to_link_prior(self):
        graph, stats, system = jaguar_world()
        pooled = [np.array([0.9, 0.1])]
        params = SmoothingParams(alpha=(1.0,), beta=0.0)
        assert entity_score(0, pooled, "jaguar", stats, graph, system, params) == pytest.approx(0.3)

    def test_alpha_zero_reduces_to_link_prior(self):
        graph, stats, system = jaguar_world()
        pooled = [np.array([0.9, 0.1])]
        params = SmoothingParams(alpha=(0.0,), beta=1.0)
        assert entity_score(1, pooled, "jaguar", stats, graph, system, params) == pytest.approx(0.7)

    def test_direct_substitution(self):
        graph, stats, system = jaguar_world()
        stats2 = LinkStats({"jaguar": {0: 6, 1: 4}})  # P_link(animal) = 0.6
        pooled = [np.array([0.5, 0.2])]  # belief in the member type = 0.5
        params = SmoothingParams(alpha=(1.0,), beta=1.0)
        score = entity_score(0, pooled, "jaguar", stats2, graph, system, params)
        assert score == pytest.approx(0.30, abs=1e-12)

    def test_non_candidate_rejected(self):
        graph, stats, system = jaguar_world()
        with pytest.raises(ValueError, match="not a candidate"):
            entity_score(3, [np.array([1.0, 0.0])], "jaguar", stats, graph, system, SmoothingParams((1.0,), 1.0))

    def test_raising_own_type_belief_never_lowers_score(self):
        graph, stats, system = jaguar_world()
        params = SmoothingParams(alpha=(0.8,), beta=0.7)
        prev = -1.0
        for belief in np.linspace(0, 1, 11):
            pooled = [np.array([belief, 0.4])]
            score = entity_score(0, pooled, "jaguar", stats, graph, system, params)
            assert score >= prev
            prev = score


def constant_belief_model(axes: tuple[AxisSpec, ...], beliefs: list[np.ndarray]) -> TokenClassifierModel:
    """A model stub whose predict() output is constant: achieved by zero
    hidden weights and per-head biases set to log-beliefs."""
    vocab = {"<PAD>": 0, "<UNK>": 1}
    model = init_model(vocab, axes, TrainConfig(seed=0))
    for (w, b), target in zip(model.heads, beliefs):
        w[:] = 0.0
        b[:] = np.log(np.clip(target, 1e-9, None))
    return model


class TestLink:
    def test_jaguar_context_overrides_prior(self):
        graph, stats, system = jaguar_world()
        axes = (AxisSpec(system.axes[0].name, system.axes[0].type_names),)
        model = constant_belief_model(axes, [np.array([0.9, 0.1])])  # animal-ish context
        doc = Document(doc_id="d", lang="en", tokens=["saw", "jaguar", "prowl"], mentions=[Mention(1, 2, 0)])
        params = SmoothingParams(alpha=(1.0,), beta=1.0)
        decisions = link(doc, model, system, stats, graph, params)
        # by hand: animal 0.3 * 0.9 = 0.27 beats car 0.7 * 0.1 = 0.07
        assert decisions[0].chosen == 0
        assert decisions[0].ranked[0][1] == pytest.approx(0.27)
        assert decisions[0].ranked[1][1] == pytest.approx(0.07)

    def test_beta_zero_matches_greedy_everywhere(self):
        for seed in range(10):
            w = generate_synthetic_world(
                seed,
                SynthConfig(n_entities=120, n_mention_strings=25, n_documents=8, n_context_axes=4, n_axes=4),
            )
            system = w.latent_system
            axes = tuple(AxisSpec(a.name, a.type_names) for a in system.axes)
            rng = np.random.default_rng(seed)
            model = constant_belief_model(axes, [rng.random(2) for _ in axes])
            params = SmoothingParams(alpha=(1.0,) * len(axes), beta=0.0)
            cache = MembershipCache(w.graph)
            decisions = link_corpus(w.corpus, model, system, w.stats, w.graph, params, cache=cache)
            preds = decisions_to_predictions(decisions)
            for r_doc in w.corpus.documents:
                for i, m in enumerate(r_doc.mentions):
                    text = r_doc.mention_text(m)
                    row = w.stats.counts(text)
                    want = min(row, key=lambda e: (-row[e], e))
                    assert preds[(r_doc.doc_id, i)] == want

    def test_fuzz_decisions_match_bruteforce_scoring(self):
        w = generate_synthetic_world(
            33, SynthConfig(n_entities=150, n_mention_strings=30, n_documents=10, n_context_axes=4)
        )
        system = w.latent_system
        cache = MembershipCache(w.graph)
        corpus = AnnotatedCorpus(w.corpus.documents[:4])
        labeling = label_corpus(corpus, w.graph, system, cache=cache)
        model, _ = train(corpus, labeling, TrainConfig(epochs=2, seed=1))
        params = SmoothingParams.uniform(len(system.axes), alpha=0.7, beta=0.8)
        from typelink.typeclf import predict

        decisions = link_corpus(corpus, model, system, w.stats, w.graph, params, cache=cache)
        by_key = {(d.doc_id, d.mention_idx): d for d in decisions}
        for doc in corpus.documents:
            beliefs = predict(model, doc.tokens)
            for i, m in enumerate(doc.mentions):
                text = doc.mention_text(m)
                pooled = pool_mention_beliefs(beliefs, (m.start, m.end))
                row = w.stats.counts(text)
                scored = sorted(
                    ((entity_score(e, pooled, text, w.stats, w.graph, system, params, cache=cache), -e) for e in row),
                    reverse=True,
                )
                want = -scored[0][1]
                assert by_key[(doc.doc_id, i)].chosen == want

    def test_one_hot_gold_beliefs_reproduce_oracle(self):
        w = generate_synthetic_world(
            44, SynthConfig(n_entities=150, n_mention_strings=30, n_documents=12, n_context_axes=4)
        )
        system = w.latent_system
        cache = MembershipCache(w.graph)
        label_matrix = cache.system_labels(system)
        params = SmoothingParams.uniform(len(system.axes), alpha=1.0, beta=1.0)
        hits = 0
        total = 0
        for doc in w.corpus.documents:
            for i, m in enumerate(doc.mentions):
                text = doc.mention_text(m)
                row = w.stats.counts(text)
                if not row:
                    continue
                total += 1
                gold_col = label_matrix[:, w.graph.index_of(m.gold)]
                pooled = []
                for axis_i, axis in enumerate(system.axes):
                    one_hot = np.zeros(len(axis.type_names))
                    one_hot[gold_col[axis_i]] = 1.0
                    pooled.append(one_hot)
                scored = sorted(
                    ((entity_score(e, pooled, text, w.stats, w.graph, system, params, cache=cache), -e) for e in row),
                    reverse=True,
                )
                hits += -scored[0][1] == m.gold
        oracle = oracle_accuracy(w.corpus, w.graph, system, w.stats, cache)
        assert hits == oracle.hits
        assert total == oracle.total

    def test_unknown_mentions_get_no_decision(self):
        graph, stats, system = jaguar_world()
        axes = (AxisSpec(system.axes[0].name, system.axes[0].type_names),)
        model = constant_belief_model(axes, [np.array([0.5, 0.5])])
        doc = Document(doc_id="d", lang="en", tokens=["unknown", "thing"], mentions=[Mention(0, 1, 0)])
        decisions = link(doc, model, system, stats, graph, SmoothingParams((1.0,), 1.0))
        assert decisions == []

    def test_scores_finite_and_nonnegative(self):
        graph, stats, system = jaguar_world()
        axes = (AxisSpec(system.axes[0].name, system.axes[0].type_names),)
        model = constant_belief_model(axes, [np.array([0.3, 0.7])])
        doc = Document(doc_id="d", lang="en", tokens=["jaguar"], mentions=[Mention(0, 1, 0)])
        for alpha in (0.0, 0.5, 1.0):
            for beta in (0.0, 0.5, 1.0):
                decisions = link(doc, model, system, stats, graph, SmoothingParams((alpha,), beta))
                for _, score in decisions[0].ranked:
                    assert np.isfinite(score)
                    assert score >= 0.0


class TestFitSmoothing:
    def world_with_model(self, seed=55):
        w = generate_synthetic_world(
            seed, SynthConfig(n_entities=150, n_mention_strings=30, n_documents=14, n_context_axes=4)
        )
        cache = MembershipCache(w.graph)
        system = w.latent_system
        corpus = AnnotatedCorpus(w.corpus.documents[:10])
        labeling = label_corpus(corpus, w.graph, system, cache=cache)
        model, _ = train(corpus, labeling, TrainConfig(lr=2e-3, epochs=20, seed=2))
        valid = AnnotatedCorpus(w.corpus.documents[10:])
        return w, cache, system, model, valid

    def test_beta_zero_grid_returns_baseline(self):
        w, cache, system, model, valid = self.world_with_model()
        params, acc = fit_smoothing(valid, model, system, w.stats, w.graph, alphas=(0.5,), betas=(0.0,), cache=cache)
        assert params.beta == 0.0
        assert acc == s_greedy(valid, w.stats)

    def test_result_is_max_over_explicit_grid(self):
        w, cache, system, model, valid = self.world_with_model()
        alphas, betas = (0.3, 0.9), (0.2, 0.8)
        best_params, best_acc = fit_smoothing(
            valid, model, system, w.stats, w.graph, alphas=alphas, betas=betas, cache=cache
        )
        explicit = []
        for a in alphas:
            for b in betas:
                params = SmoothingParams.uniform(len(system.axes), alpha=a, beta=b)
                decisions = link_corpus(valid, model, system, w.stats, w.graph, params, cache=cache)
                from typelink.evalcore import system_accuracy

                acc = system_accuracy(decisions_to_predictions(decisions), valid, w.stats)
                explicit.append(((a, b), acc))
        want = max(acc.hits for _, acc in explicit)
        assert best_acc.hits == want

    def test_fitted_never_below_beta_zero(self):
        w, cache, system, model, valid = self.world_with_model()
        params, acc = fit_smoothing(valid, model, system, w.stats, w.graph, cache=cache)
        baseline = s_greedy(valid, w.stats)
        assert acc.hits >= baseline.hits

    def test_empty_grid_rejected(self):
        w, cache, system, model, valid = self.world_with_model()
        with pytest.raises(ValueError, match="empty"):
            fit_smoothing(valid, model, system, w.stats, w.graph, alphas=(), betas=(0.5,), cache=cache)
