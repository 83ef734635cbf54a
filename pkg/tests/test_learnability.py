import numpy as np
import pytest

from typelink.evalcore import AnnotatedCorpus, Document, Mention
from typelink.kg import INSTANCE_OF, WIKIPEDIA_CATEGORY, KnowledgeGraph
from typelink.learnability import (
    WINDOW,
    WindowSample,
    WindowTrainConfig,
    auc,
    build_window_dataset,
    build_window_vocab,
    learnability,
    learnability_report,
    train_window_classifier,
)
from typelink.typesys import MembershipCache, Relation


def brute_force_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestAuc:
    def test_fixed_case(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [False, False, True, True]) == pytest.approx(0.75, abs=1e-12)

    def test_perfect_separation(self):
        assert auc([0.1, 0.2, 0.8, 0.9], [False, False, True, True]) == 1.0

    def test_all_ties_give_half(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [False, True, False, True]) == pytest.approx(0.5)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc([0.1, 0.2], [True, True])

    def test_matches_pair_counting_oracle(self):
        rng = np.random.default_rng(53)
        for trial in range(1000):
            n = int(rng.integers(2, 30))
            labels = rng.random(n) < 0.5
            if labels.all() or not labels.any():
                labels[0] = ~labels[0]
            # quantised scores force plenty of ties
            scores = np.round(rng.random(n), 1).tolist()
            want = brute_force_auc(scores, labels.tolist())
            assert auc(scores, labels.tolist()) == pytest.approx(want, abs=1e-9)

    def test_negation_identity(self):
        rng = np.random.default_rng(59)
        scores = rng.random(50).tolist()
        labels = (rng.random(50) < 0.4).tolist()
        labels[0], labels[1] = True, False
        a = auc(scores, labels)
        b = auc([-s for s in scores], labels)
        assert a == pytest.approx(1.0 - b, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(61)
        scores = rng.random(60).tolist()
        labels = (rng.random(60) < 0.5).tolist()
        labels[0], labels[1] = True, False
        a = auc(scores, labels)
        b = auc([np.exp(3 * s) for s in scores], labels)
        assert a == pytest.approx(b, abs=1e-12)


def tiny_graph():
    return KnowledgeGraph({0: "in", 1: "out", 2: "root"}, [(0, INSTANCE_OF, 2)])


class TestWindowDataset:
    def test_document_start_is_left_padded(self):
        g = tiny_graph()
        corpus = AnnotatedCorpus(
            [Document(doc_id="d", lang="en", tokens=["m", "t1", "t2"], mentions=[Mention(0, 1, 0)])]
        )
        samples, vocab = build_window_dataset(corpus, g, Relation(root=2, membership_edge=INSTANCE_OF))
        assert len(samples) == 1
        ctx = samples[0].context
        assert len(ctx) == 2 * WINDOW
        assert ctx[:WINDOW] == (0,) * WINDOW  # fully padded left context
        assert ctx[WINDOW] == vocab["t1"]

    def test_empty_membership_gives_all_negative(self):
        g = tiny_graph()
        corpus = AnnotatedCorpus(
            [Document(doc_id="d", lang="en", tokens=["a", "m", "b"], mentions=[Mention(1, 2, 1)])]
        )
        samples, _ = build_window_dataset(corpus, g, Relation(root=1, membership_edge=INSTANCE_OF))
        assert [s.label for s in samples] == [False]

    def test_labels_match_membership_oracle(self, standard_world, standard_cache):
        relation = standard_world.latent_relations[0]
        samples, _ = build_window_dataset(
            standard_world.corpus, standard_world.graph, relation, cache=standard_cache
        )
        member = standard_cache.members(relation)
        golds = [m.gold for d in standard_world.corpus.documents for m in d.mentions]
        assert len(samples) == len(golds)
        assert [s.label for s in samples] == [g in member for g in golds]

    def test_mention_tokens_excluded_from_window(self):
        g = tiny_graph()
        tokens = [f"l{i}" for i in range(10)] + ["mention"] + [f"r{i}" for i in range(10)]
        corpus = AnnotatedCorpus([Document(doc_id="d", lang="en", tokens=tokens, mentions=[Mention(10, 11, 0)])])
        samples, vocab = build_window_dataset(corpus, g, Relation(root=2, membership_edge=INSTANCE_OF))
        assert vocab["mention"] not in samples[0].context


def separable_dataset(rng, n=4000, vocab=60, trigger=7):
    samples = []
    for _ in range(n):
        ctx = rng.integers(1, vocab, size=2 * WINDOW)
        label = bool(rng.random() < 0.5)
        if label:
            ctx[int(rng.integers(2 * WINDOW))] = trigger
        else:
            ctx[ctx == trigger] = trigger + 1
        samples.append(WindowSample(tuple(int(t) for t in ctx), label))
    return samples


class TestWindowClassifier:
    def test_learns_separable_trigger(self):
        rng = np.random.default_rng(67)
        samples = separable_dataset(rng)
        split = int(len(samples) * 0.8)
        model = train_window_classifier(samples[:split], seed=1)
        held = samples[split:]
        scores = model.scores(np.array([s.context for s in held]))
        measured = auc(scores.tolist(), [s.label for s in held])
        assert measured > 0.95

    def test_random_labels_score_near_chance(self):
        rng = np.random.default_rng(71)
        samples = [
            WindowSample(tuple(int(t) for t in rng.integers(1, 50, size=2 * WINDOW)), bool(rng.random() < 0.5))
            for _ in range(2000)
        ]
        split = int(len(samples) * 0.8)
        model = train_window_classifier(samples[:split], seed=2)
        held = samples[split:]
        scores = model.scores(np.array([s.context for s in held]))
        measured = auc(scores.tolist(), [s.label for s in held])
        assert 0.4 <= measured <= 0.6

    def test_same_seed_identical_parameters(self):
        rng = np.random.default_rng(73)
        samples = separable_dataset(rng, n=600)
        a = train_window_classifier(samples, seed=9)
        b = train_window_classifier(samples, seed=9)
        assert np.array_equal(a.embeddings, b.embeddings)
        assert np.array_equal(a.weights, b.weights)
        assert a.bias == b.bias

    def test_empty_or_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_window_classifier([], seed=0)
        with pytest.raises(ValueError):
            train_window_classifier([WindowSample((1,) * (2 * WINDOW), True)], seed=0)


class TestLearnability:
    def test_single_axis_system_score(self, standard_world, standard_cache):
        score = learnability(
            [standard_world.latent_relations[0]], standard_world.corpus, standard_world.graph,
            master_seed=1, cache=standard_cache,
        )
        assert score.system_score == pytest.approx(score.axes[0].auc_mean)

    def test_system_score_is_mean_of_axis_means(self):
        from typelink.learnability import AxisLearnability, LearnabilityScore

        r1 = Relation(root=1, membership_edge=INSTANCE_OF)
        r2 = Relation(root=2, membership_edge=INSTANCE_OF)
        score = LearnabilityScore(
            axes=(
                AxisLearnability(r1, 0.9, 0.0, (0.9,), False),
                AxisLearnability(r2, 0.7, 0.0, (0.7,), False),
            )
        )
        assert score.system_score == pytest.approx(0.8)

    def test_matches_stored_run_aucs(self, standard_world, standard_cache):
        rels = list(standard_world.latent_relations[:3]) + list(standard_world.category_relations[:2])
        score = learnability(rels, standard_world.corpus, standard_world.graph, master_seed=5, cache=standard_cache)
        for axis in score.axes:
            assert axis.auc_mean == pytest.approx(float(np.mean(axis.run_aucs)))
            assert axis.auc_std == pytest.approx(float(np.std(axis.run_aucs)))

    def test_single_class_axis_flagged_at_chance(self, standard_world, standard_cache):
        # a root with no members puts every label on one side
        empty = Relation(root=standard_world.graph.entity_ids[0], membership_edge="no_such_kind")
        score = learnability([empty], standard_world.corpus, standard_world.graph, master_seed=0, cache=standard_cache)
        assert score.axes[0].auc_mean == 0.5
        assert score.axes[0].flagged_zero

    def test_deterministic_across_runs(self, standard_world, standard_cache):
        rels = list(standard_world.latent_relations[:2])
        a = learnability(rels, standard_world.corpus, standard_world.graph, master_seed=3, cache=standard_cache)
        b = learnability(rels, standard_world.corpus, standard_world.graph, master_seed=3, cache=standard_cache)
        assert [x.run_aucs for x in a.axes] == [x.run_aucs for x in b.axes]

    def test_instance_of_axes_beat_categories(self, standard_world, standard_cache):
        rels = list(standard_world.latent_relations) + list(standard_world.category_relations)
        score = learnability(rels, standard_world.corpus, standard_world.graph, master_seed=11, cache=standard_cache)
        rows = {r.edge_kind: r for r in learnability_report(score)}
        assert rows[INSTANCE_OF].auc_mean > rows[WIKIPEDIA_CATEGORY].auc_mean


class TestLearnabilityReport:
    def test_single_kind_single_row(self, standard_world, standard_cache):
        score = learnability(
            list(standard_world.latent_relations[:2]), standard_world.corpus, standard_world.graph,
            master_seed=2, cache=standard_cache,
        )
        rows = learnability_report(score)
        assert len(rows) == 1
        assert rows[0].edge_kind == INSTANCE_OF

    def test_empty_input(self):
        from typelink.learnability import LearnabilityScore

        assert learnability_report(LearnabilityScore(axes=())) == []

    def test_group_means_match_recomputation(self, standard_world, standard_cache):
        rels = list(standard_world.latent_relations[:4]) + list(standard_world.category_relations[:3])
        score = learnability(rels, standard_world.corpus, standard_world.graph, master_seed=4, cache=standard_cache)
        rows = {r.edge_kind: r for r in learnability_report(score)}
        for kind in (INSTANCE_OF, WIKIPEDIA_CATEGORY):
            means = [a.auc_mean for a in score.axes if a.relation.membership_edge == kind]
            assert rows[kind].auc_mean == pytest.approx(float(np.mean(means)))
            assert rows[kind].n_axes == len(means)
