import numpy as np
import pytest

from typelink.kg import INSTANCE_OF, SUBCLASS_OF, WIKIPEDIA_CATEGORY, KnowledgeGraph, LinkStats
from typelink.synth import SynthConfig, generate_synthetic_world
from typelink.typesys import MembershipCache

STANDARD_SEED = 7


@pytest.fixture(scope="session")
def standard_world():
    """The default synthetic world used across integration-level tests."""
    return generate_synthetic_world(STANDARD_SEED)


@pytest.fixture(scope="session")
def standard_cache(standard_world):
    return MembershipCache(standard_world.graph)


@pytest.fixture()
def city_world():
    """Hand-built miniature: two cities attached to a city class, plus a
    country and an unrelated person."""
    entities = {
        0: "Paris",
        1: "San Francisco",
        2: "city",
        3: "France",
        4: "Ada",
        5: "metropolis",
    }
    edges = [
        (0, INSTANCE_OF, 2),
        (1, INSTANCE_OF, 2),
        (5, SUBCLASS_OF, 2),
        (0, WIKIPEDIA_CATEGORY, 3),
    ]
    return KnowledgeGraph(entities, edges)


def random_graph(rng: np.random.Generator, n: int = 20, kinds=(INSTANCE_OF, SUBCLASS_OF, "occupation")) -> KnowledgeGraph:
    """Random sparse DAG-ish graph (upward edges only, so cycles are absent
    unless a test adds them explicitly)."""
    entities = {i: f"n{i}" for i in range(n)}
    edges = set()
    for child in range(n - 1):
        for _ in range(int(rng.integers(0, 3))):
            parent = int(rng.integers(child + 1, n))
            kind = kinds[int(rng.integers(len(kinds)))]
            edges.add((child, kind, parent))
    return KnowledgeGraph(entities, sorted(edges))


def random_stats(rng: np.random.Generator, n_entities: int, n_mentions: int, max_candidates: int = 5) -> LinkStats:
    table = {}
    for m in range(n_mentions):
        k = int(rng.integers(1, max_candidates + 1))
        ids = rng.choice(n_entities, size=min(k, n_entities), replace=False)
        table[f"m{m}"] = {int(e): int(rng.integers(1, 100)) for e in ids}
    return LinkStats(table)
