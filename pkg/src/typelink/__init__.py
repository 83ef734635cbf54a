"""typelink: automatic type-system design over knowledge graphs, plus
type-constrained entity disambiguation built on the discovered types."""

__version__ = "0.1.0"

from .kg import (
    KnowledgeGraph,
    LinkStats,
    WorldFormatError,
    candidates,
    load_graph,
    load_links,
    save_graph,
    save_links,
)
from .synth import SynthConfig, SyntheticWorld, generate_synthetic_world
from .typesys import (
    And,
    MembershipCache,
    Not,
    Or,
    Rel,
    Relation,
    TypeAxis,
    TypeSystem,
    eval_expr,
    label_entity,
    load_system,
    members,
    parse_system,
    save_system,
    serialize_system,
)
from .evalcore import (
    Accuracy,
    AnnotatedCorpus,
    Document,
    Mention,
    ObjectiveConfig,
    error_analysis,
    gold_recall,
    load_corpus,
    objective_j,
    oracle_accuracy,
    s_greedy,
    save_corpus,
    system_accuracy,
)
from .simplify import SimplificationReport, is_parent, polysemy_stats, simplify
from .learnability import (
    LearnabilityScore,
    WindowTrainConfig,
    auc,
    build_window_dataset,
    learnability,
    learnability_report,
    train_window_classifier,
)
from .search import (
    CandidatePool,
    SearchConfig,
    SearchResult,
    SubsetEvaluator,
    build_pool,
    cem,
    evaluate_subset,
    ga,
    greedy_beam,
    random_baseline,
)
from .typeclf import (
    TokenClassifierModel,
    TrainConfig,
    augment,
    label_corpus,
    load_model,
    predict,
    save_model,
    train,
)
from .linker import (
    LinkDecision,
    SmoothingParams,
    entity_score,
    fit_smoothing,
    link,
    pool_mention_beliefs,
)
