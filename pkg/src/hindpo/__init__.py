"""Preference-optimization engine with actuality/finesse-weighted losses.

Library tour:

- :mod:`hindpo.textmetrics` tokenization, ROUGE/METEOR/semantic scorers,
  the weighted final score used for candidate ranking
- :mod:`hindpo.dataforge` corpus loading, ranking, bucketization, emission
- :mod:`hindpo.corpora` bundled deterministic toy corpora
- :mod:`hindpo.policy` trainable bigram softmax policy with exact gradients
- :mod:`hindpo.losses` the four preference-loss modes and finesse estimate
- :mod:`hindpo.trainer` staged training loop, gradient checking
- :mod:`hindpo.evalharness` generation and metric tables
- :mod:`hindpo.cli` the ``hindpo`` command
"""

from .corpora import separable_curriculum, toy_corpus
from .dataforge import (
    ActualityError,
    ActualityProvider,
    ArticleRecord,
    Candidate,
    ConstantActuality,
    CurriculumDataset,
    FileActuality,
    MetricBundle,
    PreferencePair,
    RecordEmbeddedActuality,
    SchemaError,
    attach_actuality,
    bucketize,
    dump_articles,
    emit_curriculum,
    forge,
    load_articles,
    score_and_rank,
    split_articles,
)
from .evalharness import MetricReport, evaluate, generate, parse_table, report_table
from .losses import (
    FinesseEstimate,
    LogRatios,
    LossConfig,
    LossExample,
    compute_finesse,
    hin_dpo_loss,
    loss_gradient,
    preference_score,
    standard_dpo_loss,
)
from .policy import BOS, EOS, BigramPolicy, OutOfVocabularyError, Vocabulary
from .textmetrics import (
    CharTrigramCosine,
    PrfScore,
    SemanticScorer,
    SemanticScorerError,
    final_score,
    meteor,
    rouge_l,
    rouge_n,
    tokenize,
)
from .trainer import (
    TrainConfig,
    TrainingError,
    TrainLog,
    attach_finesse,
    encode_pairs,
    gradcheck,
    preference_stats,
    train,
    vocab_from_pairs,
    weighted_margin_stats,
)
from .welford import Welford

__version__ = "0.1.0"
