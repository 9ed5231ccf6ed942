"""Joint CTC/RNN-T/attention beam search over deterministic toy models."""

from .core import (
    LOG_ZERO,
    Alignment,
    DecoderWeights,
    GuardError,
    Hypothesis,
    LoadError,
    UsageError,
    Vocabulary,
    compute_stage2_weights,
    ctc_collapse,
    joint_score,
    log_sum_exp,
    rnnt_collapse,
)
from .models import (
    CtcGrid,
    HashAttention,
    HashTransducer,
    ModelBundle,
    TableAttention,
    TableTransducer,
    load_models,
    save_models,
)
from .scorers import (
    AttentionScorer,
    CtcPrefixScorer,
    RnntPrefixScorer,
    ScoreResult,
    attention_score,
)
from .search import (
    ATTENTION_DRIVEN,
    CTC_DRIVEN,
    RNNT_DRIVEN,
    WEIGHT_PRESETS,
    NBestEntry,
    NBestList,
    SearchConfig,
    SearchStats,
    attention_driven_search,
    ctc_driven_search,
    rnnt_driven_search,
    run_search,
)

__version__ = "0.1.0"
