"""Aspect-sentiment quadruple extraction on a token-pair tag grid.

Pipeline, end to end: corpora of (sentence, quadruple set) pairs are encoded
into a corner-tag matrix plus per-token category assignments, a two-head
scorer learns both targets jointly with negative sampling, and predictions
decode back to quadruples that are scored with strict four-way exact match.
"""

from .core import (
    NULL_TOKEN,
    PER_CHARACTER,
    SPACE_PUNCT,
    STANDARD,
    VARIANT1,
    VARIANT2,
    CategoryVocab,
    Quadruple,
    Sentence,
    Sentiment,
    Span,
    TagSchema,
    char_span_to_token_span,
    tokenize,
)
from .codec import (
    AosTriplet,
    CategoryGrid,
    Diagnostics,
    SampleEncoding,
    TagMatrix,
    assemble_quads,
    decode_categories,
    decode_encoding,
    decode_triplets,
    decode_triplets_oracle,
    encode_sample,
)
from .data import (
    Corpus,
    Sample,
    StatsReport,
    compute_stats,
    load_jsonl,
    load_legacy,
    sample_to_record,
    save_jsonl,
    split,
)
from .eval import (
    BreakdownReport,
    ErrorReport,
    Metrics,
    breakdown_by_implicitness,
    corpus_breakdown,
    corpus_error_analysis,
    corpus_prf,
    error_analysis,
    strict_quad_prf,
)
from .model import (
    FileBacked,
    HashedFrozen,
    LossBreakdown,
    LossMask,
    ScorerParams,
    TrainableTable,
    acd_forward,
    aosc_forward,
    backward,
    build_token_vocab,
    init_params,
    joint_loss,
    load_checkpoint,
    predict,
    sample_negatives,
    save_checkpoint,
)
from .train import TrainConfig, TrainHistory, evaluate_checkpoint, train

__all__ = [name for name in dir() if not name.startswith("_")]
