"""Trainable two-head scorer over token embeddings.

Category head, applied per token (sentinel row included):
    probs = sigmoid(out_w . relu(hidden_w . h + hidden_b))

Pair head, applied per token pair: project every token into an aspect vector
and an opinion vector of size pair_dim, cut both into one block per tag, and
score cell (i, j, t) as the sigmoid of the block-t dot product:
    a_i = aspect_w . h_i + aspect_b
    o_j = opinion_w . h_j + opinion_b
    probs[i, j, t] = sigmoid(<a_i[t], o_j[t]>)

Training uses element-wise binary cross-entropy on a sampled subset of cells:
all labeled cells plus a fixed fraction of the unlabeled ones, resampled per
epoch. Each loss component is normalized by its own count of unmasked
entries, so the negative-sampling rate does not rescale gradients.

variant1 adds a sentiment head with the category head's structure (three
outputs); its cross-entropy pools with the category component.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .codec import (
    SENTIMENT_LABELS,
    CategoryGrid,
    Diagnostics,
    SampleEncoding,
    TagMatrix,
    decode_encoding,
)
from .core import (
    NULL_TOKEN,
    STANDARD,
    VARIANT1,
    CategoryVocab,
    Quadruple,
    Sentence,
    TagSchema,
)
from .errors import (
    AlignmentError,
    CheckpointError,
    MissingEmbedding,
    NonFiniteGradient,
    NonFiniteLoss,
    ShapeMismatch,
    UnsupportedSchema,
    VocabMismatch,
)

PROB_EPS = 1e-7
UNK_TOKEN = "[UNK]"

EMBED_MAGIC = b"OAQP"
EMBED_VERSION = 1
CHECKPOINT_MAGIC = b"OASC"
CHECKPOINT_VERSION = 1


def vocab_hash(vocab: CategoryVocab) -> str:
    return hashlib.sha256("\x00".join(vocab.names).encode("utf-8")).hexdigest()[:16]


def sentence_embedding_id(raw_text: str) -> str:
    """Content-addressed sentence key used by the embedding container."""
    return hashlib.sha256(raw_text.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# parameters


@dataclass
class ScorerParams:
    """All learnable weights, plus enough metadata to rebuild the setup."""

    embed_dim: int
    pair_dim: int
    n_tags: int
    n_categories: int
    schema_variant: str
    vocab_hash: str
    category_vocab: tuple[str, ...]
    seed: int
    acd_hidden_w: np.ndarray
    acd_hidden_b: np.ndarray
    acd_out_w: np.ndarray
    aspect_w: np.ndarray
    aspect_b: np.ndarray
    opinion_w: np.ndarray
    opinion_b: np.ndarray
    sent_hidden_w: np.ndarray | None = None
    sent_hidden_b: np.ndarray | None = None
    sent_out_w: np.ndarray | None = None
    embed_table: np.ndarray | None = None
    token_vocab: tuple[str, ...] | None = None
    provider_kind: str = "trainable"
    provider_seed: int = 0

    def __post_init__(self):
        if self.pair_dim % self.n_tags:
            raise ShapeMismatch(
                f"pair_dim {self.pair_dim} not divisible by {self.n_tags} tags"
            )

    def arrays(self) -> dict[str, np.ndarray]:
        out = {
            "acd_hidden_w": self.acd_hidden_w,
            "acd_hidden_b": self.acd_hidden_b,
            "acd_out_w": self.acd_out_w,
            "aspect_w": self.aspect_w,
            "aspect_b": self.aspect_b,
            "opinion_w": self.opinion_w,
            "opinion_b": self.opinion_b,
        }
        if self.sent_hidden_w is not None:
            out["sent_hidden_w"] = self.sent_hidden_w
            out["sent_hidden_b"] = self.sent_hidden_b
            out["sent_out_w"] = self.sent_out_w
        if self.embed_table is not None:
            out["embed_table"] = self.embed_table
        return out

    def copy(self) -> "ScorerParams":
        clone = ScorerParams(**{**self.__dict__})
        for name, array in clone.arrays().items():
            setattr(clone, name, array.copy())
        return clone

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(array) for name, array in self.arrays().items()}


def init_params(
    seed: int,
    embed_dim: int,
    pair_dim: int,
    schema: TagSchema,
    vocab: CategoryVocab,
    token_vocab: tuple[str, ...] | None = None,
    provider_kind: str = "trainable",
    provider_seed: int = 0,
) -> ScorerParams:
    """Weights ~ uniform(+-1/sqrt(embed_dim)), biases zero, seeded draw order fixed."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(embed_dim)
    n_tags = len(schema)
    if pair_dim % n_tags:
        pair_dim += n_tags - pair_dim % n_tags  # round up to a whole block per tag

    def weights(*shape: int) -> np.ndarray:
        return rng.uniform(-bound, bound, size=shape)

    params = ScorerParams(
        embed_dim=embed_dim,
        pair_dim=pair_dim,
        n_tags=n_tags,
        n_categories=len(vocab),
        schema_variant=schema.variant,
        vocab_hash=vocab_hash(vocab),
        category_vocab=vocab.names,
        seed=seed,
        acd_hidden_w=weights(embed_dim, embed_dim),
        acd_hidden_b=np.zeros(embed_dim),
        acd_out_w=weights(len(vocab), embed_dim),
        aspect_w=weights(pair_dim, embed_dim),
        aspect_b=np.zeros(pair_dim),
        opinion_w=weights(pair_dim, embed_dim),
        opinion_b=np.zeros(pair_dim),
        provider_kind=provider_kind,
        provider_seed=provider_seed,
    )
    if schema.variant == VARIANT1:
        params.sent_hidden_w = weights(embed_dim, embed_dim)
        params.sent_hidden_b = np.zeros(embed_dim)
        params.sent_out_w = weights(len(SENTIMENT_LABELS), embed_dim)
    if token_vocab is not None:
        params.token_vocab = tuple(token_vocab)
        params.embed_table = weights(len(token_vocab), embed_dim)
    return params


# ---------------------------------------------------------------------------
# embedding providers


def build_token_vocab(corpus) -> tuple[str, ...]:
    """[NULL] and [UNK] first, then the corpus token types, sorted."""
    types = sorted({tok for sample in corpus.samples for tok in sample.sentence.tokens})
    return (NULL_TOKEN, UNK_TOKEN) + tuple(types)


class TrainableTable:
    """Embeddings looked up from the learned table inside ScorerParams."""

    kind = "trainable"
    trainable = True

    def __init__(self, token_vocab: tuple[str, ...], dim: int):
        if token_vocab[0] != NULL_TOKEN:
            raise ValueError(f"token vocab must start with {NULL_TOKEN}")
        self.token_vocab = tuple(token_vocab)
        self.index = {tok: i for i, tok in enumerate(self.token_vocab)}
        self.dim = dim

    def token_ids(self, sentence: Sentence) -> np.ndarray:
        unk = self.index[UNK_TOKEN]
        return np.array([0] + [self.index.get(t, unk) for t in sentence.tokens], dtype=np.int64)

    def embed(self, sentence: Sentence, params: ScorerParams) -> np.ndarray:
        if params.embed_table is None:
            raise ShapeMismatch("params carry no embedding table")
        return params.embed_table[self.token_ids(sentence)]


class HashedFrozen:
    """Frozen pseudo-embeddings: each token type gets a seeded random vector.

    Deterministic across runs and processes (token bytes are hashed with
    blake2b, not Python's salted hash).
    """

    kind = "hashed"
    trainable = False

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            token_key = int.from_bytes(digest, "little")
            rng = np.random.default_rng([self.seed, token_key])
            vec = rng.standard_normal(self.dim) / np.sqrt(self.dim)
            self._cache[token] = vec
        return vec

    def token_ids(self, sentence: Sentence) -> None:
        return None

    def embed(self, sentence: Sentence, params: ScorerParams) -> np.ndarray:
        rows = [self._vector(NULL_TOKEN)] + [self._vector(t) for t in sentence.tokens]
        return np.stack(rows)


class FileBacked:
    """Per-sentence precomputed embeddings from the binary container."""

    kind = "file"
    trainable = False

    def __init__(self, path: str):
        self.path = path
        self.dim, self._blocks = read_embedding_file(path)

    def token_ids(self, sentence: Sentence) -> None:
        return None

    def embed(self, sentence: Sentence, params: ScorerParams) -> np.ndarray:
        key = sentence_embedding_id(sentence.raw_text)
        block = self._blocks.get(key)
        if block is None:
            raise MissingEmbedding(f"no embedding block for {sentence.raw_text!r}")
        if block.shape[0] != len(sentence) + 1:
            raise AlignmentError(
                f"embedding block has {block.shape[0]} rows, sentence needs {len(sentence) + 1}"
            )
        return block


def write_embedding_file(path: str, dim: int, blocks: list[tuple[str, np.ndarray]]) -> None:
    """Binary container: magic, version, dim, count, then per sentence the
    length-prefixed id, token count m, and (m+1)*dim little-endian f32."""
    with open(path, "wb") as fh:
        fh.write(EMBED_MAGIC)
        fh.write(struct.pack("<III", EMBED_VERSION, dim, len(blocks)))
        for sentence_id, block in blocks:
            if block.ndim != 2 or block.shape[1] != dim:
                raise ShapeMismatch(f"block for {sentence_id} has shape {block.shape}")
            raw_id = sentence_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw_id)))
            fh.write(raw_id)
            fh.write(struct.pack("<I", block.shape[0] - 1))
            fh.write(block.astype("<f4").tobytes())


def read_embedding_file(path: str) -> tuple[int, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        payload = fh.read()
    if payload[:4] != EMBED_MAGIC:
        raise CheckpointError(f"{path}: bad magic {payload[:4]!r}")
    version, dim, count = struct.unpack_from("<III", payload, 4)
    if version != EMBED_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    offset = 16
    blocks: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (id_len,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            sentence_id = payload[offset:offset + id_len].decode("utf-8")
            offset += id_len
            (m,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            n_floats = (m + 1) * dim
            block = np.frombuffer(payload, dtype="<f4", count=n_floats, offset=offset)
            offset += 4 * n_floats
            blocks[sentence_id] = block.reshape(m + 1, dim).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: truncated container ({exc})") from None
    if len(blocks) != count:
        raise CheckpointError(f"{path}: duplicate sentence ids")
    return dim, blocks


# ---------------------------------------------------------------------------
# forward passes


def acd_forward(H: np.ndarray, params: ScorerParams) -> np.ndarray:
    """Per-token category probabilities, shape (n+1, |C|)."""
    _check_h(H, params)
    hidden = np.maximum(H @ params.acd_hidden_w.T + params.acd_hidden_b, 0.0)
    return _sigmoid(hidden @ params.acd_out_w.T)


def sentiment_forward(H: np.ndarray, params: ScorerParams) -> np.ndarray:
    if params.sent_hidden_w is None:
        raise UnsupportedSchema("params have no sentiment head (variant1 only)")
    _check_h(H, params)
    hidden = np.maximum(H @ params.sent_hidden_w.T + params.sent_hidden_b, 0.0)
    return _sigmoid(hidden @ params.sent_out_w.T)  # type: ignore[union-attr]


def aosc_forward(H: np.ndarray, params: ScorerParams, schema: TagSchema | None = None) -> np.ndarray:
    """Per-cell tag probabilities, shape (n+1, n+1, T)."""
    _check_h(H, params)
    if schema is not None and len(schema) != params.n_tags:
        raise ShapeMismatch(f"schema has {len(schema)} tags, params expect {params.n_tags}")
    m = H.shape[0]
    block = params.pair_dim // params.n_tags
    aspect = (H @ params.aspect_w.T + params.aspect_b).reshape(m, params.n_tags, block)
    opinion = (H @ params.opinion_w.T + params.opinion_b).reshape(m, params.n_tags, block)
    return _sigmoid(np.einsum("itk,jtk->ijt", aspect, opinion))


def _check_h(H: np.ndarray, params: ScorerParams) -> None:
    if H.ndim != 2 or H.shape[1] != params.embed_dim:
        raise ShapeMismatch(f"H has shape {H.shape}, expected (*, {params.embed_dim})")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    expx = np.exp(x[~pos])
    out[~pos] = expx / (1.0 + expx)
    return out


# ---------------------------------------------------------------------------
# masks and loss


@dataclass
class LossMask:
    """Boolean selectors: labeled entries always on, a sampled fraction of
    the unlabeled ones on top."""

    acd: np.ndarray  # (n+1, |C|)
    aosc: np.ndarray  # (n+1, n+1, T)
    sentiment: np.ndarray | None = None  # (n+1, |S|), variant1


def full_mask(encoding: SampleEncoding) -> LossMask:
    return sample_negatives(encoding, 1.0, 0)


def sample_negatives(encoding: SampleEncoding, rate: float, rng_seed) -> LossMask:
    """Unmask every positive plus round(rate * count) gold-negative entries,
    drawn without replacement, independently per target.

    The grid's sentinel row participates in a classification target only when
    it carries a positive label (it never does under the aspect-else-opinion
    anchor rule), so by default that loss runs over real tokens only. The
    pair target includes all cells except that (0, 0) stays a plain negative.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"negative sampling rate {rate} outside [0, 1]")
    rng = np.random.default_rng(rng_seed)
    acd = _mask_one(encoding.category_grid.values, rate, rng, skip_null_row=True)
    aosc = _mask_one(encoding.tag_matrix.to_dense(), rate, rng, skip_null_row=False)
    sentiment = None
    if encoding.sentiment_grid is not None:
        sentiment = _mask_one(encoding.sentiment_grid.values, rate, rng, skip_null_row=True)
    return LossMask(acd, aosc, sentiment)


def _mask_one(target: np.ndarray, rate: float, rng, skip_null_row: bool) -> np.ndarray:
    positives = target > 0.5
    eligible = np.ones_like(positives)
    if skip_null_row and not positives[0].any():
        eligible[0] = False
    pool = np.flatnonzero(eligible & ~positives)
    k = int(round(rate * pool.size))
    mask = positives.copy()
    if k:
        chosen = rng.choice(pool.size, size=k, replace=False)
        mask.flat[pool[chosen]] = True
    return mask


@dataclass
class LossBreakdown:
    total: float
    acd_loss: float
    aosc_loss: float
    alpha: float
    beta: float


def _bce_sum(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> tuple[float, int]:
    clamped = np.clip(pred, PROB_EPS, 1.0 - PROB_EPS)
    cell = -(target * np.log(clamped) + (1.0 - target) * np.log(1.0 - clamped))
    return float(cell[mask].sum()), int(mask.sum())


def joint_loss(
    pred_acd: np.ndarray,
    pred_aosc: np.ndarray,
    encoding: SampleEncoding,
    mask: LossMask,
    alpha: float = 1.0,
    beta: float = 1.0,
    pred_sentiment: np.ndarray | None = None,
) -> LossBreakdown:
    """Masked BCE per component, each normalized by its own unmasked count."""
    cls_sum, cls_count = _bce_sum(pred_acd, encoding.category_grid.values, mask.acd)
    if encoding.sentiment_grid is not None:
        if pred_sentiment is None or mask.sentiment is None:
            raise ShapeMismatch("variant1 loss needs sentiment predictions and mask")
        extra_sum, extra_count = _bce_sum(
            pred_sentiment, encoding.sentiment_grid.values, mask.sentiment
        )
        cls_sum += extra_sum
        cls_count += extra_count
    aosc_sum, aosc_count = _bce_sum(pred_aosc, encoding.tag_matrix.to_dense(), mask.aosc)
    acd_loss = cls_sum / cls_count if cls_count else 0.0
    aosc_loss = aosc_sum / aosc_count if aosc_count else 0.0
    total = alpha * acd_loss + beta * aosc_loss
    if not np.isfinite(total):
        raise NonFiniteLoss(f"loss is {total}")
    return LossBreakdown(total, acd_loss, aosc_loss, alpha, beta)


# ---------------------------------------------------------------------------
# batches and gradients


@dataclass
class PreparedSample:
    """Targets and embedding inputs fixed once per sample."""

    sentence: Sentence
    token_ids: np.ndarray | None  # trainable provider only
    H: np.ndarray | None  # frozen providers only
    y_acd: np.ndarray
    y_aosc: np.ndarray
    y_sentiment: np.ndarray | None
    encoding: SampleEncoding = field(repr=False, default=None)  # type: ignore[assignment]


def prepare_sample(sample_sentence: Sentence, encoding: SampleEncoding, provider,
                   params: ScorerParams) -> PreparedSample:
    ids = provider.token_ids(sample_sentence)
    H = None if provider.trainable else provider.embed(sample_sentence, params)
    y_sent = None if encoding.sentiment_grid is None else encoding.sentiment_grid.values
    return PreparedSample(
        sentence=sample_sentence,
        token_ids=ids,
        H=H,
        y_acd=encoding.category_grid.values,
        y_aosc=encoding.tag_matrix.to_dense(),
        y_sentiment=y_sent,
        encoding=encoding,
    )


def _grad_factor(pred: np.ndarray, target: np.ndarray, mask: np.ndarray, weight: float) -> np.ndarray:
    """d(mean masked BCE)/d(logit) = (p - y) on live cells, zero elsewhere.

    Cells in the clamp zone contribute a constant to the loss, hence exactly
    zero gradient; this keeps the analytic gradient consistent with finite
    differences of the clamped loss.
    """
    live = mask & (pred > PROB_EPS) & (pred < 1.0 - PROB_EPS)
    g = np.where(live, pred - target, 0.0)
    return g * weight


def batch_loss(batch: list[PreparedSample], params: ScorerParams,
               masks: list[LossMask], alpha: float, beta: float) -> LossBreakdown:
    """Mean of per-sample joint losses over the batch."""
    totals = np.zeros(3)
    for prepared, mask in zip(batch, masks):
        H = prepared.H if prepared.H is not None else params.embed_table[prepared.token_ids]
        pred_acd = acd_forward(H, params)
        pred_aosc = aosc_forward(H, params)
        pred_sent = sentiment_forward(H, params) if prepared.y_sentiment is not None else None
        piece = joint_loss(pred_acd, pred_aosc, prepared.encoding, mask, alpha, beta, pred_sent)
        totals += (piece.total, piece.acd_loss, piece.aosc_loss)
    totals /= max(len(batch), 1)
    return LossBreakdown(totals[0], totals[1], totals[2], alpha, beta)


def backward(batch: list[PreparedSample], params: ScorerParams,
             masks: list[LossMask], alpha: float, beta: float) -> dict[str, np.ndarray]:
    """Analytic gradients of batch_loss with respect to every parameter."""
    grads = params.zero_grads()
    scale = 1.0 / max(len(batch), 1)
    block = params.pair_dim // params.n_tags
    for prepared, mask in zip(batch, masks):
        if prepared.H is not None:
            H = prepared.H
        else:
            H = params.embed_table[prepared.token_ids]
        m = H.shape[0]
        gH = np.zeros_like(H)

        # classification lanes (category head, plus sentiment head on variant1)
        cls_count = int(mask.acd.sum())
        sent_count = int(mask.sentiment.sum()) if mask.sentiment is not None else 0
        denom = cls_count + sent_count
        if denom and alpha != 0.0:
            weight = alpha * scale / denom
            gH += _dense_head_grads(
                H, params.acd_hidden_w, params.acd_hidden_b, params.acd_out_w,
                prepared.y_acd, mask.acd, weight, grads,
                "acd_hidden_w", "acd_hidden_b", "acd_out_w",
            )
            if mask.sentiment is not None:
                gH += _dense_head_grads(
                    H, params.sent_hidden_w, params.sent_hidden_b, params.sent_out_w,
                    prepared.y_sentiment, mask.sentiment, weight, grads,
                    "sent_hidden_w", "sent_hidden_b", "sent_out_w",
                )

        # pair lane
        aosc_count = int(mask.aosc.sum())
        if aosc_count and beta != 0.0:
            aspect = (H @ params.aspect_w.T + params.aspect_b).reshape(m, params.n_tags, block)
            opinion = (H @ params.opinion_w.T + params.opinion_b).reshape(m, params.n_tags, block)
            pred = _sigmoid(np.einsum("itk,jtk->ijt", aspect, opinion))
            g_score = _grad_factor(pred, prepared.y_aosc, mask.aosc, beta * scale / aosc_count)
            g_aspect = np.einsum("ijt,jtk->itk", g_score, opinion).reshape(m, params.pair_dim)
            g_opinion = np.einsum("ijt,itk->jtk", g_score, aspect).reshape(m, params.pair_dim)
            grads["aspect_w"] += g_aspect.T @ H
            grads["aspect_b"] += g_aspect.sum(axis=0)
            grads["opinion_w"] += g_opinion.T @ H
            grads["opinion_b"] += g_opinion.sum(axis=0)
            gH += g_aspect @ params.aspect_w + g_opinion @ params.opinion_w

        if prepared.token_ids is not None and "embed_table" in grads:
            np.add.at(grads["embed_table"], prepared.token_ids, gH)

    for name, grad in grads.items():
        if not np.isfinite(grad).all():
            raise NonFiniteGradient(f"non-finite gradient in {name}")
    return grads


def _dense_head_grads(H, hidden_w, hidden_b, out_w, target, mask, weight, grads,
                      hidden_w_name, hidden_b_name, out_w_name) -> np.ndarray:
    """Backprop through sigmoid(out_w . relu(hidden_w . h + hidden_b)); returns dL/dH."""
    pre = H @ hidden_w.T + hidden_b
    hidden = np.maximum(pre, 0.0)
    pred = _sigmoid(hidden @ out_w.T)
    g_logit = _grad_factor(pred, target, mask, weight)
    grads[out_w_name] += g_logit.T @ hidden
    g_hidden = (g_logit @ out_w) * (pre > 0.0)
    grads[hidden_w_name] += g_hidden.T @ H
    grads[hidden_b_name] += g_hidden.sum(axis=0)
    return g_hidden @ hidden_w


# ---------------------------------------------------------------------------
# prediction


def predict(
    sentence: Sentence,
    params: ScorerParams,
    provider,
    schema: TagSchema,
    vocab: CategoryVocab,
    tag_threshold: float = 0.5,
    cat_threshold: float = 0.5,
    diagnostics: Diagnostics | None = None,
) -> list[Quadruple]:
    """Threshold both heads (strictly greater) and decode like gold encodings."""
    H = provider.embed(sentence, params)
    matrix = TagMatrix.from_probabilities(aosc_forward(H, params, schema), schema, tag_threshold)
    if schema.variant == STANDARD or schema.variant == VARIANT1:
        grid = CategoryGrid(acd_forward(H, params), vocab.names)
    else:
        grid = CategoryGrid.empty(len(sentence), vocab.names)
    sent_grid = None
    if schema.variant == VARIANT1:
        sent_grid = CategoryGrid(sentiment_forward(H, params), SENTIMENT_LABELS)
    encoding = SampleEncoding(matrix, grid, sent_grid)
    return decode_encoding(
        encoding, schema, vocab, cat_threshold=cat_threshold, diagnostics=diagnostics
    )


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: ScorerParams, path: str) -> None:
    arrays = params.arrays()
    header = {
        "embed_dim": params.embed_dim,
        "pair_dim": params.pair_dim,
        "n_tags": params.n_tags,
        "n_categories": params.n_categories,
        "schema_variant": params.schema_variant,
        "vocab_hash": params.vocab_hash,
        "category_vocab": list(params.category_vocab),
        "seed": params.seed,
        "token_vocab": list(params.token_vocab) if params.token_vocab else None,
        "provider_kind": params.provider_kind,
        "provider_seed": params.provider_seed,
        "arrays": [[name, list(array.shape)] for name, array in arrays.items()],
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        for array in arrays.values():
            fh.write(array.astype("<f8").tobytes())


def load_checkpoint(path: str) -> ScorerParams:
    with open(path, "rb") as fh:
        payload = fh.read()
    if payload[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {payload[:4]!r}")
    version, header_len = struct.unpack_from("<II", payload, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    header = json.loads(payload[12:12 + header_len].decode("utf-8"))
    offset = 12 + header_len
    loaded: dict[str, np.ndarray] = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape)) if shape else 1
        array = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
        loaded[name] = array.reshape(shape).copy()
    if offset != len(payload):
        raise CheckpointError(f"{path}: trailing or missing bytes")
    token_vocab = header["token_vocab"]
    return ScorerParams(
        embed_dim=header["embed_dim"],
        pair_dim=header["pair_dim"],
        n_tags=header["n_tags"],
        n_categories=header["n_categories"],
        schema_variant=header["schema_variant"],
        vocab_hash=header["vocab_hash"],
        category_vocab=tuple(header["category_vocab"]),
        seed=header["seed"],
        acd_hidden_w=loaded["acd_hidden_w"],
        acd_hidden_b=loaded["acd_hidden_b"],
        acd_out_w=loaded["acd_out_w"],
        aspect_w=loaded["aspect_w"],
        aspect_b=loaded["aspect_b"],
        opinion_w=loaded["opinion_w"],
        opinion_b=loaded["opinion_b"],
        sent_hidden_w=loaded.get("sent_hidden_w"),
        sent_hidden_b=loaded.get("sent_hidden_b"),
        sent_out_w=loaded.get("sent_out_w"),
        embed_table=loaded.get("embed_table"),
        token_vocab=tuple(token_vocab) if token_vocab else None,
        provider_kind=header.get("provider_kind", "trainable"),
        provider_seed=header.get("provider_seed", 0),
    )


def check_vocab(params: ScorerParams, vocab: CategoryVocab) -> None:
    if params.vocab_hash != vocab_hash(vocab):
        raise VocabMismatch(
            f"checkpoint built for vocab {params.vocab_hash}, corpus has {vocab_hash(vocab)}"
        )


def provider_from_params(params: ScorerParams, embeddings_path: str | None = None):
    """Rebuild the embedding provider a checkpoint was trained with."""
    if params.provider_kind == "trainable":
        if params.token_vocab is None:
            raise CheckpointError("trainable checkpoint without a token vocab")
        return TrainableTable(params.token_vocab, params.embed_dim)
    if params.provider_kind == "hashed":
        return HashedFrozen(params.embed_dim, params.provider_seed)
    if params.provider_kind == "file":
        if embeddings_path is None:
            raise CheckpointError("file-backed checkpoint needs an embedding file path")
        return FileBacked(embeddings_path)
    raise CheckpointError(f"unknown provider kind {params.provider_kind!r}")
