"""Finite-difference verification of the analytic gradients.

Central differences on the batch loss, entry by entry, against backward().
Small dimensions keep the exhaustive sweep cheap; 64-bit floats keep the
truncation error far below the acceptance bound.
"""

from __future__ import annotations

import numpy as np

from .codec import encode_sample
from .core import TagSchema, STANDARD
from .model import (
    ScorerParams,
    TrainableTable,
    backward,
    batch_loss,
    build_token_vocab,
    init_params,
    prepare_sample,
    sample_negatives,
)
from .synth import random_corpus

FD_STEP = 1e-5
REL_ERR_FLOOR = 1e-6


def finite_difference(loss_fn, arrays: dict[str, np.ndarray], h: float = FD_STEP
                      ) -> dict[str, np.ndarray]:
    grads = {}
    for name, array in arrays.items():
        grad = np.zeros_like(array)
        flat = array.ravel()
        grad_flat = grad.ravel()
        for idx in range(flat.size):
            original = flat[idx]
            flat[idx] = original + h
            up = loss_fn()
            flat[idx] = original - h
            down = loss_fn()
            flat[idx] = original
            grad_flat[idx] = (up - down) / (2 * h)
        grads[name] = grad
    return grads


def max_relative_error(analytic: dict[str, np.ndarray],
                       numeric: dict[str, np.ndarray]) -> float:
    worst = 0.0
    for name, a in analytic.items():
        f = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), REL_ERR_FLOOR)
        worst = max(worst, float((np.abs(a - f) / denom).max()))
    return worst


def gradcheck_once(
    seed: int,
    schema_variant: str = STANDARD,
    embed_dim: int = 3,
    pair_dim: int | None = None,
    alpha: float = 1.0,
    beta: float = 1.0,
    neg_rate: float = 0.4,
) -> float:
    """Max relative error for one seeded random batch of two small samples."""
    corpus = random_corpus(seed, n_samples=2, n_categories=3, n_tokens=(3, 5), max_quads=2)
    schema = TagSchema.for_variant(schema_variant, corpus.vocab)
    if pair_dim is None:
        pair_dim = 2 * len(schema)
    token_vocab = build_token_vocab(corpus)
    params = init_params(
        seed + 1, embed_dim, pair_dim, schema, corpus.vocab, token_vocab=token_vocab
    )
    provider = TrainableTable(token_vocab, embed_dim)
    batch = []
    masks = []
    for i, sample in enumerate(corpus.samples):
        encoding = encode_sample(sample, schema, corpus.vocab)
        batch.append(prepare_sample(sample.sentence, encoding, provider, params))
        masks.append(sample_negatives(encoding, neg_rate, [seed, i, 7]))

    analytic = backward(batch, params, masks, alpha, beta)
    numeric = finite_difference(
        lambda: batch_loss(batch, params, masks, alpha, beta).total, params.arrays()
    )
    return max_relative_error(analytic, numeric)


def gradcheck_suite(base_seed: int = 0, n_seeds: int = 10) -> float:
    """Worst relative error across seeds; mixes in a variant1 run so the
    sentiment head is covered too."""
    worst = 0.0
    for offset in range(n_seeds):
        variant = "variant1" if offset % 3 == 2 else STANDARD
        worst = max(worst, gradcheck_once(base_seed + offset, variant))
    return worst
