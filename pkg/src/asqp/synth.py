"""Seeded synthetic corpora and random tag matrices for tests and demos.

Generated samples are conflict-free by construction: every span any quad
uses is drawn from globally disjoint token slots separated by at least one
gap token, so corner cells never collide, nearest-anchor matching is exact,
and same-category anchor runs never merge. The one sharing pattern that is
provably safe, two quads with the same aspect and category but different
opinions, is mixed in deliberately.

Token types are unique to their sentence (w<sentence>x<position>), which
makes a corpus learnable by a plain embedding table: no token ever needs two
different labels.
"""

from __future__ import annotations

import numpy as np

from .codec import TagMatrix
from .core import CategoryVocab, Quadruple, Sentiment, Span, TagSchema, tokenize
from .data import Corpus, Sample

SENTIMENT_CYCLE = (Sentiment.POS, Sentiment.NEU, Sentiment.NEG)


def default_categories(n: int) -> list[str]:
    return [f"Topic{i}#Facet{i}" for i in range(n)]


def _pick_slots(rng: np.random.Generator, n_tokens: int, n_slots: int,
                max_len: int = 3) -> list[Span] | None:
    """Disjoint spans separated by >= 1 token, left to right; None if they don't fit."""
    if n_slots == 0:
        return []
    lengths = rng.integers(1, max_len + 1, size=n_slots)
    needed = int(lengths.sum()) + (n_slots - 1)
    if needed > n_tokens:
        return None
    slack = n_tokens - needed
    gaps = rng.multinomial(slack, np.full(n_slots + 1, 1.0 / (n_slots + 1)))
    slots: list[Span] = []
    cursor = int(gaps[0])
    for i, length in enumerate(lengths):
        slots.append(Span(cursor, cursor + int(length) - 1))
        cursor += int(length) + 1 + int(gaps[i + 1])
    return slots


def random_sample(
    rng: np.random.Generator,
    vocab: CategoryVocab,
    sentence_idx: int = 0,
    n_tokens: tuple[int, int] = (6, 20),
    max_quads: int = 5,
    force_class: str | None = None,
    category_pool: list[str] | None = None,
    single_sentiment_per_anchor: bool = False,
) -> Sample:
    """One conflict-free sample with up to max_quads quadruples.

    single_sentiment_per_anchor makes shared-aspect quad pairs agree on
    sentiment; required for variant1, whose per-token sentiment runs cannot
    carry two sentiments on one anchor.
    """
    n = int(rng.integers(n_tokens[0], n_tokens[1] + 1))
    n_quads = int(rng.integers(1, max_quads + 1))

    specs: list[str] = []
    slots_needed = 0
    while len(specs) < n_quads:
        if force_class is not None and not specs:
            kind = force_class
        else:
            kind = ["EA&EO", "EA&IO", "IA&EO", "shared"][int(rng.integers(0, 4))]
        if kind == "shared" and len(specs) + 2 <= n_quads:
            specs.extend(["shared", "shared2"])
            slots_needed += 3  # one aspect, two opinions
        elif kind != "shared":
            specs.append(kind)
            slots_needed += 2 if kind == "EA&EO" else 1

    slots = _pick_slots(rng, n, slots_needed)
    while slots is None:  # sentence too short for the layout; drop a quad
        if specs[-1] == "shared2":
            specs = specs[:-2]
            slots_needed -= 3
        else:
            slots_needed -= 2 if specs[-1] == "EA&EO" else 1
            specs = specs[:-1]
        if not specs:
            specs = ["EA&EO" if n >= 3 else "EA&IO"]
            slots_needed = 2 if specs[0] == "EA&EO" else 1
        slots = _pick_slots(rng, n, slots_needed)

    def pick_category() -> str:
        pool = category_pool if category_pool else list(vocab.names)
        return pool[int(rng.integers(0, len(pool)))]

    def pick_sentiment() -> Sentiment:
        return SENTIMENT_CYCLE[int(rng.integers(0, 3))]

    quads: list[Quadruple] = []
    cursor = 0
    i = 0
    while i < len(specs):
        kind = specs[i]
        if kind == "shared":
            aspect, first, second = slots[cursor:cursor + 3]
            cursor += 3
            category = pick_category()
            s1, s2 = pick_sentiment(), pick_sentiment()
            if single_sentiment_per_anchor:
                s2 = s1
            quads.append(Quadruple(category, aspect, first, s1))
            quads.append(Quadruple(category, aspect, second, s2))
            i += 2
            continue
        if kind == "EA&EO":
            aspect, opinion = slots[cursor:cursor + 2]
            cursor += 2
            quads.append(Quadruple(pick_category(), aspect, opinion, pick_sentiment()))
        elif kind == "EA&IO":
            aspect = slots[cursor]
            cursor += 1
            quads.append(Quadruple(pick_category(), aspect, None, pick_sentiment()))
        else:  # IA&EO
            opinion = slots[cursor]
            cursor += 1
            quads.append(Quadruple(pick_category(), None, opinion, pick_sentiment()))
        i += 1

    text = " ".join(f"w{sentence_idx}x{pos}" for pos in range(n))
    return Sample(tokenize(text), tuple(quads))


def random_corpus(
    seed: int,
    n_samples: int,
    n_categories: int = 8,
    n_tokens: tuple[int, int] = (6, 20),
    max_quads: int = 5,
    single_sentiment_per_anchor: bool = False,
) -> Corpus:
    """Conflict-free corpus covering all three implicitness classes and, once
    enough quads exist, every category and sentiment."""
    rng = np.random.default_rng(seed)
    vocab = CategoryVocab(default_categories(n_categories))
    unseen_categories = list(vocab.names)
    classes = ["EA&EO", "EA&IO", "IA&EO"]
    samples = []
    for idx in range(n_samples):
        force = classes[idx % 3] if idx < 3 else None
        pool = [unseen_categories.pop(0)] if unseen_categories else None
        samples.append(
            random_sample(
                rng, vocab, idx, n_tokens, max_quads, force, pool,
                single_sentiment_per_anchor,
            )
        )
    return Corpus(tuple(samples), vocab)


def random_tag_matrix(
    rng: np.random.Generator,
    schema: TagSchema,
    n_tokens: int,
    density: float = 0.12,
) -> TagMatrix:
    """Noise matrix for decoder stress tests: independent random tag drops,
    cell (0, 0) kept empty. Includes dangling markers and anchorless links."""
    matrix = TagMatrix(n_tokens, schema)
    size = n_tokens + 1
    for row in range(size):
        for col in range(size):
            if row == 0 and col == 0:
                continue
            for tag in schema.tags:
                if rng.random() < density:
                    matrix.add(row, col, tag)
    return matrix
