"""Lossless codec between quadruple sets and the (tag matrix, category grid) pair.

Geometry. The tag matrix is (n+1) x (n+1): rows index aspect tokens, columns
index opinion tokens, and index 0 on both axes is the [NULL] sentinel. Token
k of the sentence maps to grid index k+1. Each quadruple paints up to three
corner cells of its aspect-row/opinion-column rectangle:

    AB-OB  at (aspect.start, opinion.start)   both-begins corner
    AE-OE  at (aspect.end,   opinion.end)     both-ends corner
    link   at (aspect.start, opinion.end)     begin-end corner; carries the
                                              sentiment (standard), nothing
                                              (variant1) or sentiment and
                                              category (variant2)

An implicit aspect drops to row 0 and keeps only AB-OB and the link; an
implicit opinion drops to column 0 and keeps only the link and AE-OE. Cells
hold *sets* of tags: single-token spans make the corners coincide.

Decoding walks the link cells. Each link finds its opinion start as the
nearest AB-OB at or left of it in its row, and its aspect end as the nearest
AE-OE at or below it in its column. Links missing an anchor are dangling and
only counted, never raised: predicted matrices are noisy.

The category grid is (n+1) x |C| with row 0 = [NULL]. Gold grids mark every
token of a quad's anchor span (aspect when explicit, else opinion); decoding
binarizes at a threshold and reads maximal runs per category.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .core import (
    STANDARD,
    TAG_BEGIN,
    TAG_END,
    VARIANT1,
    VARIANT2,
    CategoryVocab,
    Quadruple,
    Sentiment,
    Span,
    TagSchema,
)
from .data import Sample
from .errors import ConflictingEncoding, InstanceTooLarge, UnsupportedSchema

SENTIMENT_LABELS = ("POS", "NEU", "NEG")


@dataclass
class Diagnostics:
    """Counters for everything the decoder tolerates instead of raising."""

    dangling_links: int = 0
    dangling_begin_markers: int = 0
    dangling_end_markers: int = 0
    unmatched_triplets: int = 0
    conflicting_samples: int = 0

    def merge(self, other: "Diagnostics") -> None:
        self.dangling_links += other.dangling_links
        self.dangling_begin_markers += other.dangling_begin_markers
        self.dangling_end_markers += other.dangling_end_markers
        self.unmatched_triplets += other.unmatched_triplets
        self.conflicting_samples += other.conflicting_samples


class TagMatrix:
    """(n+1) x (n+1) grid of tag sets; only non-empty cells are stored."""

    def __init__(self, n_tokens: int, schema: TagSchema):
        self.n_tokens = n_tokens
        self.size = n_tokens + 1
        self.schema = schema
        self.cells: dict[tuple[int, int], set[str]] = {}

    def add(self, row: int, col: int, tag: str) -> None:
        if not (0 <= row < self.size and 0 <= col < self.size):
            raise ValueError(f"cell ({row}, {col}) outside {self.size}x{self.size} grid")
        if row == 0 and col == 0:
            raise ValueError("cell (0, 0) must stay empty")
        if tag not in self.schema.tags:
            raise ValueError(f"tag {tag!r} not in schema {self.schema.variant}")
        self.cells.setdefault((row, col), set()).add(tag)

    def tags_at(self, row: int, col: int) -> set[str]:
        return self.cells.get((row, col), set())

    def to_dense(self) -> np.ndarray:
        """(n+1, n+1, T) 0/1 array in schema tag order (training target)."""
        dense = np.zeros((self.size, self.size, len(self.schema)), dtype=np.float64)
        for (row, col), tags in self.cells.items():
            for tag in tags:
                dense[row, col, self.schema.tag_id(tag)] = 1.0
        return dense

    @staticmethod
    def from_probabilities(
        probs: np.ndarray, schema: TagSchema, threshold: float = 0.5
    ) -> "TagMatrix":
        """Threshold (n+1, n+1, T) probabilities; strictly-greater so an
        all-0.5 untrained model yields an empty matrix. Cell (0, 0) is cleared."""
        size = probs.shape[0]
        matrix = TagMatrix(size - 1, schema)
        rows, cols, tag_ids = np.nonzero(probs > threshold)
        for row, col, tag_id in zip(rows.tolist(), cols.tolist(), tag_ids.tolist()):
            if row == 0 and col == 0:
                continue
            matrix.add(row, col, schema.tags[tag_id])
        return matrix

    def sorted_cells(self) -> list[tuple[int, int, list[str]]]:
        """Row-major cell dump with tags in schema order (debug/JSON form)."""
        order = {tag: i for i, tag in enumerate(self.schema.tags)}
        return [
            (row, col, sorted(tags, key=order.__getitem__))
            for (row, col), tags in sorted(self.cells.items())
        ]


class CategoryGrid:
    """(n+1) x L grid over labels; gold entries are 0/1, predictions are probabilities."""

    def __init__(self, values: np.ndarray, labels: tuple[str, ...]):
        if values.ndim != 2 or values.shape[1] != len(labels):
            raise ValueError(f"grid shape {values.shape} does not match {len(labels)} labels")
        self.values = values
        self.labels = labels

    @staticmethod
    def empty(n_tokens: int, labels: tuple[str, ...]) -> "CategoryGrid":
        return CategoryGrid(np.zeros((n_tokens + 1, len(labels)), dtype=np.float64), labels)

    def mark_span(self, label: str, span: Span) -> None:
        col = self.labels.index(label)
        self.values[span.start + 1:span.end + 2, col] = 1.0

    def runs(self, threshold: float = 0.5) -> list[tuple[str, Span | None]]:
        """Maximal runs of strictly-above-threshold tokens, per label.

        A positive sentinel row yields (label, None). Output is ordered by
        label id, then position.
        """
        out: list[tuple[str, Span | None]] = []
        positive = self.values > threshold
        for col, label in enumerate(self.labels):
            if positive[0, col]:
                out.append((label, None))
            start = None
            for row in range(1, self.values.shape[0]):
                if positive[row, col] and start is None:
                    start = row
                elif not positive[row, col] and start is not None:
                    out.append((label, Span(start - 1, row - 2)))
                    start = None
            if start is not None:
                out.append((label, Span(start - 1, self.values.shape[0] - 2)))
        return out

    def mean_probability(self, label: str, span: Span) -> float:
        col = self.labels.index(label)
        return float(self.values[span.start + 1:span.end + 2, col].mean())


@dataclass(frozen=True)
class AosTriplet:
    """Decoded (aspect, opinion, sentiment) with None marking implicit sides.

    sentiment is None only under variant1 (pair-only tag space); category is
    set only under variant2, where the link tag carries it.
    """

    aspect: Span | None
    opinion: Span | None
    sentiment: Sentiment | None
    category: str | None = None

    def __post_init__(self):
        if self.aspect is None and self.opinion is None:
            raise ValueError("aspect and opinion cannot both be implicit")

    def anchor(self) -> Span:
        return self.aspect if self.aspect is not None else self.opinion  # type: ignore[return-value]


@dataclass
class SampleEncoding:
    """Training/decoding targets for one sample."""

    tag_matrix: TagMatrix
    category_grid: CategoryGrid
    sentiment_grid: CategoryGrid | None = None  # variant1 only

    @property
    def n_tokens(self) -> int:
        return self.tag_matrix.n_tokens


def encode_sample(
    sample: Sample,
    schema: TagSchema,
    vocab: CategoryVocab,
    verify: bool = True,
) -> SampleEncoding:
    """Paint the corner cells and anchor-span grids for every gold quadruple.

    With verify=True (the default) the encoding is decoded back and compared
    against the gold set; any lossy collision raises ConflictingEncoding
    naming the quads that would be lost or invented.
    """
    n = len(sample.sentence)
    matrix = TagMatrix(n, schema)
    grid = CategoryGrid.empty(n, vocab.names)
    sent_grid = CategoryGrid.empty(n, SENTIMENT_LABELS) if schema.variant == VARIANT1 else None

    for quad in sample.gold:
        a, o = quad.aspect, quad.opinion
        link = schema.link_tag(quad.sentiment, quad.category)
        if a is not None and o is not None:
            matrix.add(a.start + 1, o.start + 1, TAG_BEGIN)
            matrix.add(a.end + 1, o.end + 1, TAG_END)
            matrix.add(a.start + 1, o.end + 1, link)
        elif a is None:
            matrix.add(0, o.start + 1, TAG_BEGIN)  # type: ignore[union-attr]
            matrix.add(0, o.end + 1, link)  # type: ignore[union-attr]
        else:
            matrix.add(a.start + 1, 0, link)
            matrix.add(a.end + 1, 0, TAG_END)
        if schema.variant != VARIANT2:
            grid.mark_span(quad.category, quad.anchor())
        if sent_grid is not None:
            sent_grid.mark_span(quad.sentiment.value, quad.anchor())

    encoding = SampleEncoding(matrix, grid, sent_grid)
    if verify:
        decoded = decode_encoding(encoding, schema, vocab)
        if sorted(decoded, key=_quad_key) != sorted(sample.gold, key=_quad_key):
            missing = set(sample.gold) - set(decoded)
            invented = set(decoded) - set(sample.gold)
            raise ConflictingEncoding(
                f"encoding is lossy for {sample.sentence.raw_text!r}: "
                f"lost {sorted(missing, key=_quad_key)}, invented {sorted(invented, key=_quad_key)}"
            )
    return encoding


def _quad_key(quad: Quadruple):
    def span_key(span: Span | None):
        return (-1, -1) if span is None else (span.start, span.end)

    return (span_key(quad.aspect), span_key(quad.opinion), quad.category, quad.sentiment.value)


def decode_triplets(
    matrix: TagMatrix, schema: TagSchema, diagnostics: Diagnostics | None = None
) -> list[AosTriplet]:
    """Resolve every link tag to a triplet via nearest-anchor matching.

    Output is row-major by link cell, then schema tag order within a cell.
    Links whose anchors are missing are skipped and counted, as are begin/end
    markers never selected by any link.
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    begin_cols: dict[int, list[int]] = {}  # row -> sorted cols bearing AB-OB
    end_rows: dict[int, list[int]] = {}  # col -> sorted rows bearing AE-OE
    links: list[tuple[int, int, str]] = []
    tag_order = {tag: i for i, tag in enumerate(schema.tags)}

    for (row, col), tags in sorted(matrix.cells.items()):
        if TAG_BEGIN in tags:
            begin_cols.setdefault(row, []).append(col)
        if TAG_END in tags:
            end_rows.setdefault(col, []).append(row)
        for tag in sorted(tags, key=tag_order.__getitem__):
            if schema.is_link_tag(tag):
                links.append((row, col, tag))

    used_begins: set[tuple[int, int]] = set()
    used_ends: set[tuple[int, int]] = set()
    triplets: list[AosTriplet] = []
    for row, col, tag in sorted(links, key=lambda x: (x[0], x[1], tag_order[x[2]])):
        sentiment, category = schema.parse_link_tag(tag)
        if row == 0 and col == 0:
            diagnostics.dangling_links += 1
            continue
        if row == 0:
            # implicit aspect: nearest AB-OB at or left of the link, same row
            begin = _nearest_at_most(begin_cols.get(0, []), col, lower=1)
            if begin is None:
                diagnostics.dangling_links += 1
                continue
            used_begins.add((0, begin))
            triplets.append(AosTriplet(None, Span(begin - 1, col - 1), sentiment, category))
        elif col == 0:
            # implicit opinion: nearest AE-OE at or below the link, same column
            end = _nearest_at_least(end_rows.get(0, []), row, upper=matrix.size - 1)
            if end is None:
                diagnostics.dangling_links += 1
                continue
            used_ends.add((end, 0))
            triplets.append(AosTriplet(Span(row - 1, end - 1), None, sentiment, category))
        else:
            begin = _nearest_at_most(begin_cols.get(row, []), col, lower=1)
            end = _nearest_at_least(end_rows.get(col, []), row, upper=matrix.size - 1)
            if begin is None or end is None:
                diagnostics.dangling_links += 1
                continue
            used_begins.add((row, begin))
            used_ends.add((end, col))
            triplets.append(
                AosTriplet(Span(row - 1, end - 1), Span(begin - 1, col - 1), sentiment, category)
            )

    for row, cols in begin_cols.items():
        diagnostics.dangling_begin_markers += sum(1 for c in cols if (row, c) not in used_begins)
    for col, rows in end_rows.items():
        diagnostics.dangling_end_markers += sum(1 for r in rows if (r, col) not in used_ends)
    return triplets


def _nearest_at_most(sorted_values: list[int], bound: int, lower: int) -> int | None:
    """Largest value <= bound and >= lower, or None."""
    idx = bisect.bisect_right(sorted_values, bound) - 1
    if idx < 0 or sorted_values[idx] < lower:
        return None
    return sorted_values[idx]


def _nearest_at_least(sorted_values: list[int], bound: int, upper: int) -> int | None:
    """Smallest value >= bound and <= upper, or None."""
    idx = bisect.bisect_left(sorted_values, bound)
    if idx >= len(sorted_values) or sorted_values[idx] > upper:
        return None
    return sorted_values[idx]


ORACLE_MAX_TOKENS = 12


def decode_triplets_oracle(matrix: TagMatrix, schema: TagSchema) -> list[AosTriplet]:
    """Exhaustive reference decoder: enumerate every candidate triplet and keep
    the ones whose required tags are present *and* that win the nearest-anchor
    tie-break for their own link cell. Agrees with decode_triplets by
    construction of the rule, not of the code."""
    n = matrix.n_tokens
    if n > ORACLE_MAX_TOKENS:
        raise InstanceTooLarge(f"oracle capped at {ORACLE_MAX_TOKENS} tokens, got {n}")

    def has(row: int, col: int, tag: str) -> bool:
        return tag in matrix.tags_at(row, col)

    spans = [Span(s, e) for s in range(n) for e in range(s, n)]
    link_tags = [tag for tag in schema.tags if schema.is_link_tag(tag)]
    kept: list[tuple[tuple[int, int, int], AosTriplet]] = []
    tag_order = {tag: i for i, tag in enumerate(schema.tags)}

    for tag in link_tags:
        sentiment, category = schema.parse_link_tag(tag)
        # explicit aspect + explicit opinion
        for aspect in spans:
            for opinion in spans:
                cell = (aspect.start + 1, opinion.end + 1)
                if not has(*cell, tag):
                    continue
                if not has(aspect.start + 1, opinion.start + 1, TAG_BEGIN):
                    continue
                if not has(aspect.end + 1, opinion.end + 1, TAG_END):
                    continue
                if not _wins_tie_break(matrix, cell, aspect, opinion):
                    continue
                kept.append(
                    (cell + (tag_order[tag],), AosTriplet(aspect, opinion, sentiment, category))
                )
        # implicit aspect (row 0)
        for opinion in spans:
            cell = (0, opinion.end + 1)
            if not has(*cell, tag) or not has(0, opinion.start + 1, TAG_BEGIN):
                continue
            if not _wins_tie_break(matrix, cell, None, opinion):
                continue
            kept.append((cell + (tag_order[tag],), AosTriplet(None, opinion, sentiment, category)))
        # implicit opinion (column 0)
        for aspect in spans:
            cell = (aspect.start + 1, 0)
            if not has(*cell, tag) or not has(aspect.end + 1, 0, TAG_END):
                continue
            if not _wins_tie_break(matrix, cell, aspect, None):
                continue
            kept.append((cell + (tag_order[tag],), AosTriplet(aspect, None, sentiment, category)))

    kept.sort(key=lambda item: item[0])
    return [triplet for _, triplet in kept]


def _wins_tie_break(
    matrix: TagMatrix, cell: tuple[int, int], aspect: Span | None, opinion: Span | None
) -> bool:
    """True iff this candidate is the nearest-anchor resolution of its link cell."""
    row, col = cell
    if opinion is not None:
        # opinion start must be the closest AB-OB at or left of the link
        for other in range(col, opinion.start + 1, -1):
            if TAG_BEGIN in matrix.tags_at(row, other):
                return False
    if aspect is not None:
        # aspect end must be the closest AE-OE at or below the link
        end_col = 0 if opinion is None else opinion.end + 1
        for other in range(row, aspect.end + 1):
            if TAG_END in matrix.tags_at(other, end_col):
                return False
    return True


def decode_categories(
    grid: CategoryGrid, threshold: float = 0.5
) -> list[tuple[str, Span | None]]:
    """Binarize the grid and return per-category maximal runs as spans."""
    return grid.runs(threshold)


ALL_MATCHING = "all_matching"
BEST_ONE = "best_one"


def assemble_quads(
    triplets: list[AosTriplet],
    category_spans: list[tuple[str, Span | None]],
    policy: str = ALL_MATCHING,
    grid: CategoryGrid | None = None,
    diagnostics: Diagnostics | None = None,
) -> list[Quadruple]:
    """Join triplets with category spans on the shared anchor span.

    all_matching attaches every category whose span equals the anchor;
    best_one keeps the one with the highest mean grid probability (vocab
    order breaks ties, and is the order used when no grid is given).
    Triplets with no matching category are dropped and counted.
    """
    if policy not in (ALL_MATCHING, BEST_ONE):
        raise ValueError(f"unknown assembly policy {policy!r}")
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    by_span: dict[Span, list[str]] = {}
    for category, span in category_spans:
        if span is not None:
            by_span.setdefault(span, []).append(category)

    quads: list[Quadruple] = []
    for triplet in triplets:
        if triplet.sentiment is None:
            raise UnsupportedSchema("assemble_quads needs sentiment-bearing triplets")
        categories = by_span.get(triplet.anchor(), [])
        if not categories:
            diagnostics.unmatched_triplets += 1
            continue
        if policy == BEST_ONE and len(categories) > 1:
            if grid is not None:
                categories = [
                    max(categories, key=lambda c: (grid.mean_probability(c, triplet.anchor()),
                                                   -grid.labels.index(c)))
                ]
            else:
                categories = categories[:1]
        for category in categories:
            quads.append(Quadruple(category, triplet.aspect, triplet.opinion, triplet.sentiment))
    return quads


def assemble_quads_variant1(
    pairs: list[AosTriplet],
    category_spans: list[tuple[str, Span | None]],
    sentiment_grid: CategoryGrid,
    policy: str = ALL_MATCHING,
    grid: CategoryGrid | None = None,
    diagnostics: Diagnostics | None = None,
) -> list[Quadruple]:
    """Variant1 assembly: pairs from the matrix, categories from the category
    grid, sentiment from the best-matching run of the sentiment grid."""
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    sentiment_runs: dict[Span, list[str]] = {}
    for label, span in sentiment_grid.runs():
        if span is not None:
            sentiment_runs.setdefault(span, []).append(label)

    resolved: list[AosTriplet] = []
    for pair in pairs:
        labels = sentiment_runs.get(pair.anchor(), [])
        if not labels:
            diagnostics.unmatched_triplets += 1
            continue
        best = max(labels, key=lambda s: (sentiment_grid.mean_probability(s, pair.anchor()),
                                          -SENTIMENT_LABELS.index(s)))
        resolved.append(AosTriplet(pair.aspect, pair.opinion, Sentiment(best)))
    return assemble_quads(resolved, category_spans, policy, grid, diagnostics)


def decode_encoding(
    encoding: SampleEncoding,
    schema: TagSchema,
    vocab: CategoryVocab,
    tag_threshold: float = 0.5,
    cat_threshold: float = 0.5,
    policy: str = ALL_MATCHING,
    diagnostics: Diagnostics | None = None,
) -> list[Quadruple]:
    """Full decode of one encoding back to quadruples, per schema variant."""
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    triplets = decode_triplets(encoding.tag_matrix, schema, diagnostics)
    if schema.variant == VARIANT2:
        return [
            Quadruple(t.category, t.aspect, t.opinion, t.sentiment)  # type: ignore[arg-type]
            for t in triplets
        ]
    category_spans = decode_categories(encoding.category_grid, cat_threshold)
    if schema.variant == VARIANT1:
        if encoding.sentiment_grid is None:
            raise UnsupportedSchema("variant1 decoding needs a sentiment grid")
        return assemble_quads_variant1(
            triplets, category_spans, encoding.sentiment_grid,
            policy, encoding.category_grid, diagnostics,
        )
    return assemble_quads(triplets, category_spans, policy, encoding.category_grid, diagnostics)
