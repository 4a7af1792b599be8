import numpy as np
import pytest

from asqp.codec import (
    ALL_MATCHING,
    BEST_ONE,
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
from asqp.core import CategoryVocab, Quadruple, Sentiment, Span, TagSchema, tokenize
from asqp.data import Sample
from asqp.errors import ConflictingEncoding, InstanceTooLarge
from asqp.synth import random_corpus, random_sample, random_tag_matrix

STANDARD = TagSchema.standard()


def make_sample(text, quads):
    return Sample(tokenize(text), tuple(quads))


class TestEncode:
    def test_touch_screen_corners(self):
        vocab = CategoryVocab(["Screen#Sensitivity"])
        sample = make_sample(
            "touch screen is not sensitive",
            [Quadruple("Screen#Sensitivity", Span(0, 1), Span(3, 4), Sentiment.NEG)],
        )
        enc = encode_sample(sample, STANDARD, vocab)
        # tokens: touch=0 screen=1 not=3 sensitive=4; +1 for the sentinel axis
        assert enc.tag_matrix.tags_at(1, 4) == {"AB-OB"}
        assert enc.tag_matrix.tags_at(2, 5) == {"AE-OE"}
        assert enc.tag_matrix.tags_at(1, 5) == {"AB-OE-NEG"}
        assert len(enc.tag_matrix.cells) == 3
        assert enc.category_grid.values[1:3, 0].tolist() == [1.0, 1.0]

    def test_zero_quads(self):
        vocab = CategoryVocab(["A#B"])
        enc = encode_sample(make_sample("nothing here", []), STANDARD, vocab)
        assert enc.tag_matrix.cells == {}
        assert not enc.category_grid.values.any()

    def test_single_token_spans_share_cell(self):
        vocab = CategoryVocab(["A#B"])
        sample = make_sample(
            "cheap phone", [Quadruple("A#B", Span(1, 1), Span(0, 0), Sentiment.POS)]
        )
        enc = encode_sample(sample, STANDARD, vocab)
        assert enc.tag_matrix.tags_at(2, 1) == {"AB-OB", "AE-OE", "AB-OE-POS"}

    def test_implicit_opinion_column_zero(self):
        vocab = CategoryVocab(["Logistics#Speed"])
        sample = make_sample(
            "express package arrived",
            [Quadruple("Logistics#Speed", Span(0, 1), None, Sentiment.POS)],
        )
        enc = encode_sample(sample, STANDARD, vocab)
        assert enc.tag_matrix.tags_at(1, 0) == {"AB-OE-POS"}
        assert enc.tag_matrix.tags_at(2, 0) == {"AE-OE"}

    def test_implicit_aspect_row_zero(self):
        vocab = CategoryVocab(["Logistics#Speed"])
        sample = make_sample(
            "it was very speedy",
            [Quadruple("Logistics#Speed", None, Span(2, 3), Sentiment.POS)],
        )
        enc = encode_sample(sample, STANDARD, vocab)
        assert enc.tag_matrix.tags_at(0, 3) == {"AB-OB"}
        assert enc.tag_matrix.tags_at(0, 4) == {"AB-OE-POS"}
        # category anchored on the opinion span
        assert enc.category_grid.values[3:5, 0].tolist() == [1.0, 1.0]

    def test_conflicting_row_zero_encoding_raises(self):
        vocab = CategoryVocab(["A#B"])
        sample = make_sample(
            "one two three four",
            [
                Quadruple("A#B", None, Span(0, 2), Sentiment.POS),
                Quadruple("A#B", None, Span(1, 2), Sentiment.POS),
            ],
        )
        with pytest.raises(ConflictingEncoding):
            encode_sample(sample, STANDARD, vocab)

    def test_same_anchor_two_categories_conflicts(self):
        # all_matching assembly cannot split two categories over one anchor
        vocab = CategoryVocab(["A#1", "A#2"])
        sample = make_sample(
            "thing is good bad",
            [
                Quadruple("A#1", Span(0, 0), Span(2, 2), Sentiment.POS),
                Quadruple("A#2", Span(0, 0), Span(3, 3), Sentiment.NEG),
            ],
        )
        with pytest.raises(ConflictingEncoding):
            encode_sample(sample, STANDARD, vocab)


class TestDecode:
    def test_touch_screen_roundtrip(self):
        vocab = CategoryVocab(["Screen#Sensitivity"])
        sample = make_sample(
            "touch screen is not sensitive",
            [Quadruple("Screen#Sensitivity", Span(0, 1), Span(3, 4), Sentiment.NEG)],
        )
        enc = encode_sample(sample, STANDARD, vocab)
        triplets = decode_triplets(enc.tag_matrix, STANDARD)
        assert triplets == [AosTriplet(Span(0, 1), Span(3, 4), Sentiment.NEG)]

    def test_empty_matrix(self):
        assert decode_triplets(TagMatrix(5, STANDARD), STANDARD) == []
        assert decode_triplets_oracle(TagMatrix(5, STANDARD), STANDARD) == []

    def test_implicit_patterns_row_major_order(self):
        # one implicit-aspect triplet in row 0, one implicit-opinion in column 0
        matrix = TagMatrix(5, STANDARD)
        matrix.add(0, 4, "AB-OB")
        matrix.add(0, 5, "AB-OE-POS")
        matrix.add(1, 0, "AB-OE-POS")
        matrix.add(2, 0, "AE-OE")
        triplets = decode_triplets(matrix, STANDARD)
        assert triplets == [
            AosTriplet(None, Span(3, 4), Sentiment.POS),
            AosTriplet(Span(0, 1), None, Sentiment.POS),
        ]
        assert decode_triplets_oracle(matrix, STANDARD) == triplets

    def test_nearest_begin_wins(self):
        matrix = TagMatrix(6, STANDARD)
        matrix.add(1, 2, "AB-OB")
        matrix.add(1, 4, "AB-OB")
        matrix.add(1, 5, "AB-OE-POS")
        matrix.add(1, 5, "AE-OE")
        [triplet] = decode_triplets(matrix, STANDARD)
        assert triplet.opinion == Span(3, 4)  # column 4, not 2

    def test_nearest_end_wins(self):
        matrix = TagMatrix(6, STANDARD)
        matrix.add(1, 1, "AB-OB")
        matrix.add(1, 1, "AB-OE-NEG")
        matrix.add(3, 1, "AE-OE")
        matrix.add(5, 1, "AE-OE")
        [triplet] = decode_triplets(matrix, STANDARD)
        assert triplet.aspect == Span(0, 2)  # row 3, not 5

    def test_dangling_links_counted_not_raised(self):
        matrix = TagMatrix(4, STANDARD)
        matrix.add(2, 3, "AB-OE-POS")  # no anchors at all
        matrix.add(1, 1, "AB-OB")  # marker used by nothing
        diagnostics = Diagnostics()
        assert decode_triplets(matrix, STANDARD, diagnostics) == []
        assert diagnostics.dangling_links == 1
        assert diagnostics.dangling_begin_markers == 1

    def test_oracle_size_cap(self):
        with pytest.raises(InstanceTooLarge):
            decode_triplets_oracle(TagMatrix(13, STANDARD), STANDARD)

    def test_scan_equals_oracle_on_noise(self):
        rng = np.random.default_rng(42)
        for _ in range(150):
            n = int(rng.integers(1, 9))
            matrix = random_tag_matrix(rng, STANDARD, n)
            assert decode_triplets(matrix, STANDARD) == decode_triplets_oracle(matrix, STANDARD)

    def test_soundness_and_completeness_on_noise(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            n = int(rng.integers(1, 9))
            matrix = random_tag_matrix(rng, STANDARD, n)
            triplets = decode_triplets(matrix, STANDARD)
            link_cells = []
            for triplet in triplets:
                # every tag the triplet implies is present in the matrix
                a, o = triplet.aspect, triplet.opinion
                link = f"AB-OE-{triplet.sentiment.value}"
                if a is not None and o is not None:
                    assert "AB-OB" in matrix.tags_at(a.start + 1, o.start + 1)
                    assert "AE-OE" in matrix.tags_at(a.end + 1, o.end + 1)
                    link_cells.append((a.start + 1, o.end + 1, link))
                elif a is None:
                    assert "AB-OB" in matrix.tags_at(0, o.start + 1)
                    link_cells.append((0, o.end + 1, link))
                else:
                    assert "AE-OE" in matrix.tags_at(a.end + 1, 0)
                    link_cells.append((a.start + 1, 0, link))
                assert link in matrix.tags_at(link_cells[-1][0], link_cells[-1][1])
            # each resolvable link yields exactly one triplet
            assert len(set(link_cells)) == len(link_cells)
            # completeness: every link tag whose anchors exist is in the output
            expected = 0
            for (row, col), tags in matrix.cells.items():
                for tag in tags:
                    if tag in ("AB-OB", "AE-OE"):
                        continue
                    if row == 0 and col == 0:
                        continue
                    has_begin = any(
                        "AB-OB" in matrix.tags_at(row, c) for c in range(1, col + 1)
                    )
                    has_end = any(
                        "AE-OE" in matrix.tags_at(r, col) for r in range(row, matrix.size)
                    )
                    if row == 0:
                        resolvable = has_begin
                    elif col == 0:
                        resolvable = has_end
                    else:
                        resolvable = has_begin and has_end
                    expected += int(resolvable)
            assert len(triplets) == expected


class TestCategoryGrid:
    def test_all_below_threshold(self):
        grid = CategoryGrid(np.full((4, 2), 0.4), ("A#1", "B#2"))
        assert decode_categories(grid) == []

    def test_exactly_at_threshold_is_negative(self):
        grid = CategoryGrid(np.full((3, 1), 0.5), ("A#1",))
        assert decode_categories(grid, 0.5) == []

    def test_single_run(self):
        grid = CategoryGrid.empty(3, ("Logistics#Speed",))
        grid.mark_span("Logistics#Speed", Span(0, 1))
        assert decode_categories(grid) == [("Logistics#Speed", Span(0, 1))]

    def test_two_runs_with_gap(self):
        grid = CategoryGrid.empty(5, ("A#1",))
        grid.mark_span("A#1", Span(0, 1))
        grid.mark_span("A#1", Span(3, 4))
        assert decode_categories(grid) == [("A#1", Span(0, 1)), ("A#1", Span(3, 4))]

    def test_sentinel_row_yields_null_span(self):
        grid = CategoryGrid.empty(2, ("A#1",))
        grid.values[0, 0] = 1.0
        assert decode_categories(grid) == [("A#1", None)]


class TestAssemble:
    def test_fig_style_merge(self):
        triplets = [AosTriplet(Span(0, 1), None, Sentiment.POS)]
        quads = assemble_quads(triplets, [("Logistics#Speed", Span(0, 1))])
        assert quads == [Quadruple("Logistics#Speed", Span(0, 1), None, Sentiment.POS)]

    def test_unmatched_triplet_dropped_and_counted(self):
        diagnostics = Diagnostics()
        triplets = [AosTriplet(Span(0, 1), Span(3, 3), Sentiment.NEG)]
        assert assemble_quads(triplets, [("A#1", Span(2, 2))], diagnostics=diagnostics) == []
        assert diagnostics.unmatched_triplets == 1

    def test_all_matching_emits_both_categories(self):
        triplets = [AosTriplet(Span(0, 0), Span(2, 2), Sentiment.POS)]
        spans = [("A#1", Span(0, 0)), ("B#2", Span(0, 0))]
        quads = assemble_quads(triplets, spans, ALL_MATCHING)
        assert {q.category for q in quads} == {"A#1", "B#2"}

    def test_best_one_uses_mean_probability(self):
        grid = CategoryGrid(np.array([[0.0, 0.0], [0.6, 0.9], [0.7, 0.8]]), ("A#1", "B#2"))
        triplets = [AosTriplet(Span(0, 1), Span(1, 1), Sentiment.POS)]
        spans = [("A#1", Span(0, 1)), ("B#2", Span(0, 1))]
        quads = assemble_quads(triplets, spans, BEST_ONE, grid=grid)
        assert [q.category for q in quads] == ["B#2"]  # mean 0.85 beats 0.65


class TestRoundTrip:
    def test_random_samples_standard(self):
        corpus = random_corpus(seed=5, n_samples=250, n_categories=6)
        for sample in corpus.samples:
            enc = encode_sample(sample, STANDARD, corpus.vocab)
            decoded = decode_encoding(enc, STANDARD, corpus.vocab)
            assert sorted(decoded, key=repr) == sorted(sample.gold, key=repr)

    @pytest.mark.parametrize("variant", ["variant1", "variant2"])
    def test_random_samples_variants(self, variant):
        corpus = random_corpus(
            seed=6, n_samples=150, n_categories=4,
            single_sentiment_per_anchor=(variant == "variant1"),
        )
        schema = TagSchema.for_variant(variant, corpus.vocab)
        for sample in corpus.samples:
            enc = encode_sample(sample, schema, corpus.vocab)
            decoded = decode_encoding(enc, schema, corpus.vocab)
            assert sorted(decoded, key=repr) == sorted(sample.gold, key=repr)

    def test_variant2_needs_no_category_grid(self):
        corpus = random_corpus(seed=9, n_samples=40, n_categories=3)
        schema = TagSchema.for_variant("variant2", corpus.vocab)
        for sample in corpus.samples:
            enc = encode_sample(sample, schema, corpus.vocab)
            assert not enc.category_grid.values.any()

    def test_variant1_grids_filled(self):
        corpus = random_corpus(seed=10, n_samples=20, n_categories=3,
                               single_sentiment_per_anchor=True)
        schema = TagSchema.for_variant("variant1", corpus.vocab)
        enc = encode_sample(corpus.samples[0], schema, corpus.vocab)
        assert enc.sentiment_grid is not None
        assert enc.sentiment_grid.values.any()
        assert all(not schema.is_link_tag(t) or t == "AB-OE"
                   for tags in enc.tag_matrix.cells.values() for t in tags)


class TestFromProbabilities:
    def test_strictly_greater_thresholding(self):
        schema = TagSchema.standard()
        probs = np.full((3, 3, 5), 0.5)
        assert TagMatrix.from_probabilities(probs, schema).cells == {}

    def test_origin_cell_cleared(self):
        schema = TagSchema.standard()
        probs = np.zeros((3, 3, 5))
        probs[0, 0, :] = 0.99
        probs[1, 2, 0] = 0.99
        matrix = TagMatrix.from_probabilities(probs, schema)
        assert matrix.tags_at(0, 0) == set()
        assert matrix.tags_at(1, 2) == {"AB-OB"}
