import json

import pytest
from hypothesis import given, settings, strategies as st

from asqp.core import Quadruple, Sentiment, Span
from asqp.data import (
    Corpus,
    Sample,
    compute_stats,
    load_jsonl,
    load_legacy,
    sample_to_legacy_line,
    sample_to_record,
    save_jsonl,
    split,
)
from asqp.errors import (
    BothImplicit,
    DuplicateQuad,
    MisalignedSpan,
    ParseError,
    UnknownSentimentCode,
)
from asqp.synth import random_corpus


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadJsonl:
    def test_smallest_valid_file(self, tmp_path):
        path = write(
            tmp_path, "one.jsonl",
            '{"text": "battery is great", "quads": [{"category": "Battery#General", '
            '"aspect": [0, 7], "opinion": [11, 16], "sentiment": "POS"}]}\n',
        )
        corpus = load_jsonl(path)
        assert len(corpus) == 1
        assert corpus.samples[0].gold == (
            Quadruple("Battery#General", Span(0, 0), Span(2, 2), Sentiment.POS),
        )
        assert corpus.vocab.names == ("Battery#General",)

    def test_implicit_aspect_quad(self, tmp_path):
        path = write(
            tmp_path, "ia.jsonl",
            '{"text": "very speedy indeed", "quads": [{"category": "Logistics#Speed", '
            '"aspect": null, "opinion": [0, 11], "sentiment": "POS"}]}\n',
        )
        [sample] = load_jsonl(path).samples
        assert sample.gold[0].implicitness == "IA&EO"

    def test_both_null_rejected(self, tmp_path):
        path = write(
            tmp_path, "bad.jsonl",
            '{"text": "some text", "quads": [{"category": "A#B", "aspect": null, '
            '"opinion": null, "sentiment": "POS"}]}\n',
        )
        with pytest.raises(BothImplicit):
            load_jsonl(path)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = write(tmp_path, "broken.jsonl", '{"text": "ok", "quads": []}\nnot json\n')
        with pytest.raises(ParseError) as exc_info:
            load_jsonl(path)
        assert exc_info.value.line_no == 2

    def test_misaligned_strict_vs_lenient(self, tmp_path):
        line = (
            '{"text": "touch screen", "quads": [{"category": "A#B", "aspect": [0, 3], '
            '"opinion": [6, 12], "sentiment": "NEG"}]}\n'
        )
        path = write(tmp_path, "mis.jsonl", line)
        with pytest.raises(MisalignedSpan):
            load_jsonl(path)
        with pytest.warns(UserWarning):
            corpus = load_jsonl(path, alignment_mode="lenient")
        assert corpus.samples[0].gold[0].aspect == Span(0, 0)

    def test_duplicate_quads_rejected(self, tmp_path):
        quad = '{"category": "A#B", "aspect": [0, 5], "opinion": [9, 13], "sentiment": "NEU"}'
        path = write(tmp_path, "dup.jsonl", f'{{"text": "thing is okay", "quads": [{quad}, {quad}]}}\n')
        with pytest.raises(DuplicateQuad):
            load_jsonl(path)

    def test_header_declares_unused_categories(self, tmp_path):
        path = write(
            tmp_path, "header.jsonl",
            '{"categories": ["Unused#One", "Battery#General"]}\n'
            '{"text": "battery is great", "quads": [{"category": "Battery#General", '
            '"aspect": [0, 7], "opinion": [11, 16], "sentiment": "POS"}]}\n',
        )
        corpus = load_jsonl(path)
        assert corpus.vocab.names == ("Unused#One", "Battery#General")

    def test_missing_quads_key_means_unlabeled(self, tmp_path):
        path = write(tmp_path, "free.jsonl", '{"text": "no labels here"}\n')
        assert load_jsonl(path).samples[0].gold == ()

    def test_chinese_per_character_mode(self, tmp_path):
        path = write(
            tmp_path, "zh.jsonl",
            '{"text": "手机很好用", "quads": [{"category": "整体#通用", "aspect": [0, 2], '
            '"opinion": [2, 5], "sentiment": "POS"}]}\n',
        )
        corpus = load_jsonl(path, language_mode="per_character")
        [sample] = corpus.samples
        assert sample.sentence.tokens == ("手", "机", "很", "好", "用")
        assert sample.gold[0].aspect == Span(0, 1)
        assert sample.gold[0].opinion == Span(2, 4)


class TestLoadLegacy:
    def test_positive_quad(self, tmp_path):
        path = write(
            tmp_path, "one.txt",
            "X is great####[['0,1','Overall#General','2','5,10']]\n",
        )
        corpus = load_legacy(path)
        assert corpus.samples[0].gold == (
            Quadruple("Overall#General", Span(0, 0), Span(2, 2), Sentiment.POS),
        )

    def test_code_mapping(self, tmp_path):
        path = write(
            tmp_path, "codes.txt",
            "it is bad####[['-1,-1','A#B','0','6,9']]\n"
            "it is fine####[['-1,-1','A#B','1','6,10']]\n",
        )
        corpus = load_legacy(path)
        assert corpus.samples[0].gold[0].sentiment is Sentiment.NEG
        assert corpus.samples[1].gold[0].sentiment is Sentiment.NEU

    def test_unknown_sentiment_code(self, tmp_path):
        path = write(tmp_path, "bad.txt", "it is bad####[['-1,-1','A#B','3','6,9']]\n")
        with pytest.raises(UnknownSentimentCode):
            load_legacy(path)

    def test_empty_quad_list(self, tmp_path):
        path = write(tmp_path, "empty.txt", "nothing labeled here####[]\n")
        corpus = load_legacy(path)
        assert corpus.samples[0].gold == ()

    def test_missing_separator(self, tmp_path):
        path = write(tmp_path, "nosep.txt", "just a sentence\n")
        with pytest.raises(ParseError):
            load_legacy(path)


class TestFormatEquivalence:
    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000))
    def test_loaders_agree_on_equivalent_content(self, seed, tmp_path_factory):
        tmp_path = tmp_path_factory.mktemp("fmt")
        corpus = random_corpus(seed, n_samples=6, n_categories=4, n_tokens=(4, 9), max_quads=3)
        jsonl_path = tmp_path / f"c{seed}.jsonl"
        save_jsonl(corpus.samples, jsonl_path)
        legacy_path = tmp_path / f"c{seed}.txt"
        legacy_path.write_text(
            "".join(sample_to_legacy_line(s) + "\n" for s in corpus.samples), encoding="utf-8"
        )
        from_jsonl = load_jsonl(jsonl_path)
        from_legacy = load_legacy(legacy_path)
        assert from_jsonl.samples == from_legacy.samples
        assert from_jsonl.vocab == from_legacy.vocab
        assert from_jsonl.samples == corpus.samples


class TestSplit:
    def test_standard_ratio_sizes(self):
        corpus = random_corpus(0, n_samples=100, n_categories=3, n_tokens=(4, 6), max_quads=1)
        train, dev, test = split(corpus, (0.7, 0.15, 0.15), seed=0)
        assert (len(train), len(dev), len(test)) == (70, 15, 15)

    def test_remainder_goes_to_train(self):
        corpus = random_corpus(1, n_samples=10, n_categories=3, n_tokens=(4, 6), max_quads=1)
        train, dev, test = split(corpus, (0.7, 0.15, 0.15), seed=3)
        assert (len(train), len(dev), len(test)) == (8, 1, 1)

    def test_same_seed_same_partition(self):
        corpus = random_corpus(2, n_samples=30, n_categories=3, n_tokens=(4, 6), max_quads=2)
        first = split(corpus, (0.7, 0.15, 0.15), seed=11)
        second = split(corpus, (0.7, 0.15, 0.15), seed=11)
        for a, b in zip(first, second):
            assert a.samples == b.samples

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(0, 1000),
        n=st.integers(3, 60),
        ratios=st.sampled_from([(0.7, 0.15, 0.15), (0.5, 0.25, 0.25), (0.8, 0.1, 0.1)]),
    )
    def test_partition_property(self, seed, n, ratios):
        corpus = random_corpus(seed, n_samples=n, n_categories=3, n_tokens=(4, 6), max_quads=1)
        parts = split(corpus, ratios, seed)
        texts = [s.sentence.raw_text for part in parts for s in part.samples]
        assert len(texts) == n
        assert sorted(texts) == sorted(s.sentence.raw_text for s in corpus.samples)

    def test_bad_ratios(self):
        corpus = random_corpus(3, n_samples=4, n_categories=2, n_tokens=(4, 6), max_quads=1)
        with pytest.raises(ValueError):
            split(corpus, (0.5, 0.25, 0.3), seed=0)
        with pytest.raises(ValueError):
            split(corpus, (1.0, 0.0, 0.0), seed=0)


class TestStats:
    def test_empty_corpus(self):
        from asqp.core import CategoryVocab

        report = compute_stats(Corpus((), CategoryVocab([])))
        assert report.n_samples == 0
        assert report.n_quads == 0
        assert report.density == {}
        assert report.words_per_sample == 0.0

    def test_mini_corpus_matches_hand_tally(self, mini_corpus_path, mini_tally_path):
        report = compute_stats(load_jsonl(mini_corpus_path))
        tally = json.loads(mini_tally_path.read_text())
        assert report.n_samples == tally["n_samples"]
        assert report.words_per_sample == pytest.approx(tally["words_per_sample"], abs=1e-9)
        assert report.n_categories == tally["n_categories"]
        assert report.n_quads == tally["n_quads"]
        assert report.quads_per_sample == pytest.approx(tally["quads_per_sample"], abs=1e-9)
        for cls in ("EA&EO", "EA&IO", "IA&EO", "IA&IO"):
            assert report.implicitness[cls] == tally[cls]
        for sentiment in ("POS", "NEU", "NEG"):
            assert report.sentiments[sentiment] == tally[sentiment]
        assert report.words_per_aspect == pytest.approx(tally["words_per_aspect"], abs=1e-9)
        assert report.words_per_opinion == pytest.approx(tally["words_per_opinion"], abs=1e-9)
        assert {str(k): v for k, v in report.density.items()} == pytest.approx(tally["density"])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 5000), n=st.integers(1, 25))
    def test_implicitness_counts_sum_to_quads(self, seed, n):
        corpus = random_corpus(seed, n_samples=n, n_categories=4, n_tokens=(4, 10), max_quads=4)
        report = compute_stats(corpus)
        assert sum(report.implicitness.values()) == report.n_quads
        assert sum(report.density.values()) == pytest.approx(1.0, abs=1e-9)

    def test_roundtrip_through_record(self, mini_corpus_path):
        corpus = load_jsonl(mini_corpus_path)
        for sample in corpus.samples:
            record = sample_to_record(sample)
            assert record["text"] == sample.sentence.raw_text


class TestSampleInvariants:
    def test_span_outside_sentence_rejected(self):
        from asqp.core import tokenize

        with pytest.raises(ValueError):
            Sample(tokenize("two words"), (Quadruple("A#B", Span(0, 5), None, Sentiment.POS),))
