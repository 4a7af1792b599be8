"""Corpus ingestion, deterministic splitting, and dataset statistics.

Two on-disk formats are supported, both UTF-8 and line-oriented:

JSONL (canonical), one record per line:
    {"text": "...", "quads": [{"category": "...", "aspect": [cs, ce] | null,
                               "opinion": [cs, ce] | null, "sentiment": "POS"}]}
An optional first line {"categories": [...]} declares the vocabulary up
front; categories found in samples are appended in order of appearance.

Legacy, one `text####[[...]]` line per sample with 4-item records
[aspect "s,e", category, sentiment code, opinion "s,e"], where the code maps
0 -> NEG, 1 -> NEU, 2 -> POS and "-1,-1" marks an implicit element.

Character offsets live in files; token spans live in memory. Conversion is
strict by default so misaligned annotations surface at load time.
"""

from __future__ import annotations

import ast
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    SPACE_PUNCT,
    CategoryVocab,
    Quadruple,
    Sentence,
    Sentiment,
    Span,
    char_span_to_token_span,
    tokenize,
)
from .errors import BothImplicit, DuplicateQuad, ParseError, UnknownSentimentCode

LEGACY_SENTIMENT_CODES = {"0": Sentiment.NEG, "1": Sentiment.NEU, "2": Sentiment.POS}
IMPLICITNESS_CLASSES = ("EA&EO", "EA&IO", "IA&EO", "IA&IO")


@dataclass(frozen=True)
class Sample:
    sentence: Sentence
    gold: tuple[Quadruple, ...]

    def __post_init__(self):
        n = len(self.sentence)
        seen = set()
        for quad in self.gold:
            for span in (quad.aspect, quad.opinion):
                if span is not None and span.end >= n:
                    raise ValueError(f"span {span} outside sentence of {n} tokens")
            if quad in seen:
                raise ValueError(f"duplicate gold quadruple {quad}")
            seen.add(quad)


@dataclass(frozen=True)
class Corpus:
    samples: tuple[Sample, ...]
    vocab: CategoryVocab
    language_mode: str = SPACE_PUNCT

    def __len__(self) -> int:
        return len(self.samples)

    def n_quads(self) -> int:
        return sum(len(s.gold) for s in self.samples)


def _build_vocab(samples: list[Sample], declared: list[str] | None = None) -> CategoryVocab:
    names: list[str] = list(declared or [])
    seen = set(names)
    for sample in samples:
        for quad in sample.gold:
            if quad.category not in seen:
                seen.add(quad.category)
                names.append(quad.category)
    return CategoryVocab(names)


def _parse_char_span(value, sentence: Sentence, strict: bool, line_no: int) -> Span | None:
    if value is None:
        return None
    try:
        cs, ce = int(value[0]), int(value[1])
    except (TypeError, ValueError, IndexError):
        raise ParseError(f"bad char span {value!r}", line_no) from None
    if (cs, ce) == (-1, -1):
        return None
    return char_span_to_token_span(sentence, cs, ce, strict=strict)


def _make_sample(
    text: str,
    raw_quads: list[tuple[object, str, str, object]],
    language_mode: str,
    strict: bool,
    line_no: int,
) -> Sample:
    """raw_quads: (aspect chars, category, sentiment label, opinion chars)."""
    sentence = tokenize(text, language_mode)
    quads: list[Quadruple] = []
    for aspect_chars, category, sentiment, opinion_chars in raw_quads:
        aspect = _parse_char_span(aspect_chars, sentence, strict, line_no)
        opinion = _parse_char_span(opinion_chars, sentence, strict, line_no)
        if aspect is None and opinion is None:
            raise BothImplicit("quadruple with neither aspect nor opinion", line_no)
        quad = Quadruple(category, aspect, opinion, Sentiment(sentiment))
        if quad in quads:
            raise DuplicateQuad(f"duplicate gold quadruple {quad}", line_no)
        quads.append(quad)
    return Sample(sentence, tuple(quads))


def load_jsonl(
    path: str | Path, language_mode: str = SPACE_PUNCT, alignment_mode: str = "strict"
) -> Corpus:
    strict = alignment_mode == "strict"
    samples: list[Sample] = []
    declared: list[str] | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON ({exc.msg})", line_no) from None
            if line_no == 1 and "text" not in record and "categories" in record:
                declared = list(record["categories"])
                continue
            if "text" not in record:
                raise ParseError("record has no 'text' field", line_no)
            raw_quads = []
            for quad in record.get("quads", []):
                try:
                    raw_quads.append(
                        (quad["aspect"], quad["category"], quad["sentiment"], quad["opinion"])
                    )
                except (KeyError, TypeError):
                    raise ParseError(f"malformed quad record {quad!r}", line_no) from None
            try:
                samples.append(
                    _make_sample(record["text"], raw_quads, language_mode, strict, line_no)
                )
            except ValueError as exc:
                raise ParseError(str(exc), line_no) from None
    return Corpus(tuple(samples), _build_vocab(samples, declared), language_mode)


def load_legacy(path: str | Path, language_mode: str = SPACE_PUNCT,
                alignment_mode: str = "strict") -> Corpus:
    strict = alignment_mode == "strict"
    samples: list[Sample] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            text, sep, quad_part = line.rpartition("####")
            if not sep:
                raise ParseError("missing '####' separator", line_no)
            try:
                records = ast.literal_eval(quad_part.strip())
            except (ValueError, SyntaxError):
                raise ParseError(f"cannot parse quad list {quad_part!r}", line_no) from None
            if not isinstance(records, list):
                raise ParseError("quad list is not a list", line_no)
            raw_quads = []
            for record in records:
                if not (isinstance(record, (list, tuple)) and len(record) == 4):
                    raise ParseError(f"quad record {record!r} is not a 4-item list", line_no)
                aspect_str, category, code, opinion_str = record
                if code not in LEGACY_SENTIMENT_CODES:
                    raise UnknownSentimentCode(f"sentiment code {code!r}", line_no)
                raw_quads.append(
                    (
                        _legacy_chars(aspect_str, line_no),
                        category,
                        LEGACY_SENTIMENT_CODES[code].value,
                        _legacy_chars(opinion_str, line_no),
                    )
                )
            try:
                samples.append(_make_sample(text, raw_quads, language_mode, strict, line_no))
            except ValueError as exc:
                raise ParseError(str(exc), line_no) from None
    return Corpus(tuple(samples), _build_vocab(samples), language_mode)


def _legacy_chars(value: str, line_no: int) -> tuple[int, int] | None:
    try:
        cs, ce = (int(part) for part in value.split(","))
    except (ValueError, AttributeError):
        raise ParseError(f"bad span string {value!r}", line_no) from None
    if (cs, ce) == (-1, -1):
        return None
    return (cs, ce)


def sample_to_record(sample: Sample) -> dict:
    """JSONL record for a sample, with token spans mapped back to characters."""

    def span_field(span: Span | None):
        return None if span is None else list(sample.sentence.span_char_range(span))

    return {
        "text": sample.sentence.raw_text,
        "quads": [
            {
                "category": q.category,
                "aspect": span_field(q.aspect),
                "opinion": span_field(q.opinion),
                "sentiment": q.sentiment.value,
            }
            for q in sample.gold
        ],
    }


def sample_to_legacy_line(sample: Sample) -> str:
    def span_field(span: Span | None) -> str:
        if span is None:
            return "-1,-1"
        cs, ce = sample.sentence.span_char_range(span)
        return f"{cs},{ce}"

    code_of = {v: k for k, v in LEGACY_SENTIMENT_CODES.items()}
    records = [
        [span_field(q.aspect), q.category, code_of[q.sentiment], span_field(q.opinion)]
        for q in sample.gold
    ]
    return f"{sample.sentence.raw_text}####{records!r}"


def save_jsonl(samples, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample in samples:
            fh.write(json.dumps(sample_to_record(sample), ensure_ascii=False) + "\n")


def split(
    corpus: Corpus, ratios: tuple[float, float, float], seed: int
) -> tuple[Corpus, Corpus, Corpus]:
    """Deterministic shuffle + floor partition; the remainder goes to train."""
    if any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(corpus)
    n_dev = math.floor(n * ratios[1])
    n_test = math.floor(n * ratios[2])
    n_train = n - n_dev - n_test
    order = np.random.default_rng(seed).permutation(n)
    parts = (order[:n_train], order[n_train:n_train + n_dev], order[n_train + n_dev:])
    return tuple(
        Corpus(tuple(corpus.samples[i] for i in part), corpus.vocab, corpus.language_mode)
        for part in parts
    )  # type: ignore[return-value]


@dataclass
class StatsReport:
    """Corpus summary: sample/quad counts, implicitness and sentiment splits,
    span lengths, and the quads-per-sample density histogram."""

    n_samples: int = 0
    words_per_sample: float = 0.0
    n_categories: int = 0
    n_quads: int = 0
    quads_per_sample: float = 0.0
    implicitness: dict[str, int] = field(
        default_factory=lambda: {c: 0 for c in IMPLICITNESS_CLASSES}
    )
    sentiments: dict[str, int] = field(
        default_factory=lambda: {"POS": 0, "NEU": 0, "NEG": 0}
    )
    words_per_aspect: float = 0.0
    words_per_opinion: float = 0.0
    density: dict[int, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        flat = {
            "n_samples": self.n_samples,
            "words_per_sample": self.words_per_sample,
            "n_categories": self.n_categories,
            "n_quads": self.n_quads,
            "quads_per_sample": self.quads_per_sample,
            "words_per_aspect": self.words_per_aspect,
            "words_per_opinion": self.words_per_opinion,
        }
        for cls in IMPLICITNESS_CLASSES:
            flat[cls] = self.implicitness[cls]
        for sent in ("POS", "NEU", "NEG"):
            flat[sent] = self.sentiments[sent]
        flat["density"] = [
            {"quads": k, "ratio": self.density[k]} for k in sorted(self.density)
        ]
        return flat


def compute_stats(corpus: Corpus) -> StatsReport:
    report = StatsReport(n_samples=len(corpus), n_categories=len(corpus.vocab))
    if not corpus.samples:
        return report
    aspect_lengths: list[int] = []
    opinion_lengths: list[int] = []
    density_counts: dict[int, int] = {}
    token_total = 0
    for sample in corpus.samples:
        token_total += len(sample.sentence)
        density_counts[len(sample.gold)] = density_counts.get(len(sample.gold), 0) + 1
        for quad in sample.gold:
            report.implicitness[quad.implicitness] += 1
            report.sentiments[quad.sentiment.value] += 1
            if quad.aspect is not None:
                aspect_lengths.append(len(quad.aspect))
            if quad.opinion is not None:
                opinion_lengths.append(len(quad.opinion))
    report.n_quads = sum(report.implicitness.values())
    report.words_per_sample = token_total / report.n_samples
    report.quads_per_sample = report.n_quads / report.n_samples
    if aspect_lengths:
        report.words_per_aspect = sum(aspect_lengths) / len(aspect_lengths)
    if opinion_lengths:
        report.words_per_opinion = sum(opinion_lengths) / len(opinion_lengths)
    report.density = {k: v / report.n_samples for k, v in sorted(density_counts.items())}
    return report
