"""Shared domain types: sentences, spans, sentiments, quadruples, tag schemas.

Token spans are inclusive on both ends and 0-based over the sentence's own
tokens. The [NULL] sentinel that prefixes every grid lives at index 0 of the
grid axes, not in the token space; the shift happens inside the codec.

All types here are immutable after construction and safe to share.
"""

from __future__ import annotations

import enum
import unicodedata
import warnings
from dataclasses import dataclass, field

from .errors import EmptyInput, MisalignedSpan, MisalignmentWarning, UnsupportedSchema

NULL_TOKEN = "[NULL]"

SPACE_PUNCT = "space_punct"
PER_CHARACTER = "per_character"


class Sentiment(enum.Enum):
    POS = "POS"
    NEU = "NEU"
    NEG = "NEG"

    def __repr__(self) -> str:  # Sentiment.POS reprs as POS in test diffs
        return self.value


SENTIMENTS = (Sentiment.POS, Sentiment.NEU, Sentiment.NEG)


@dataclass(frozen=True)
class Span:
    """Inclusive token span: start..end, both 0-based over sentence tokens."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start <= self.end):
            raise ValueError(f"bad span ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def tokens(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class Sentence:
    """Raw text plus its tokenization with per-token character offsets.

    char_offsets[i] is the half-open [start, end) character range of
    tokens[i] in raw_text, so raw_text[start:end] == tokens[i].
    """

    raw_text: str
    tokens: tuple[str, ...]
    char_offsets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.char_offsets):
            raise ValueError("tokens and char_offsets length mismatch")
        prev_end = -1
        for tok, (start, end) in zip(self.tokens, self.char_offsets):
            if not tok:
                raise ValueError("empty token")
            if start < 0 or end > len(self.raw_text) or start >= end:
                raise ValueError(f"bad char offset ({start}, {end})")
            if start < prev_end:
                raise ValueError("char offsets overlap or go backwards")
            if self.raw_text[start:end] != tok:
                raise ValueError(f"token {tok!r} does not match raw_text slice")
            prev_end = end

    def __len__(self) -> int:
        return len(self.tokens)

    def span_text(self, span: Span) -> str:
        """Covered substring of raw_text, including any gaps between tokens."""
        return self.raw_text[self.char_offsets[span.start][0]:self.char_offsets[span.end][1]]

    def span_char_range(self, span: Span) -> tuple[int, int]:
        return self.char_offsets[span.start][0], self.char_offsets[span.end][1]


@dataclass(frozen=True)
class Quadruple:
    """One (category, aspect, opinion, sentiment) prediction target.

    aspect/opinion of None mean the element is implicit. Both implicit is
    rejected: that combination is not representable in the tag grid.
    """

    category: str
    aspect: Span | None
    opinion: Span | None
    sentiment: Sentiment

    def __post_init__(self):
        if self.aspect is None and self.opinion is None:
            raise ValueError("aspect and opinion cannot both be implicit")

    @property
    def implicitness(self) -> str:
        a = "EA" if self.aspect is not None else "IA"
        o = "EO" if self.opinion is not None else "IO"
        return f"{a}&{o}"

    def anchor(self) -> Span:
        """Span the category attaches to: the aspect when explicit, else the opinion."""
        return self.aspect if self.aspect is not None else self.opinion  # type: ignore[return-value]


class CategoryVocab:
    """Ordered category name list with a dense name -> id index."""

    def __init__(self, names: list[str] | tuple[str, ...]):
        if len(set(names)) != len(names):
            raise ValueError("duplicate category names")
        self.names: tuple[str, ...] = tuple(names)
        self.index: dict[str, int] = {name: i for i, name in enumerate(self.names)}

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, CategoryVocab) and self.names == other.names

    def __repr__(self) -> str:
        return f"CategoryVocab({list(self.names)!r})"

    def id_of(self, name: str) -> int:
        return self.index[name]


STANDARD = "standard"
VARIANT1 = "variant1"
VARIANT2 = "variant2"

TAG_BEGIN = "AB-OB"
TAG_END = "AE-OE"
TAG_LINK_PAIR = "AB-OE"


@dataclass(frozen=True)
class TagSchema:
    """Tag inventory for one grid-tagging variant.

    standard: {AB-OB, AE-OE, AB-OE-POS, AB-OE-NEU, AB-OE-NEG}
    variant1: {AB-OB, AE-OE, AB-OE} (sentiment handled by a separate head)
    variant2: {AB-OB, AE-OE} plus AB-OE-<sentiment>-<category> for every
              sentiment/category combination, i.e. 2 + |S|*|C| tags total.

    The absent tag "-" is implicit: a cell simply carries no tags.
    """

    variant: str
    tags: tuple[str, ...]
    categories: tuple[str, ...] = field(default=())

    @staticmethod
    def standard() -> "TagSchema":
        link = tuple(f"{TAG_LINK_PAIR}-{s.value}" for s in SENTIMENTS)
        return TagSchema(STANDARD, (TAG_BEGIN, TAG_END) + link)

    @staticmethod
    def variant1() -> "TagSchema":
        return TagSchema(VARIANT1, (TAG_BEGIN, TAG_END, TAG_LINK_PAIR))

    @staticmethod
    def variant2(vocab: CategoryVocab) -> "TagSchema":
        link = tuple(
            f"{TAG_LINK_PAIR}-{s.value}-{name}" for s in SENTIMENTS for name in vocab.names
        )
        return TagSchema(VARIANT2, (TAG_BEGIN, TAG_END) + link, vocab.names)

    @staticmethod
    def for_variant(variant: str, vocab: CategoryVocab | None = None) -> "TagSchema":
        if variant == STANDARD:
            return TagSchema.standard()
        if variant == VARIANT1:
            return TagSchema.variant1()
        if variant == VARIANT2:
            if vocab is None:
                raise UnsupportedSchema("variant2 needs the category vocabulary")
            return TagSchema.variant2(vocab)
        raise UnsupportedSchema(f"unknown schema variant {variant!r}")

    def __len__(self) -> int:
        return len(self.tags)

    def tag_id(self, tag: str) -> int:
        return self.tags.index(tag)

    def link_tag(self, sentiment: Sentiment | None, category: str | None = None) -> str:
        """Tag placed at the (aspect begin, opinion end) corner."""
        if self.variant == STANDARD:
            return f"{TAG_LINK_PAIR}-{sentiment.value}"  # type: ignore[union-attr]
        if self.variant == VARIANT1:
            return TAG_LINK_PAIR
        return f"{TAG_LINK_PAIR}-{sentiment.value}-{category}"  # type: ignore[union-attr]

    def is_link_tag(self, tag: str) -> bool:
        return tag not in (TAG_BEGIN, TAG_END)

    def parse_link_tag(self, tag: str) -> tuple[Sentiment | None, str | None]:
        """Recover (sentiment, category) carried by a link tag."""
        if self.variant == VARIANT1:
            return None, None
        rest = tag[len(TAG_LINK_PAIR) + 1:]
        if self.variant == STANDARD:
            return Sentiment(rest), None
        sent, _, category = rest.partition("-")
        return Sentiment(sent), category


def _is_punct(ch: str) -> bool:
    # Isolate punctuation and symbol characters (&, %, $, ...) alike.
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(raw_text: str, language_mode: str = SPACE_PUNCT) -> Sentence:
    """Deterministic tokenizer feeding the grid.

    space_punct splits on whitespace and emits each punctuation/symbol
    character as its own token; per_character emits one token per
    non-whitespace character (for Chinese text).
    """
    if language_mode not in (SPACE_PUNCT, PER_CHARACTER):
        raise ValueError(f"unknown language_mode {language_mode!r}")
    tokens: list[str] = []
    offsets: list[tuple[int, int]] = []
    if language_mode == PER_CHARACTER:
        for i, ch in enumerate(raw_text):
            if not ch.isspace():
                tokens.append(ch)
                offsets.append((i, i + 1))
    else:
        start = None
        for i, ch in enumerate(raw_text):
            if ch.isspace():
                if start is not None:
                    tokens.append(raw_text[start:i])
                    offsets.append((start, i))
                    start = None
            elif _is_punct(ch):
                if start is not None:
                    tokens.append(raw_text[start:i])
                    offsets.append((start, i))
                    start = None
                tokens.append(ch)
                offsets.append((i, i + 1))
            else:
                if start is None:
                    start = i
        if start is not None:
            tokens.append(raw_text[start:])
            offsets.append((start, len(raw_text)))
    if not tokens:
        raise EmptyInput(f"no tokens in {raw_text!r}")
    return Sentence(raw_text, tuple(tokens), tuple(offsets))


def char_span_to_token_span(
    sentence: Sentence, char_start: int, char_end: int, strict: bool = True
) -> Span:
    """Map a half-open character range onto the minimal covering token span.

    strict mode rejects ranges whose endpoints fall strictly inside a token;
    lenient mode snaps outward to whole tokens and emits MisalignmentWarning.
    """
    if not (0 <= char_start < char_end <= len(sentence.raw_text)):
        raise MisalignedSpan(
            f"char range [{char_start}, {char_end}) outside text of length {len(sentence.raw_text)}"
        )
    first = last = None
    for i, (tok_start, tok_end) in enumerate(sentence.char_offsets):
        if tok_start < char_end and char_start < tok_end:  # overlap
            if first is None:
                first = i
            last = i
    if first is None or last is None:
        raise MisalignedSpan(
            f"char range [{char_start}, {char_end}) covers no token in {sentence.raw_text!r}"
        )
    starts_inside = sentence.char_offsets[first][0] < char_start
    ends_inside = char_end < sentence.char_offsets[last][1]
    if starts_inside or ends_inside:
        if strict:
            raise MisalignedSpan(
                f"char range [{char_start}, {char_end}) cuts token boundary "
                f"in {sentence.raw_text!r}"
            )
        warnings.warn(
            f"snapped char range [{char_start}, {char_end}) outward to tokens "
            f"[{first}, {last}] in {sentence.raw_text!r}",
            MisalignmentWarning,
            stacklevel=2,
        )
    return Span(first, last)
