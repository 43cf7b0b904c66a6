"""Readers and writers for M2, CoNLL-U and tokenized plain text."""

from __future__ import annotations

import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Sequence, TextIO, Union

from .taxonomy import NOOP, NOOP_LABEL, ErrorLabel, LabelScheme, DEFAULT_SCHEME

logger = logging.getLogger(__name__)

NONE_FIELD = "-NONE-"
REQUIRED = "REQUIRED"
MAX_ANNOTATORS = 3

Tokens = tuple[str, ...]


class CorpusError(ValueError):
    """Base class for malformed or invalid corpus data."""


class ParseError(CorpusError):
    def __init__(self, lineno: int, text: str, reason: str = "malformed line"):
        super().__init__(f"line {lineno}: {reason}: {text!r}")
        self.lineno = lineno
        self.text = text


class ValidationError(CorpusError):
    pass


@dataclass(frozen=True)
class Edit:
    start: int
    end: int
    correction: Tokens = ()
    label: ErrorLabel = NOOP_LABEL
    annotator: int = 0

    def __post_init__(self):
        if not 0 <= self.start <= self.end:
            raise ValidationError(f"bad edit span ({self.start}, {self.end})")
        if not isinstance(self.correction, tuple):
            object.__setattr__(self, "correction", tuple(self.correction))

    @property
    def span(self) -> tuple[int, int]:
        return self.start, self.end

    @property
    def is_word_order(self) -> bool:
        return self.label.is_word_order

    def key(self) -> tuple[int, int, Tokens]:
        return self.start, self.end, self.correction

    def contains(self, other: "Edit") -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass(frozen=True)
class AnnotatedSentence:
    source: Tokens
    annotations: dict[int, tuple[Edit, ...]] = field(default_factory=dict)

    @property
    def annotators(self) -> list[int]:
        return sorted(self.annotations)

    def edits(self, annotator: int) -> tuple[Edit, ...]:
        return self.annotations.get(annotator, ())


Corpus = list[AnnotatedSentence]


@dataclass(frozen=True)
class TaggedSentence:
    tokens: Tokens
    pos: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.pos):
            raise ValidationError("tokens and POS tags differ in length")


def normalize(tok: str) -> str:
    return unicodedata.normalize("NFC", tok)


def tokenize_line(line: str) -> Tokens:
    """Split a pre-tokenized line on whitespace (no further tokenization)."""
    return tuple(normalize(t) for t in line.split())


def spans_overlap(a: Edit, b: Edit) -> bool:
    """Overlap test for edits from one annotator.

    Two insertions at the same index are ambiguous and count as overlapping.
    Touching spans do not overlap.
    """
    if a.start == a.end and b.start == b.end:
        return a.start == b.start
    if a.start == a.end:
        return b.start < a.start < b.end
    if b.start == b.end:
        return a.start < b.start < a.end
    return max(a.start, b.start) < min(a.end, b.end)


def check_edits(edits: Sequence[Edit], length: int) -> None:
    """Raise ValidationError if the edits break the span or nesting rules."""
    for e in edits:
        if e.end > length:
            raise ValidationError(
                f"edit ({e.start}, {e.end}) out of bounds for {length} tokens")
    wo = [e for e in edits if e.is_word_order]
    plain = [e for e in edits if not e.is_word_order]
    for group in (wo, plain):
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                if spans_overlap(a, b):
                    raise ValidationError(f"overlapping edits {_fmt(a)} and {_fmt(b)}")
    for w in wo:
        for e in plain:
            if spans_overlap(w, e) and not w.contains(e):
                raise ValidationError(
                    f"edit {_fmt(e)} partially overlaps word-order edit {_fmt(w)}")


def _fmt(e: Edit) -> str:
    return f"{e.start} {e.end}|||{e.label}|||{' '.join(e.correction) or NONE_FIELD}"


def validate_sentence(sent: AnnotatedSentence) -> None:
    for edits in sent.annotations.values():
        check_edits(edits, len(sent.source))
        for w in edits:
            if w.is_word_order and not _carries_nested(w, edits, sent.source):
                logger.warning("word-order edit %s is not a reordering of its span "
                               "with nested fixes applied", _fmt(w))
    if len(sent.annotations) > MAX_ANNOTATORS:
        logger.warning("sentence has %d annotators (more than %d)",
                       len(sent.annotations), MAX_ANNOTATORS)


def apply_edits(source: Sequence[str], edits: Iterable[Edit]) -> Tokens:
    """Return the corrected token sequence.

    Plain edits nested inside a word-order edit are skipped: the word-order
    edit's correction already holds the final text of its span.
    """
    edits = list(edits)
    check_edits(edits, len(source))
    wo = [e for e in edits if e.is_word_order]
    active = wo + [e for e in edits
                   if not e.is_word_order and not any(_nested(w, e) for w in wo)]
    out = list(source)
    for e in sorted(active, key=lambda e: (e.start, e.end), reverse=True):
        out[e.start:e.end] = e.correction
    return tuple(out)


def _nested(wo: Edit, e: Edit) -> bool:
    # an insertion on the boundary of the span touches it but is not inside
    return wo.contains(e) and spans_overlap(wo, e)


def nested_edits(wo: Edit, edits: Iterable[Edit]) -> list[Edit]:
    return [e for e in edits if not e.is_word_order and _nested(wo, e)]


def _carries_nested(wo: Edit, edits: Sequence[Edit], source: Sequence[str]) -> bool:
    fixed = list(source[wo.start:wo.end])
    for e in sorted(nested_edits(wo, edits), key=lambda e: (e.start, e.end), reverse=True):
        fixed[e.start - wo.start:e.end - wo.start] = e.correction
    return Counter(fixed) == Counter(wo.correction)


# --- M2 -----------------------------------------------------------------

def _blocks(lines: Iterable[str]) -> Iterator[list[tuple[int, str]]]:
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if line.strip():
            block.append((lineno, line))
        elif block:
            yield block
            block = []
    if block:
        yield block


def _parse_a_line(lineno: int, line: str, scheme: LabelScheme) -> tuple[int, Optional[Edit]]:
    fields = line[2:].split("|||")
    if len(fields) != 6:
        raise ParseError(lineno, line, "expected 6 '|||'-separated fields")
    span = fields[0].split()
    try:
        start, end = int(span[0]), int(span[1])
        annotator = int(fields[5])
    except (IndexError, ValueError):
        raise ParseError(lineno, line) from None
    if len(span) != 2 or annotator < 0:
        raise ParseError(lineno, line)
    if fields[1] == NOOP or (start, end) == (-1, -1):
        return annotator, None
    if start < 0 or end < start:
        raise ValidationError(f"line {lineno}: bad span ({start}, {end})")
    label = scheme.parse_lenient(fields[1])
    corr = fields[2].strip()
    correction = () if corr in (NONE_FIELD, "") else tuple(normalize(t) for t in corr.split(" ") if t)
    return annotator, Edit(start, end, correction, label, annotator)


def parse_m2(stream: Union[TextIO, str], scheme: Optional[LabelScheme] = None) -> Corpus:
    """Parse an M2 file into a list of annotated sentences.

    ``stream`` may be a file object or the file's text.
    """
    scheme = scheme or DEFAULT_SCHEME
    lines = stream.splitlines() if isinstance(stream, str) else stream
    corpus = []
    for block in _blocks(lines):
        lineno, first = block[0]
        if not first.startswith("S ") and first != "S":
            raise ParseError(lineno, first, "block must start with an 'S' line")
        source = tokenize_line(first[2:])
        annotations: dict[int, list[Edit]] = {}
        for lineno, line in block[1:]:
            if not line.startswith("A "):
                raise ParseError(lineno, line, "expected an 'A' line")
            annotator, edit = _parse_a_line(lineno, line, scheme)
            bucket = annotations.setdefault(annotator, [])
            if edit is not None:
                if edit.end > len(source):
                    raise ValidationError(
                        f"line {lineno}: span ({edit.start}, {edit.end}) beyond "
                        f"{len(source)} tokens")
                bucket.append(edit)
        sent = AnnotatedSentence(
            source,
            {a: tuple(sorted(es, key=lambda e: (e.start, e.end))) for a, es in annotations.items()},
        )
        validate_sentence(sent)
        corpus.append(sent)
    return corpus


def format_edit(e: Edit, annotator: Optional[int] = None) -> str:
    corr = " ".join(e.correction) if e.correction else NONE_FIELD
    a = e.annotator if annotator is None else annotator
    return f"A {e.start} {e.end}|||{e.label}|||{corr}|||{REQUIRED}|||{NONE_FIELD}|||{a}"


def serialize_m2(corpus: Iterable[AnnotatedSentence]) -> str:
    out = []
    for sent in corpus:
        lines = ["S " + " ".join(sent.source)]
        for a in sent.annotators:
            edits = sorted(sent.annotations[a], key=lambda e: (e.start, e.end))
            if not edits:
                lines.append(f"A -1 -1|||{NOOP}|||{NONE_FIELD}|||{REQUIRED}|||{NONE_FIELD}|||{a}")
            lines.extend(format_edit(e, a) for e in edits)
        out.append("\n".join(lines) + "\n")
    return "\n".join(out)


# --- CoNLL-U ------------------------------------------------------------

def parse_conllu(stream: Union[TextIO, str]) -> list[TaggedSentence]:
    """Read FORM and UPOS columns; comments and multiword ranges are skipped."""
    lines = stream.splitlines() if isinstance(stream, str) else stream
    out = []
    for block in _blocks(lines):
        rows = []
        for lineno, line in block:
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if "-" in cols[0] or "." in cols[0]:
                continue
            try:
                idx = int(cols[0])
            except ValueError:
                raise ParseError(lineno, line, "non-integer token id") from None
            if len(cols) < 4 or not cols[3]:
                raise ParseError(lineno, line, "missing UPOS column")
            rows.append((idx, normalize(cols[1]), cols[3]))
        if rows:
            rows.sort(key=lambda r: r[0])
            out.append(TaggedSentence(tuple(r[1] for r in rows), tuple(r[2] for r in rows)))
    return out


# --- plain text ---------------------------------------------------------

def read_plain(stream: Union[TextIO, str]) -> list[Tokens]:
    """One sentence per line; an empty line is an empty sentence."""
    lines = stream.splitlines() if isinstance(stream, str) else [l.rstrip("\r\n") for l in stream]
    return [tokenize_line(line) for line in lines]


def write_plain(sentences: Iterable[Sequence[str]]) -> str:
    return "".join(" ".join(s) + "\n" for s in sentences)
