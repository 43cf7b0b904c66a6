"""Input checks shared by the estimators."""

from __future__ import annotations

from typing import Any, Sequence

from .corpusio import TaggedSentence, Tokens, tokenize_line


def check_sentences(X: Any, allow_empty: bool = True) -> list[Tokens]:
    """Coerce ``X`` to a list of token tuples.

    Accepts an iterable whose items are either pre-tokenized strings (split on
    whitespace) or sequences of tokens. Tokens must be non-empty strings
    without whitespace.
    """
    if isinstance(X, (str, bytes)):
        raise TypeError("expected an iterable of sentences, got a single string")
    out = []
    for i, item in enumerate(X):
        if isinstance(item, str):
            toks = tokenize_line(item)
        elif isinstance(item, TaggedSentence):
            toks = item.tokens
        else:
            toks = tuple(item)
            for t in toks:
                if not isinstance(t, str) or not t or any(c.isspace() for c in t):
                    raise ValueError(f"sentence {i}: invalid token {t!r}")
        if not toks and not allow_empty:
            raise ValueError(f"sentence {i} is empty")
        out.append(toks)
    return out


def check_tagged(X: Any) -> list[TaggedSentence]:
    """Coerce ``X`` to tagged sentences; bare tag sequences get dummy tokens."""
    out = []
    for i, item in enumerate(X):
        if isinstance(item, TaggedSentence):
            sent = item
        else:
            tags = tuple(item.split()) if isinstance(item, str) else tuple(item)
            sent = TaggedSentence(tags, tags)
        for tag in sent.pos:
            if not tag or not tag.isascii() or tag != tag.upper():
                raise ValueError(f"sentence {i}: invalid POS tag {tag!r}")
        out.append(sent)
    return out


def check_aligned(a: Sequence, b: Sequence, what: str = "inputs") -> None:
    if len(a) != len(b):
        raise ValueError(f"{what} differ in length: {len(a)} vs {len(b)}")
