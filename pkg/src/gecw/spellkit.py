"""Context-aware statistical spelling correction and replacement lists."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence, TextIO, Union

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_sentences
from .corpusio import Edit, Tokens, tokenize_line
from .ngram_lm import NGramModel
from .taxonomy import BaseLabel, ErrorLabel

logger = logging.getLogger(__name__)

ESTONIAN_ALPHABET = "abcdefghijklmnopqrsšzžtuvwõäöüxy" + "ABCDEFGHIJKLMNOPQRSŠZŽTUVWÕÄÖÜXY" + "-"
MAX_INDEX_DELETES = 2


def osa_distance(a: str, b: str) -> int:
    """Optimal string alignment distance.

    Levenshtein distance where swapping two adjacent characters costs 1
    (restricted Damerau-Levenshtein: a transposed pair is not edited again).
    """
    if a == b:
        return 0
    n, m = len(a), len(b)
    prev2 = None
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if (i > 1 and j > 1 and a[i - 1] == b[j - 2] and a[i - 2] == b[j - 1]):
                cur[j] = min(cur[j], prev2[j - 2] + 1)
        prev2, prev = prev, cur
    return prev[m]


def deletes(word: str, max_deletes: int) -> set[str]:
    """``word`` with every choice of up to ``max_deletes`` characters removed."""
    out = {word}
    n = len(word)
    for d in range(1, min(max_deletes, n) + 1):
        for idx in combinations(range(n), d):
            drop = set(idx)
            out.add("".join(c for i, c in enumerate(word) if i not in drop))
    return out


class CandidateIndex:
    """Symmetric-delete index over a vocabulary."""

    def __init__(self, vocab: Iterable[str], max_deletes: int = MAX_INDEX_DELETES):
        self.words: list[str] = sorted(set(vocab))
        self.max_deletes = max_deletes
        self.ids = {w: i for i, w in enumerate(self.words)}
        self.index: dict[str, set[int]] = {}
        for i, w in enumerate(self.words):
            for v in deletes(w, max_deletes):
                self.index.setdefault(v, set()).add(i)

    def __contains__(self, word: str) -> bool:
        return word in self.ids

    def __len__(self) -> int:
        return len(self.words)

    def candidates(self, word: str, max_dist: int) -> set[tuple[int, int]]:
        """Vocabulary ids within OSA distance ``max_dist`` of ``word``."""
        if max_dist > self.max_deletes:
            raise ValueError(f"max_dist {max_dist} exceeds index depth {self.max_deletes}")
        if max_dist < 0:
            return set()
        hits: set[int] = set()
        for v in deletes(word, max_dist):
            hits.update(self.index.get(v, ()))
        out = set()
        for i in hits:
            w = self.words[i]
            if abs(len(w) - len(word)) > max_dist:
                continue
            d = osa_distance(word, w)
            if d <= max_dist:
                out.add((i, d))
        return out


def candidates(word: str, index: CandidateIndex, max_dist: int) -> set[tuple[int, int]]:
    return index.candidates(word, max_dist)


@dataclass
class CorrectionPolicy:
    max_edit_distance_oov: int = 2
    max_edit_distance_vocab: int = 1
    distance_penalty: float = 4.0
    margin: float = 2.0
    alphabet: str = ESTONIAN_ALPHABET
    protect: bool = True
    max_length_ratio: float = 0.4

    def __post_init__(self):
        for name in ("max_edit_distance_oov", "max_edit_distance_vocab",
                     "distance_penalty", "margin", "max_length_ratio"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def is_protected(token: str, position: int) -> bool:
    """Tokens the corrector leaves alone.

    Digits, all-caps words, capitalised words past the first position, and
    tokens without letters.
    """
    if any(c.isdigit() for c in token):
        return True
    if not any(c.isalpha() for c in token):
        return True
    letters = [c for c in token if c.isalpha()]
    if len(letters) > 1 and all(c.isupper() for c in letters):
        return True
    if position > 0 and token[0].isupper():
        return True
    return False


@dataclass(frozen=True)
class Replacement:
    position: int
    source: Tokens
    target: Tokens
    distance: int = 0


def correct_sentence(tokens: Sequence[str], model: NGramModel, index: CandidateIndex,
                     policy: Optional[CorrectionPolicy] = None) -> tuple[Tokens, list[Replacement]]:
    """Correct one sentence left to right against the language model."""
    policy = policy or CorrectionPolicy()
    if model.order < 2:
        raise ValueError("the corrector needs a model of order 2 or more")
    out = list(tokens)
    applied = []
    for pos, tok in enumerate(tokens):
        if policy.protect and is_protected(tok, pos):
            continue
        in_vocab = tok in index
        bound = policy.max_edit_distance_vocab if in_vocab else policy.max_edit_distance_oov
        bound = min(bound, index.max_deletes)
        if bound <= 0:
            continue
        cands = [(index.words[i], d) for i, d in index.candidates(tok, bound) if d > 0]
        # never turn a word into punctuation or a number
        cands = [(w, d) for w, d in cands
                 if abs(len(w) - len(tok)) <= policy.max_length_ratio * len(tok)
                 and any(c.isalpha() for c in w)]
        if not cands:
            continue
        base = model.window_logprob(out, pos)
        best_word, best_score, best_d = None, -math.inf, 0
        for w, d in sorted(cands):
            out[pos] = w
            s = model.window_logprob(out, pos) - policy.distance_penalty * d
            if s > best_score:
                best_word, best_score, best_d = w, s, d
        out[pos] = tok
        need = base + policy.margin if in_vocab else base
        if best_score > need:
            out[pos] = best_word
            applied.append(Replacement(pos, (tok,), (best_word,), best_d))
    return tuple(out), applied


# --- replacement lists ------------------------------------------------------

class ReplacementListError(ValueError):
    pass


@dataclass
class ReplacementList:
    """Deterministic multi-token rewrites applied before statistical correction."""

    entries: dict[Tokens, Tokens] = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {tuple(k): tuple(v) for k, v in self.entries.items()}
        if any(not k for k in self.entries):
            raise ReplacementListError("empty key in replacement list")
        self._by_first: dict[str, list[Tokens]] = {}
        for key in sorted(self.entries, key=lambda k: (-len(k), k)):
            self._by_first.setdefault(key[0], []).append(key)

    def __len__(self):
        return len(self.entries)

    def items(self):
        """Entries ordered longest key first."""
        return sorted(self.entries.items(), key=lambda kv: (-len(kv[0]), kv[0]))

    def apply(self, tokens: Sequence[str]) -> Tokens:
        return self.apply_with_edits(tokens)[0]

    def apply_with_edits(self, tokens: Sequence[str]) -> tuple[Tokens, list[Edit]]:
        """One left-to-right pass, longest match first, no re-scanning.

        Returns the rewritten tokens and the applied rewrites as edits over
        the input positions.
        """
        tokens = tuple(tokens)
        out: list[str] = []
        edits = []
        i = 0
        while i < len(tokens):
            for key in self._by_first.get(tokens[i], ()):
                if tokens[i:i + len(key)] == key:
                    val = self.entries[key]
                    out.extend(val)
                    edits.append(Edit(i, i + len(key), val, ErrorLabel((BaseLabel.R_SPELL,))))
                    i += len(key)
                    break
            else:
                out.append(tokens[i])
                i += 1
        return tuple(out), edits


def load_replacement_list(stream: Union[TextIO, str]) -> ReplacementList:
    """Read ``wrong<TAB>correct`` lines; ``#`` starts a comment line."""
    lines = stream.splitlines() if isinstance(stream, str) else stream
    entries: dict[Tokens, Tokens] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ReplacementListError(
                f"line {lineno}: expected exactly one tab, got {len(cols) - 1}: {line!r}")
        key, val = tokenize_line(cols[0]), tokenize_line(cols[1])
        if not key:
            raise ReplacementListError(f"line {lineno}: empty source side")
        if key in entries:
            logger.warning("line %d: duplicate entry %r, keeping the later one", lineno, cols[0])
        entries[key] = val
    return ReplacementList(entries)


def apply_replacement_list(tokens: Sequence[str], replacements: ReplacementList) -> Tokens:
    return replacements.apply(tokens)


# --- estimator ----------------------------------------------------------------

class SpellCorrector(BaseEstimator, TransformerMixin):
    """Statistical spelling corrector.

    ``fit`` trains an n-gram model and a candidate index on clean sentences;
    ``transform`` corrects sentences, first applying ``replacements`` when
    given.
    """

    def __init__(self, order=3, max_edit_distance_oov=2, max_edit_distance_vocab=1,
                 distance_penalty=4.0, margin=2.0, protect=True, max_length_ratio=0.4,
                 replacements=None):
        self.order = order
        self.max_edit_distance_oov = max_edit_distance_oov
        self.max_edit_distance_vocab = max_edit_distance_vocab
        self.distance_penalty = distance_penalty
        self.margin = margin
        self.protect = protect
        self.max_length_ratio = max_length_ratio
        self.replacements = replacements

    @property
    def policy(self) -> CorrectionPolicy:
        return CorrectionPolicy(
            max_edit_distance_oov=self.max_edit_distance_oov,
            max_edit_distance_vocab=self.max_edit_distance_vocab,
            distance_penalty=self.distance_penalty,
            margin=self.margin,
            protect=self.protect,
            max_length_ratio=self.max_length_ratio,
        )

    def fit(self, X, y=None):
        self.policy  # validates parameters
        model = NGramModel(order=self.order).fit(check_sentences(X))
        return self._attach(model)

    def _attach(self, model: NGramModel):
        if model.order < 2:
            raise ValueError("the corrector needs a model of order 2 or more")
        self.model_ = model
        self.index_ = CandidateIndex(model.words)
        return self

    @classmethod
    def from_model(cls, model: NGramModel, **params) -> "SpellCorrector":
        est = cls(order=model.order, **params)
        return est._attach(model)

    def correct(self, tokens: Sequence[str]) -> tuple[Tokens, list[Replacement]]:
        check_is_fitted(self, "model_")
        toks = tuple(tokens)
        if self.replacements is not None:
            toks = self.replacements.apply(toks)
        return correct_sentence(toks, self.model_, self.index_, self.policy)

    def transform(self, X) -> list[Tokens]:
        return [self.correct(s)[0] for s in check_sentences(X)]
