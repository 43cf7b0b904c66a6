"""Synthetic error generation driven by corpus-derived noise rates."""

from __future__ import annotations

import json
import logging
import unicodedata
from bisect import bisect_right
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from itertools import accumulate
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_sentences
from .corpusio import AnnotatedSentence, Corpus, Edit, Tokens, apply_edits, serialize_m2
from .taxonomy import BaseLabel, ErrorLabel, base_components

logger = logging.getLogger(__name__)

MAX_RATE = 0.5
RATE_FIELDS = ("char_delete", "char_insert", "char_transpose",
               "word_delete", "word_insert", "word_transpose", "punct_delete")

_SPELL = ErrorLabel((BaseLabel.R_SPELL,))
_MWORD = ErrorLabel((BaseLabel.M_WORD,))
_UWORD = ErrorLabel((BaseLabel.U_WORD,))
_WO = ErrorLabel((BaseLabel.R_WO,))
_MPUNCT = ErrorLabel((BaseLabel.M_PUNCT,))


def is_punct(token: str) -> bool:
    return bool(token) and all(unicodedata.category(c).startswith("P") for c in token)


@dataclass
class NoiseProfile:
    char_delete: float = 0.0
    char_insert: float = 0.0
    char_transpose: float = 0.0
    word_delete: float = 0.0
    word_insert: float = 0.0
    word_transpose: float = 0.0
    punct_delete: float = 0.0
    char_alphabet: dict[str, int] = field(default_factory=dict)
    word_unigrams: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in RATE_FIELDS:
            rate = getattr(self, name)
            if not 0.0 <= rate <= MAX_RATE:
                raise ValueError(f"{name}={rate} outside [0, {MAX_RATE}]")
        if self.char_insert > 0 and not self.char_alphabet:
            raise ValueError("char_insert > 0 needs a non-empty char_alphabet")
        if self.word_insert > 0 and not self.word_unigrams:
            raise ValueError("word_insert > 0 needs non-empty word_unigrams")

    def rates(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in RATE_FIELDS}

    def scaled(self, intensity: float) -> "NoiseProfile":
        """Every rate multiplied by ``intensity`` (capped at the maximum rate)."""
        if intensity < 0:
            raise ValueError("intensity must be non-negative")
        new = {}
        for name, rate in self.rates().items():
            r = rate * intensity
            if r > MAX_RATE:
                logger.warning("%s scaled to %.4f, capped at %.1f", name, r, MAX_RATE)
                r = MAX_RATE
            new[name] = r
        return replace(self, **new)

    def dumps(self) -> str:
        lines = [f"{name}={getattr(self, name)!r}" for name in RATE_FIELDS]
        for name in ("char_alphabet", "word_unigrams"):
            table = dict(sorted(getattr(self, name).items()))
            lines.append(f"{name}={json.dumps(table, ensure_ascii=False, sort_keys=True)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "NoiseProfile":
        known = {f.name for f in fields(cls)}
        values = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            key = key.strip()
            if not sep or key not in known:
                raise ValueError(f"line {lineno}: unknown or malformed entry {line!r}")
            values[key] = json.loads(raw.strip())
        return cls(**values)


# --- profile derivation -------------------------------------------------------

def _char_ops(clean: str, noisy: str) -> Counter:
    """Noising operations turning ``clean`` into ``noisy``.

    Read off an optimal string alignment; each substitution is split evenly
    over the three character operations.
    """
    n, m = len(clean), len(noisy)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if clean[i - 1] == noisy[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
            if i > 1 and j > 1 and clean[i - 1] == noisy[j - 2] and clean[i - 2] == noisy[j - 1]:
                d[i][j] = min(d[i][j], d[i - 2][j - 2] + 1)
    ops: Counter = Counter()
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and clean[i - 1] == noisy[j - 1] and d[i][j] == d[i - 1][j - 1]:
            i, j = i - 1, j - 1
        elif (i > 1 and j > 1 and clean[i - 1] == noisy[j - 2] and clean[i - 2] == noisy[j - 1]
              and d[i][j] == d[i - 2][j - 2] + 1):
            ops["char_transpose"] += 1
            i, j = i - 2, j - 2
        elif i > 0 and d[i][j] == d[i - 1][j] + 1:
            ops["char_delete"] += 1
            i -= 1
        elif j > 0 and d[i][j] == d[i][j - 1] + 1:
            ops["char_insert"] += 1
            j -= 1
        else:
            for op in ("char_delete", "char_insert", "char_transpose"):
                ops[op] += 1 / 3
            i, j = i - 1, j - 1
    return ops


def derive_noise_profile(gold: Corpus) -> NoiseProfile:
    """Estimate per-operation noise rates from annotator-0 (or first) edits."""
    if not gold:
        raise ValueError("cannot derive a noise profile from an empty corpus")
    events: Counter = Counter()
    chars: Counter = Counter()
    words: Counter = Counter()
    # opportunities, counted the way the generator counts them
    units: Counter = Counter()
    for sent in gold:
        annotator = 0 if 0 in sent.annotations else (sent.annotators or [0])[0]
        edits = sent.edits(annotator)
        clean = apply_edits(sent.source, edits)
        for t in clean:
            words[t] += 1
            chars.update(t)
            if is_punct(t):
                units["punct_delete"] += 1
                continue
            units["word_delete"] += 1
            units["char_delete"] += len(t)
            units["char_insert"] += len(t)
            units["char_transpose"] += sum(a != b for a, b in zip(t, t[1:]))
        units["word_insert"] += len(clean) + 1
        units["word_transpose"] += max(len(clean) - 1, 0)
        for e in edits:
            labs = base_components(e.label)
            if BaseLabel.R_SPELL in labs:
                noisy = " ".join(sent.source[e.start:e.end])
                events.update(_char_ops(" ".join(e.correction), noisy))
            if BaseLabel.M_WORD in labs:
                events["word_delete"] += 1
            if BaseLabel.U_WORD in labs:
                events["word_insert"] += 1
            if BaseLabel.R_WO in labs:
                events["word_transpose"] += 1
            if BaseLabel.M_PUNCT in labs:
                events["punct_delete"] += 1
    rates = {}
    for name in RATE_FIELDS:
        rate = events[name] / units[name] if units[name] else 0.0
        if rate > MAX_RATE:
            logger.warning("%s rate %.4f capped at %.1f", name, rate, MAX_RATE)
            rate = MAX_RATE
        rates[name] = rate
    return NoiseProfile(**rates, char_alphabet=dict(chars), word_unigrams=dict(words))


# --- generation ---------------------------------------------------------------

def substream(master_seed: int, index: int) -> np.random.Generator:
    """Philox counter-based generator keyed by (master seed, sentence index)."""
    key = ((master_seed & 0xFFFFFFFFFFFFFFFF) << 64) | (index & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


class _Sampler:
    def __init__(self, table: dict[str, int]):
        self.items = sorted(table)
        self.cum = list(accumulate(table[k] for k in self.items))

    def __call__(self, rng: np.random.Generator) -> str:
        return self.items[bisect_right(self.cum, rng.random() * self.cum[-1])]


@dataclass
class SynthRecord:
    noised: Tokens
    gold_edits: list[Edit]
    seed: tuple[int, int]
    # applied operation counts and the number of opportunities for each
    ops: Counter = field(default_factory=Counter, repr=False)
    trials: Counter = field(default_factory=Counter, repr=False)


def corrupt_word(word: str, rng: np.random.Generator, profile: NoiseProfile,
                 chars: Optional[_Sampler] = None, ops: Optional[Counter] = None,
                 trials: Optional[Counter] = None) -> str:
    """Apply character noise to one token; never returns an empty string."""
    ops = Counter() if ops is None else ops
    trials = Counter() if trials is None else trials
    if chars is None and profile.char_alphabet:
        chars = _Sampler(profile.char_alphabet)
    out = []
    i = 0
    pd, pt, pi = profile.char_delete, profile.char_transpose, profile.char_insert
    while i < len(word):
        u = rng.random()
        # swapping two equal letters would be a no-op
        has_next = i + 1 < len(word) and word[i] != word[i + 1]
        trials["char_delete"] += 1
        trials["char_insert"] += 1
        if has_next:
            trials["char_transpose"] += 1
        if u < pd:
            ops["char_delete"] += 1
            i += 1
        elif has_next and u < pd + pt:
            ops["char_transpose"] += 1
            out.extend((word[i + 1], word[i]))
            i += 2
        else:
            out.append(word[i])
            i += 1
        if rng.random() < pi:
            ops["char_insert"] += 1
            out.append(chars(rng))
    if not out:
        return word[0]
    return "".join(out)


def synthesize_sentence(clean: Sequence[str], profile: NoiseProfile,
                        rng: np.random.Generator,
                        words: Optional[_Sampler] = None,
                        chars: Optional[_Sampler] = None) -> tuple[Tokens, list[Edit], Counter, Counter]:
    clean = tuple(clean)
    ops, trials = Counter(), Counter()
    if not clean:
        return (), [], ops, trials
    if words is None and profile.word_unigrams:
        words = _Sampler(profile.word_unigrams)
    if chars is None and profile.char_alphabet:
        chars = _Sampler(profile.char_alphabet)

    # word deletion
    deleted = []
    for tok in clean:
        rate = profile.punct_delete if is_punct(tok) else profile.word_delete
        trials["punct_delete" if is_punct(tok) else "word_delete"] += 1
        deleted.append(rng.random() < rate)
    if all(deleted):
        deleted[0] = False
    for tok, d in zip(clean, deleted):
        if d:
            ops["punct_delete" if is_punct(tok) else "word_delete"] += 1
    survivors = [i for i, d in enumerate(deleted) if not d]

    # insertion into gaps: gap g sits before survivor g, gap len(survivors) at the end
    inserted: dict[int, str] = {}
    for g in range(len(survivors) + 1):
        trials["word_insert"] += 1
        if rng.random() < profile.word_insert:
            ops["word_insert"] += 1
            inserted[g] = words(rng)

    # transposition of clean-adjacent survivor pairs with nothing in between
    swapped: set[int] = set()
    g = 0
    while g + 1 < len(survivors):
        if survivors[g + 1] == survivors[g] + 1 and (g + 1) not in inserted:
            trials["word_transpose"] += 1
            if rng.random() < profile.word_transpose:
                ops["word_transpose"] += 1
                swapped.add(g)
                g += 2
                continue
        g += 1

    noisy_form = {}
    for c in survivors:
        tok = clean[c]
        if is_punct(tok) or (profile.char_delete == profile.char_insert == profile.char_transpose == 0):
            noisy_form[c] = tok
        else:
            noisy_form[c] = corrupt_word(tok, rng, profile, chars, ops, trials)

    noised: list[str] = []
    edits: list[Edit] = []

    def flush_gap(g: int, missing: list[str]):
        k = len(noised)
        if missing:
            label = _MPUNCT if all(is_punct(t) for t in missing) else _MWORD
            edits.append(Edit(k, k, tuple(missing), label))
        if g in inserted:
            noised.append(inserted[g])
            edits.append(Edit(k, k + 1, (), _UWORD))

    prev = -1
    g = 0
    while g < len(survivors):
        c = survivors[g]
        flush_gap(g, list(clean[prev + 1:c]))
        k = len(noised)
        if g in swapped:
            c2 = survivors[g + 1]
            noised.extend((noisy_form[c2], noisy_form[c]))
            edits.append(Edit(k, k + 2, (clean[c], clean[c2]), _WO))
            prev = c2
            g += 2
            continue
        noised.append(noisy_form[c])
        if noisy_form[c] != clean[c]:
            edits.append(Edit(k, k + 1, (clean[c],), _SPELL))
        prev = c
        g += 1
    flush_gap(len(survivors), list(clean[prev + 1:]))
    return tuple(noised), edits, ops, trials


def synthesize(clean: Iterable[Sequence[str]], profile: NoiseProfile, master_seed: int,
               intensity: float = 1.0) -> list[SynthRecord]:
    """Noise every sentence with its own substream of ``master_seed``."""
    if intensity != 1.0:
        profile = profile.scaled(intensity)
    words = _Sampler(profile.word_unigrams) if profile.word_unigrams else None
    chars = _Sampler(profile.char_alphabet) if profile.char_alphabet else None
    out = []
    for idx, sent in enumerate(clean):
        rng = substream(master_seed, idx)
        noised, edits, ops, trials = synthesize_sentence(sent, profile, rng, words, chars)
        out.append(SynthRecord(noised, edits, (master_seed, idx), ops, trials))
    return out


def write_synth_m2(records: Sequence[SynthRecord], clean: Optional[Sequence[Sequence[str]]] = None) -> str:
    """M2 text with the noised sentence as source and restorative edits."""
    if clean is not None and len(clean) != len(records):
        raise ValueError("records and clean sentences differ in length")
    corpus = []
    for rec in records:
        edits = tuple(Edit(e.start, e.end, e.correction, e.label, 0) for e in rec.gold_edits)
        corpus.append(AnnotatedSentence(rec.noised, {0: edits}))
    return serialize_m2(corpus)


class Noiser(BaseEstimator, TransformerMixin):
    """Estimator wrapper: ``fit`` derives a profile from a gold corpus,
    ``transform`` noises clean sentences."""

    def __init__(self, seed=0, intensity=1.0, profile=None):
        self.seed = seed
        self.intensity = intensity
        self.profile = profile

    def fit(self, X: Optional[Corpus] = None, y=None):
        if X is None:
            if self.profile is None:
                raise ValueError("need a gold corpus or a fixed profile")
            self.profile_ = self.profile
        else:
            self.profile_ = derive_noise_profile(list(X))
        return self

    def transform(self, X) -> list[SynthRecord]:
        check_is_fitted(self, "profile_")
        return synthesize(check_sentences(X), self.profile_, self.seed, self.intensity)
