"""Word-order anomaly detection from POS trigrams in context.

A trigram's context is the tag before it and the tag after it (or the
sentence boundaries). A span is flagged when its context is rare for the
trigram, or when the trigram itself has too little support.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence, TextIO, Union

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_aligned, check_tagged
from .corpusio import Corpus, Edit, TaggedSentence
from .scorer import Counts, detection_overlap, f_beta

BOS_TAG, EOS_TAG = "<S>", "</S>"
RARE, UNSEEN = "rare-context", "unseen-trigram"
MODEL_HEADER = "#gecw-pos-model v1"

Trigram = tuple[str, str, str]
Context = tuple[str, str, str, str, str]


@dataclass(frozen=True)
class FlaggedSpan:
    start: int
    end: int
    probability: float
    reason: str


def windows(pos: Sequence[str]) -> Iterable[tuple[int, Context]]:
    """(start, (prev, t1, t2, t3, next)) for every trigram of the sentence."""
    padded = (BOS_TAG,) + tuple(pos) + (EOS_TAG,)
    for i in range(len(pos) - 2):
        yield i, padded[i:i + 5]


def load_allowlist(stream: Union[TextIO, str]) -> frozenset[Context]:
    """Never-flag contexts, five whitespace-separated tags per line."""
    lines = stream.splitlines() if isinstance(stream, str) else stream
    out = set()
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tags = tuple(line.split())
        if len(tags) != 5:
            raise ValueError(f"line {lineno}: expected 5 tags, got {len(tags)}")
        out.add(tags)
    return frozenset(out)


class PosContextDetector(BaseEstimator):
    """Flags improbable POS-trigram contexts.

    Parameters
    ----------
    threshold : float
        Flag a context whose probability is strictly below this value.
    min_support : int
        Trigrams seen fewer times are flagged as unseen.
    mode : {"conditional", "joint"}
        ``conditional`` is count(context) / count(trigram); ``joint`` is
        count(context) / number of trigram positions in training.
    allowlist : set of 5-tuples, optional
        Contexts never flagged.
    """

    def __init__(self, threshold=0.05, min_support=10, mode="conditional", allowlist=None):
        self.threshold = threshold
        self.min_support = min_support
        self.mode = mode
        self.allowlist = allowlist

    def fit(self, X, y=None):
        tagged = check_tagged(X)
        if not tagged:
            raise ValueError("cannot train on an empty corpus")
        tri, ctx = Counter(), Counter()
        for sent in tagged:
            for _, c in windows(sent.pos):
                tri[c[1:4]] += 1
                ctx[c] += 1
        self.trigram_counts_ = dict(tri)
        self.context_counts_ = dict(ctx)
        self.n_positions_ = sum(tri.values())
        return self

    def probability(self, context: Context) -> Fraction:
        check_is_fitted(self, "trigram_counts_")
        c = self.context_counts_.get(tuple(context), 0)
        if self.mode == "joint":
            return Fraction(c, self.n_positions_) if self.n_positions_ else Fraction(0)
        if self.mode != "conditional":
            raise ValueError(f"unknown mode {self.mode!r}")
        t = self.trigram_counts_.get(tuple(context[1:4]), 0)
        return Fraction(c, t) if t else Fraction(0)

    def detect(self, sentence: Union[TaggedSentence, Sequence[str]],
               threshold: Optional[float] = None) -> list[FlaggedSpan]:
        check_is_fitted(self, "trigram_counts_")
        threshold = self.threshold if threshold is None else threshold
        (sent,) = check_tagged([sentence])
        allow = self.allowlist or frozenset()
        flags = []
        for i, c in windows(sent.pos):
            if c in allow:
                continue
            support = self.trigram_counts_.get(c[1:4], 0)
            p = self.probability(c)
            if support < self.min_support:
                flags.append(FlaggedSpan(i, i + 3, float(p), UNSEEN))
            elif p < threshold:
                flags.append(FlaggedSpan(i, i + 3, float(p), RARE))
        return flags

    def predict(self, X) -> list[list[FlaggedSpan]]:
        return [self.detect(s) for s in check_tagged(X)]

    # --- persistence ------------------------------------------------------

    def dumps(self) -> str:
        check_is_fitted(self, "trigram_counts_")
        lines = [f"{MODEL_HEADER} min_support={self.min_support}"]
        lines += [f"T\t{' '.join(k)}\t{v}" for k, v in sorted(self.trigram_counts_.items())]
        lines += [f"C\t{' '.join(k)}\t{v}" for k, v in sorted(self.context_counts_.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str, **params) -> "PosContextDetector":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(MODEL_HEADER):
            raise ValueError("not a POS context model file")
        header = dict(kv.split("=", 1) for kv in lines[0][len(MODEL_HEADER):].split())
        params.setdefault("min_support", int(header.get("min_support", 10)))
        det = cls(**params)
        tri, ctx = {}, {}
        for lineno, line in enumerate(lines[1:], 2):
            kind, key, count = line.split("\t")
            tags = tuple(key.split())
            if kind == "T" and len(tags) == 3:
                tri[tags] = int(count)
            elif kind == "C" and len(tags) == 5:
                ctx[tags] = int(count)
            else:
                raise ValueError(f"line {lineno}: malformed model entry")
        det.trigram_counts_, det.context_counts_ = tri, ctx
        det.n_positions_ = sum(tri.values())
        return det


def train_pos_model(tagged: Iterable[TaggedSentence], min_support: int = 10) -> PosContextDetector:
    return PosContextDetector(min_support=min_support).fit(list(tagged))


def detect(model: PosContextDetector, sentence: TaggedSentence,
           threshold: float = 0.05) -> list[FlaggedSpan]:
    return model.detect(sentence, threshold)


def _as_edit(flag) -> Edit:
    if isinstance(flag, Edit):
        return flag
    if isinstance(flag, FlaggedSpan):
        return Edit(flag.start, flag.end)
    return Edit(*flag[:2])


@dataclass(frozen=True)
class DetectorScore:
    precision: float
    recall: float
    f05: float
    flag_tp: int
    n_flags: int
    recalled: int
    n_gold: int


def evaluate_detector(flags: Sequence[Sequence], gold: Corpus, beta: float = 0.5) -> DetectorScore:
    """Span-overlap precision and recall of flags against gold edits.

    Per sentence, the annotator whose edits are hit by the most flags is
    used (lowest id on ties).
    """
    check_aligned(flags, gold, "flags and gold sentences")
    flag_tp = n_flags = recalled = n_gold = 0
    for sent_flags, sent in zip(flags, gold):
        spans = [_as_edit(f) for f in sent_flags]
        best = None
        for a in sent.annotators or [0]:
            edits = sent.edits(a)
            tp = sum(1 for s in spans if any(detection_overlap(e, [s]) for e in edits))
            if best is None or tp > best[0]:
                best = (tp, edits)
        tp, edits = best
        flag_tp += tp
        n_flags += len(spans)
        recalled += sum(1 for e in edits if detection_overlap(e, spans))
        n_gold += len(edits)
    c = Counts(flag_tp, n_flags - flag_tp, 0)
    p = c.precision
    r = Fraction(recalled, n_gold) if n_gold else Fraction(1)
    f = f_beta(p, r, Fraction(beta).limit_denominator(1000))
    return DetectorScore(float(p), float(r), float(f), flag_tp, n_flags, recalled, n_gold)
