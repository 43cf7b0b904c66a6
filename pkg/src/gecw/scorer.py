"""MaxMatch (M2) scoring with separate word-order matching.

The hypothesis is aligned to the source with a token-level Levenshtein
alignment. All minimum-cost alignments are folded into an edit lattice
whose edges are either matched tokens or groups of adjacent non-match
operations. For each annotator the lattice is widened with arcs that
reproduce that annotator's gold edits verbatim, and the path agreeing most
with the gold edits is selected. The annotator whose counts give the best
corpus F-score is kept.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial
from typing import Iterable, Optional, Sequence, Union

from sklearn.base import BaseEstimator

from .corpusio import AnnotatedSentence, Corpus, Edit, Tokens, nested_edits, normalize
from .taxonomy import BaseLabel, base_components

logger = logging.getLogger(__name__)

Number = Union[int, float, Fraction]

# Alignment costs are doubled so that the case-only substitution stays integral.
_MATCH, _CASE_SUB, _SUB, _INDEL = 0, 1, 2, 2


def f_beta(p: Number, r: Number, beta: Number = 0.5) -> Number:
    """Weighted harmonic mean of precision and recall; 0 when both are 0."""
    b2 = beta * beta
    num = (1 + b2) * p * r
    den = b2 * p + r
    if den == 0:
        return 0 * num
    return num / den


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> Fraction:
        proposed = self.tp + self.fp
        return Fraction(self.tp, proposed) if proposed else Fraction(1)

    @property
    def recall(self) -> Fraction:
        gold = self.tp + self.fn
        return Fraction(self.tp, gold) if gold else Fraction(1)

    def f(self, beta: Number = Fraction(1, 2)) -> Fraction:
        return f_beta(self.precision, self.recall, Fraction(beta))


# --- alignment ------------------------------------------------------------

def _sub_cost(a: str, b: str, case_half_cost: bool) -> int:
    if a == b:
        return _MATCH
    if case_half_cost and a.casefold() == b.casefold():
        return _CASE_SUB
    return _SUB


@dataclass
class Alignment:
    """Forward and backward cost tables for a source/hypothesis pair."""

    source: Tokens
    hypothesis: Tokens
    fwd: list[list[int]]
    bwd: list[list[int]]
    case_half_cost: bool = True

    @property
    def cost(self) -> int:
        return self.fwd[len(self.source)][len(self.hypothesis)]

    def on_path(self, i: int, j: int) -> bool:
        return self.fwd[i][j] + self.bwd[i][j] == self.cost

    def steps(self, i: int, j: int) -> list[tuple[str, int, int]]:
        """Optimal single operations leaving (i, j): (kind, i', j').

        Kinds are ``match``, ``sub``, ``del`` and ``ins``; the order is the
        preference order used for the canonical alignment.
        """
        n, m = len(self.source), len(self.hypothesis)
        out = []
        here = self.fwd[i][j]
        if i < n and j < m:
            c = _sub_cost(self.source[i], self.hypothesis[j], self.case_half_cost)
            if here + c + self.bwd[i + 1][j + 1] == self.cost:
                out.append(("match" if c == _MATCH else "sub", i + 1, j + 1))
        if i < n and here + _INDEL + self.bwd[i + 1][j] == self.cost:
            out.append(("del", i + 1, j))
        if j < m and here + _INDEL + self.bwd[i][j + 1] == self.cost:
            out.append(("ins", i, j + 1))
        return out

    def canonical_path(self) -> list[tuple[int, int]]:
        """One fixed optimal alignment as a list of grid states."""
        n, m = len(self.source), len(self.hypothesis)
        i = j = 0
        path = [(0, 0)]
        while (i, j) != (n, m):
            _, i, j = self.steps(i, j)[0]
            path.append((i, j))
        return path


def align(source: Sequence[str], hypothesis: Sequence[str],
          case_half_cost: bool = True) -> Alignment:
    src, hyp = tuple(source), tuple(hypothesis)
    n, m = len(src), len(hyp)
    fwd = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        fwd[i][0] = i * _INDEL
    for j in range(1, m + 1):
        fwd[0][j] = j * _INDEL
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            fwd[i][j] = min(
                fwd[i - 1][j - 1] + _sub_cost(src[i - 1], hyp[j - 1], case_half_cost),
                fwd[i - 1][j] + _INDEL,
                fwd[i][j - 1] + _INDEL,
            )
    bwd = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        bwd[i][m] = (n - i) * _INDEL
    for j in range(m - 1, -1, -1):
        bwd[n][j] = (m - j) * _INDEL
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            bwd[i][j] = min(
                bwd[i + 1][j + 1] + _sub_cost(src[i], hyp[j], case_half_cost),
                bwd[i + 1][j] + _INDEL,
                bwd[i][j + 1] + _INDEL,
            )
    return Alignment(src, hyp, fwd, bwd, case_half_cost)


# --- edit lattice ---------------------------------------------------------

Node = tuple[int, int]


@dataclass
class EditLattice:
    """Edges between alignment states.

    ``edges[u]`` lists ``(v, edit)`` pairs; ``edit`` is ``None`` for a
    matched token. Every path from ``start`` to ``end`` that never places
    two insertions at the same source index is a valid hypothesis edit set.
    """

    alignment: Alignment
    nodes: list[Node]
    edges: dict[Node, list[tuple[Node, Optional[Edit]]]]

    @property
    def start(self) -> Node:
        return (0, 0)

    @property
    def end(self) -> Node:
        return (len(self.alignment.source), len(self.alignment.hypothesis))

    def paths(self) -> Iterable[tuple[Edit, ...]]:
        """Enumerate every edit set (exponential; for tests and tiny inputs)."""
        seen = set()

        def walk(u, acc, zero_at):
            if u == self.end:
                key = tuple(acc)
                if key not in seen:
                    seen.add(key)
                    yield key
                return
            for v, e in self.edges.get(u, ()):
                if e is None:
                    yield from walk(v, acc, None)
                elif e.start == e.end and zero_at == e.start:
                    continue
                else:
                    yield from walk(v, acc + [e], e.start if e.start == e.end else None)

        yield from walk(self.start, [], None)


def extract_edits(source: Sequence[str], hypothesis: Sequence[str],
                  max_merge_span: int = 4, case_half_cost: bool = True) -> EditLattice:
    """Build the lattice of candidate hypothesis edit sets."""
    al = align(source, hypothesis, case_half_cost)
    hyp = al.hypothesis
    n, m = len(al.source), len(hyp)
    nodes = [(i, j) for i in range(n + 1) for j in range(m + 1) if al.on_path(i, j)]
    edges: dict[Node, list[tuple[Node, Optional[Edit]]]] = {}
    for u in nodes:
        out: list[tuple[Node, Optional[Edit]]] = []
        reached: set[Node] = set()
        stack = []
        for kind, i, j in al.steps(*u):
            if kind == "match":
                out.append(((i, j), None))
            else:
                stack.append((i, j))
        while stack:
            v = stack.pop()
            if v in reached or v[0] - u[0] > max_merge_span:
                continue
            reached.add(v)
            stack.extend((i, j) for kind, i, j in al.steps(*v) if kind != "match")
        for v in sorted(reached):
            out.append((v, Edit(u[0], v[0], hyp[u[1]:v[1]])))
        edges[u] = out
    return EditLattice(al, nodes, edges)


# --- word order and detection ---------------------------------------------

def _hyp_span(path: list[Node], start: int, end: int) -> tuple[int, int]:
    js = min(j for i, j in path if i == start)
    je = max(j for i, j in path if i == end)
    return js, je


def _wo_positions(wo: Edit, nested: Sequence[Edit], source: Sequence[str]
                  ) -> list[tuple[set[str], Optional[Edit]]]:
    """Accepted tokens and owning nested edit for each corrected position."""
    # Rebuild the span with nested fixes applied, remembering each token's
    # original form when the fix was a one-to-one replacement.
    items: list[tuple[str, Optional[str], Optional[Edit]]] = []
    inserts = {e.start: e for e in nested if e.start == e.end}
    replaces = {e.start: e for e in nested if e.start < e.end}
    i = wo.start
    while True:
        if i in inserts:
            items.extend((c, None, inserts[i]) for c in inserts[i].correction)
        if i >= wo.end:
            break
        e = replaces.get(i)
        if e is not None:
            orig = source[i] if e.end - e.start == 1 and len(e.correction) == 1 else None
            items.extend((c, orig, e) for c in e.correction)
            i = e.end
        else:
            items.append((source[i], source[i], None))
            i += 1
    used = [False] * len(items)
    out = []
    for tok in wo.correction:
        ok, owner = {tok}, None
        for k, (text, orig, src_edit) in enumerate(items):
            if not used[k] and text == tok:
                used[k] = True
                owner = src_edit
                if orig is not None:
                    ok.add(orig)
                break
        out.append((ok, owner))
    return out


def _acceptable_forms(wo: Edit, nested: Sequence[Edit], source: Sequence[str]) -> list[set[str]]:
    return [ok for ok, _ in _wo_positions(wo, nested, source)]


def wo_segment_match(gold: Edit, nested: Sequence[Edit], source: Sequence[str],
                     segment: Sequence[str]) -> Optional[list[Edit]]:
    """Check one hypothesis segment against a word-order edit.

    Returns ``None`` when the order is not fixed, else the nested edits whose
    corrected forms also appear at their positions.
    """
    if len(segment) != len(gold.correction):
        return None
    positions = _wo_positions(gold, nested, source)
    if not all(tok in ok for tok, (ok, _) in zip(segment, positions)):
        return None
    wrong = {owner for tok, want, (_, owner) in zip(segment, gold.correction, positions)
             if owner is not None and tok != want}
    return [e for e in nested if e not in wrong]


def wo_match(gold: Edit, nested: Sequence[Edit], source: Sequence[str],
             alignment: Union[Alignment, list[Node]], hypothesis: Optional[Sequence[str]] = None) -> bool:
    """Whether the hypothesis fixes the order of a gold word-order edit.

    The segment aligned to the edit's span by the canonical alignment must
    hold, at each position, the gold token or its original
    (pre-nested-fix) form.
    """
    if isinstance(alignment, Alignment):
        path = alignment.canonical_path()
        hypothesis = alignment.hypothesis
    else:
        path = alignment
    js, je = _hyp_span(path, gold.start, gold.end)
    return wo_segment_match(gold, nested, source, tuple(hypothesis[js:je])) is not None


def detection_overlap(gold: Edit, hyp_edits: Iterable[Edit]) -> bool:
    """True iff some hypothesis edit touches the gold span.

    Non-empty spans must share a token; when either span is an insertion,
    meeting at a boundary index is enough.
    """
    for h in hyp_edits:
        if gold.start == gold.end or h.start == h.end:
            if h.start <= gold.end and gold.start <= h.end:
                return True
        elif max(gold.start, h.start) < min(gold.end, h.end):
            return True
    return False


# --- per-sentence matching --------------------------------------------------

@dataclass
class AnnotatorResult:
    annotator: int
    counts: Counts
    hyp_edits: tuple[Edit, ...]
    # (gold edit, corrected, detected) per gold edit
    gold: list[tuple[Edit, bool, bool]]


@dataclass(frozen=True)
class _Arc:
    target: Node
    edit: Optional[Edit]
    tp: int = 0
    fp: int = 0
    # gold edits this arc corrects
    hits: tuple[Edit, ...] = ()


def _search_arcs(lattice: EditLattice, gold: Sequence[Edit],
                 source: Sequence[str]) -> dict[Node, list[_Arc]]:
    """Lattice edges plus arcs that reproduce gold edits verbatim.

    Matched tokens may be taken anywhere in the grid, so a hypothesis that
    applies a gold edit in a non-minimal way can still be decomposed into
    that edit. Word-order edits become arcs over every acceptable segment.
    """
    hyp = lattice.alignment.hypothesis
    n, m = len(source), len(hyp)
    plain = [e for e in gold if not e.is_word_order]
    by_key = {e.key(): e for e in plain}
    arcs: dict[Node, list[_Arc]] = {}
    for i in range(n):
        for j in range(m):
            if source[i] == hyp[j]:
                arcs.setdefault((i, j), []).append(_Arc((i + 1, j + 1), None))
    for u, edges in lattice.edges.items():
        for v, e in edges:
            if e is None:
                continue
            g = by_key.get(e.key())
            arc = _Arc(v, e, 1, 0, (g,)) if g else _Arc(v, e, 0, 1)
            arcs.setdefault(u, []).append(arc)
    for g in plain:
        k = len(g.correction)
        for j in range(m - k + 1):
            if hyp[j:j + k] == g.correction:
                arcs.setdefault((g.start, j), []).append(
                    _Arc((g.end, j + k), Edit(g.start, g.end, g.correction), 1, 0, (g,)))
    for w in gold:
        if not w.is_word_order:
            continue
        nested = nested_edits(w, plain)
        k = len(w.correction)
        for j in range(m - k + 1):
            seg = hyp[j:j + k]
            ok = wo_segment_match(w, nested, source, seg)
            if ok is not None:
                arcs.setdefault((w.start, j), []).append(
                    _Arc((w.end, j + k), Edit(w.start, w.end, seg), 1 + len(ok), 0, (w, *ok)))
    return arcs


def best_path(arcs: dict[Node, list[_Arc]], end: Node) -> tuple[int, int, list[_Arc]]:
    """Path from (0, 0) to ``end`` maximising matches, then minimising misses.

    Two consecutive insertions at the same source index are not allowed.
    Returns (matches, unmatched edits, arcs taken).
    """
    # state: (node, index of an immediately preceding insertion or -1)
    best: dict[tuple[Node, int], tuple[tuple[int, int], Optional[tuple], Optional[_Arc]]] = {}
    best[((0, 0), -1)] = ((0, 0), None, None)
    for i in range(end[0] + 1):
        for j in range(end[1] + 1):
            u = (i, j)
            for z in (-1, i):
                st = (u, z)
                if st not in best:
                    continue
                score = best[st][0]
                for arc in arcs.get(u, ()):
                    e = arc.edit
                    zero = e is not None and e.start == e.end
                    if zero and z == e.start:
                        continue
                    nxt = (arc.target, e.start if zero else -1)
                    cand = (score[0] + arc.tp, score[1] - arc.fp)
                    if nxt not in best or cand > best[nxt][0]:
                        best[nxt] = (cand, st, arc)
    finals = [(best[(end, z)][0], (end, z)) for z in (-1, end[0]) if (end, z) in best]
    (tp, neg_fp), st = max(finals)
    taken = []
    while st is not None:
        _, prev, arc = best[st]
        if arc is not None and arc.edit is not None:
            taken.append(arc)
        st = prev
    return tp, -neg_fp, list(reversed(taken))


def score_annotator(sentence: AnnotatedSentence, annotator: int,
                    lattice: EditLattice) -> AnnotatorResult:
    gold = sentence.edits(annotator)
    arcs = _search_arcs(lattice, gold, sentence.source)
    tp, fp, taken = best_path(arcs, lattice.end)
    path = tuple(a.edit for a in taken)
    hits = {g for a in taken for g in a.hits}
    rows = []
    for e in gold:
        corrected = e in hits
        rows.append((e, corrected, corrected or detection_overlap(e, path)))
    return AnnotatorResult(annotator, Counts(tp, fp, len(gold) - tp), path, rows)


def sentence_candidates(sentence: AnnotatedSentence, hypothesis: Sequence[str],
                        max_merge_span: int = 4, case_half_cost: bool = True
                        ) -> list[AnnotatorResult]:
    """Per-annotator best matches for one sentence (the parallel phase)."""
    hyp = tuple(normalize(t) for t in hypothesis)
    lattice = extract_edits(sentence.source, hyp, max_merge_span, case_half_cost)
    annotators = sentence.annotators or [0]
    return [score_annotator(sentence, a, lattice) for a in annotators]


def choose(candidates: Sequence[AnnotatorResult], running: Counts,
           beta: Number = Fraction(1, 2), selection: str = "running") -> AnnotatorResult:
    best = None
    best_f = None
    for cand in sorted(candidates, key=lambda c: c.annotator):
        total = running + cand.counts if selection == "running" else cand.counts
        f = total.f(beta)
        if best is None or f > best_f:
            best, best_f = cand, f
    return best


def max_match_sentence(sentence: AnnotatedSentence, hypothesis: Sequence[str],
                       running: Counts = Counts(), beta: Number = Fraction(1, 2),
                       max_merge_span: int = 4, selection: str = "running"
                       ) -> tuple[int, Counts, dict[BaseLabel, tuple[int, int, int]]]:
    """Score one sentence; returns (annotator, counts, per-label tallies).

    Tallies map a base label to (gold edits, corrected, detected).
    """
    chosen = choose(sentence_candidates(sentence, hypothesis, max_merge_span),
                    running, beta, selection)
    return chosen.annotator, chosen.counts, _tally(chosen)


def _tally(result: AnnotatorResult) -> dict[BaseLabel, tuple[int, int, int]]:
    tallies: dict[BaseLabel, list[int]] = {}
    for e, corrected, detected in result.gold:
        for lab in base_components(e.label):
            row = tallies.setdefault(lab, [0, 0, 0])
            row[0] += 1
            row[1] += corrected
            row[2] += detected
    return {k: tuple(v) for k, v in tallies.items()}


# --- corpus level ----------------------------------------------------------

@dataclass
class SentenceScore:
    annotator: int
    counts: Counts


@dataclass
class ScoreReport:
    counts: Counts
    beta: float
    per_sentence: list[SentenceScore]
    label_totals: dict[BaseLabel, int] = field(default_factory=dict)
    label_corrected: dict[BaseLabel, int] = field(default_factory=dict)
    label_detected: dict[BaseLabel, int] = field(default_factory=dict)

    @property
    def precision(self) -> float:
        return float(self.counts.precision)

    @property
    def recall(self) -> float:
        return float(self.counts.recall)

    @property
    def f05(self) -> float:
        return float(self.counts.f(Fraction(self.beta).limit_denominator(1000)))

    @property
    def per_label_correction_recall(self) -> dict[BaseLabel, float]:
        return {k: self.label_corrected.get(k, 0) / n for k, n in self._labels()}

    @property
    def per_label_detection_recall(self) -> dict[BaseLabel, float]:
        return {k: self.label_detected.get(k, 0) / n for k, n in self._labels()}

    def _labels(self):
        return [(k, self.label_totals[k]) for k in BaseLabel if self.label_totals.get(k)]

    def to_kv(self) -> str:
        lines = [f"precision={self.precision:.4f}", f"recall={self.recall:.4f}",
                 f"f05={self.f05:.4f}"]
        lines += [f"recall[{k}]={v:.4f}" for k, v in self.per_label_correction_recall.items()]
        lines += [f"detection[{k}]={v:.4f}" for k, v in self.per_label_detection_recall.items()]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        c = self.counts
        out = [
            f"TP={c.tp} FP={c.fp} FN={c.fn}",
            f"Precision : {self.precision:.4f}",
            f"Recall    : {self.recall:.4f}",
            f"F_{self.beta:g}     : {self.f05:.4f}",
        ]
        rows = self._labels()
        if rows:
            out.append("")
            out.append(f"{'label':<13}{'gold':>6}{'corr':>6}{'det':>6}{'R(corr)':>9}{'R(det)':>9}")
            for k, n in rows:
                cor, det = self.label_corrected.get(k, 0), self.label_detected.get(k, 0)
                out.append(f"{k.value:<13}{n:>6}{cor:>6}{det:>6}{cor / n:>9.4f}{det / n:>9.4f}")
        return "\n".join(out) + "\n"


def _candidates_job(args, max_merge_span, case_half_cost):
    sent, hyp = args
    return sentence_candidates(sent, hyp, max_merge_span, case_half_cost)


class M2Scorer(BaseEstimator):
    """Corpus-level MaxMatch scorer.

    Parameters
    ----------
    beta : float
        Weight of recall relative to precision.
    max_merge_span : int
        Largest number of source tokens a merged hypothesis edit may cover.
    selection : {"running", "per-sentence"}
        Annotator choice against running corpus counts or per sentence.
    case_half_cost : bool
        Half-cost substitution between tokens equal up to case.
    n_jobs : int
        Worker processes for the alignment phase.
    """

    def __init__(self, beta=0.5, max_merge_span=4, selection="running",
                 case_half_cost=True, n_jobs=1):
        self.beta = beta
        self.max_merge_span = max_merge_span
        self.selection = selection
        self.case_half_cost = case_half_cost
        self.n_jobs = n_jobs

    def _check(self):
        if self.selection not in ("running", "per-sentence"):
            raise ValueError(f"unknown selection mode {self.selection!r}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.max_merge_span < 1:
            raise ValueError("max_merge_span must be at least 1")

    def score(self, gold: Corpus, hypotheses: Sequence[Sequence[str]]) -> ScoreReport:
        self._check()
        if len(gold) != len(hypotheses):
            raise ValueError(
                f"{len(hypotheses)} hypotheses for {len(gold)} gold sentences")
        job = partial(_candidates_job, max_merge_span=self.max_merge_span,
                      case_half_cost=self.case_half_cost)
        pairs = list(zip(gold, hypotheses))
        if self.n_jobs and self.n_jobs > 1 and len(pairs) > 1:
            with ProcessPoolExecutor(self.n_jobs) as pool:
                cands = list(pool.map(job, pairs, chunksize=64))
        else:
            cands = [job(p) for p in pairs]
        beta = Fraction(self.beta).limit_denominator(1000)
        running = Counts()
        per_sentence = []
        totals, corrected, detected = Counter(), Counter(), Counter()
        for options in cands:
            chosen = choose(options, running, beta, self.selection)
            running = running + chosen.counts
            per_sentence.append(SentenceScore(chosen.annotator, chosen.counts))
            for lab, (n, c, d) in _tally(chosen).items():
                totals[lab] += n
                corrected[lab] += c
                detected[lab] += d
        return ScoreReport(running, float(self.beta), per_sentence,
                           dict(totals), dict(corrected), dict(detected))


def score_corpus(gold: Corpus, hypotheses: Sequence[Sequence[str]], **params) -> ScoreReport:
    return M2Scorer(**params).score(gold, hypotheses)
