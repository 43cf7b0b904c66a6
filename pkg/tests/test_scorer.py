import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from fixtures import random_fixture
from oracles import brute_corpus, brute_counts, edit_sets
from gecw.corpusio import AnnotatedSentence, Edit, apply_edits, parse_m2
from gecw.scorer import (Counts, M2Scorer, detection_overlap, extract_edits, f_beta,
                         max_match_sentence, score_corpus, sentence_candidates, wo_match, align)
from gecw.taxonomy import BaseLabel, parse_label

VF = parse_label("R:VERB-FORM")
WO = parse_label("R:WO")


@pytest.mark.parametrize("p, r, f", [
    (0.7192, 0.5544, 0.6788),
    (0.5891, 0.0766, 0.2519),
])
def test_f_beta_table_values(p, r, f):
    assert f_beta(p, r, 0.5) == pytest.approx(f, abs=5e-4)


def test_f_beta_edge_cases():
    assert f_beta(1.0, 1.0, 0.5) == 1.0
    assert f_beta(0, 0, 0.5) == 0
    assert f_beta(Fraction(2, 3), Fraction(2, 3), Fraction(1, 2)) == Fraction(2, 3)


@settings(max_examples=300)
@given(st.fractions(0, 1), st.fractions(0, 1))
def test_f_beta_favours_precision(p, r):
    if p > r > 0:
        assert f_beta(p, r, Fraction(1, 2)) > f_beta(r, p, Fraction(1, 2))


def _edit_keys(es):
    return {tuple(e.key() for e in path) for path in es}


def test_extract_single_substitution():
    lat = extract_edits(("ta", "lähen"), ("ta", "läheb"))
    assert _edit_keys(lat.paths()) == {((1, 2, ("läheb",)),)}


def test_extract_identity():
    assert list(extract_edits(("a", "b"), ("a", "b")).paths()) == [()]


def test_extract_merged_and_split_against_enumeration():
    src, hyp = ("a", "b", "c"), ("a", "x", "y", "c")
    lattice = _edit_keys(extract_edits(src, hyp).paths())
    assert lattice == edit_sets(src, hyp)
    assert ((1, 2, ("x", "y")),) in lattice
    assert ((1, 1, ("x",)), (1, 2, ("y",))) in lattice
    assert ((1, 2, ("x",)), (2, 2, ("y",))) in lattice


def test_merge_span_limits_merged_edits():
    src, hyp = ("a", "b", "c", "d"), ("w", "x", "y", "z")
    spans = {e.end - e.start for path in extract_edits(src, hyp, max_merge_span=2).paths()
             for e in path}
    assert max(spans) == 2


def test_case_only_difference_is_cheaper():
    al = align(("Ma", "lähen"), ("ma", "lähen"))
    assert al.cost == 1  # half of a substitution, in doubled units


def _sent(source, *annotators):
    return AnnotatedSentence(tuple(source), {a: tuple(es) for a, es in enumerate(annotators)})


def test_exact_match():
    s = _sent(["ta", "lähen"], [Edit(1, 2, ("läheb",), VF)])
    a, c, tallies = max_match_sentence(s, ("ta", "läheb"))
    assert (a, c) == (0, Counts(1, 0, 0))
    assert tallies == {BaseLabel.R_VERB_FORM: (1, 1, 1)}


def test_no_change_baseline_sentence():
    s = _sent(["ta", "lähen"], [Edit(1, 2, ("läheb",), VF)])
    _, c, _ = max_match_sentence(s, ("ta", "lähen"))
    assert c == Counts(0, 0, 1)
    assert c.precision == 1 and c.recall == 0


def test_annotator_choice():
    src = ["a", "b", "c"]
    ann0 = [Edit(0, 1, ("x",), VF), Edit(2, 3, ("q",), VF)]
    ann1 = [Edit(0, 1, ("x",), VF), Edit(2, 3, ("z",), VF)]
    s = _sent(src, ann0, ann1)
    hyp = ("x", "b", "z")
    a, c, _ = max_match_sentence(s, hyp)
    assert a == 1 and c == Counts(2, 0, 0)
    # ties go to the lower id
    a, _, _ = max_match_sentence(_sent(src, ann1, ann1), hyp)
    assert a == 0


WO_SENT = _sent(["kooli", "ma", "lähen"],
                [Edit(0, 3, ("ma", "läksin", "kooli"), WO), Edit(2, 3, ("läksin",), VF)])


def test_wo_match_examples():
    gold = Edit(0, 3, ("ma", "lähen", "kooli"), WO)
    src = ("kooli", "ma", "lähen")
    hyp = ("ma", "lähen", "kooli")
    assert wo_match(gold, [], src, align(src, hyp))
    nested = [Edit(2, 3, ("läksin",), VF)]
    gold_n = Edit(0, 3, ("ma", "läksin", "kooli"), WO)
    h2 = ("kooli", "ma", "läksin")
    assert not wo_match(gold_n, nested, src, align(src, h2))
    assert not wo_match(gold_n, nested, src, align(src, src))


def test_repeated_token_order_is_already_fixed():
    # without its nested fix, reordering "ma ma" changes nothing, so the
    # untouched source holds an original at every position
    src = ("ma", "ma")
    nested = Edit(1, 2, ("ta",), VF)
    sent = AnnotatedSentence(src, {0: (Edit(0, 2, ("ta", "ma"), WO), nested)})
    assert max_match_sentence(sent, src)[1] == Counts(1, 0, 1)


def test_word_order_fixed_form_not():
    a, c, t = max_match_sentence(WO_SENT, ("ma", "lähen", "kooli"))
    assert c == Counts(1, 0, 1)
    assert t[BaseLabel.R_WO] == (1, 1, 1) and t[BaseLabel.R_VERB_FORM] == (1, 0, 1)


def test_form_fixed_order_not():
    _, c, t = max_match_sentence(WO_SENT, ("kooli", "ma", "läksin"))
    assert c == Counts(1, 0, 1)
    assert t[BaseLabel.R_VERB_FORM] == (1, 1, 1) and t[BaseLabel.R_WO][1] == 0


def test_both_fixed():
    _, c, _ = max_match_sentence(WO_SENT, ("ma", "läksin", "kooli"))
    assert c == Counts(2, 0, 0)


@pytest.mark.parametrize("gold, hyp, expected", [
    (Edit(1, 2), [Edit(1, 2, ("q",))], True),
    (Edit(1, 2), [Edit(4, 5)], False),
    (Edit(2, 2, ("x",)), [Edit(2, 2, ("y",))], True),
    (Edit(2, 2, ("x",)), [Edit(1, 2)], True),
    (Edit(1, 2), [Edit(2, 3)], False),
])
def test_detection_overlap(gold, hyp, expected):
    assert detection_overlap(gold, hyp) is expected


def test_self_scoring():
    rng = random.Random(3)
    gold = [random_fixture(rng)[0] for _ in range(60)]
    hyps = [apply_edits(s.source, s.edits(0)) for s in gold]
    r = score_corpus(gold, hyps)
    assert (r.precision, r.recall, r.f05) == (1.0, 1.0, 1.0)


def test_unchanged_sources():
    text = ("S a b c\nA 0 1|||R:LEX|||x|||REQUIRED|||-NONE-|||0\n\n"
            "S d e\nA 1 2|||R:SPELL|||f|||REQUIRED|||-NONE-|||0\n")
    gold = parse_m2(text)
    r = score_corpus(gold, [s.source for s in gold])
    assert (r.precision, r.recall, r.f05) == (1.0, 0.0, 0.0)


def test_hand_computed_corpus():
    # sentence 1: one correct fix; sentence 2: one correct fix plus one spurious
    # change; sentence 3: the gold edit is missed -> TP=2, FP=1, FN=1
    text = ("S a b\nA 0 1|||R:LEX|||x|||REQUIRED|||-NONE-|||0\n\n"
            "S c d e\nA 2 3|||R:SPELL|||f|||REQUIRED|||-NONE-|||0\n\n"
            "S g h\nA 1 2|||R:LEX|||i|||REQUIRED|||-NONE-|||0\n")
    gold = parse_m2(text)
    r = score_corpus(gold, [("x", "b"), ("z", "d", "f"), ("g", "h")])
    assert r.counts == Counts(2, 1, 1)
    assert r.precision == pytest.approx(2 / 3) and r.recall == pytest.approx(2 / 3)
    assert r.f05 == pytest.approx(2 / 3)


def test_length_mismatch_fails_early():
    gold = parse_m2("S a\nA 0 1|||R:LEX|||b|||REQUIRED|||-NONE-|||0\n")
    with pytest.raises(ValueError):
        score_corpus(gold, [])


def test_report_formats():
    gold = [WO_SENT]
    r = score_corpus(gold, [("kooli", "ma", "läksin")])
    kv = r.to_kv()
    assert kv.startswith("precision=1.0000\nrecall=0.5000\nf05=0.8333\n")
    assert "recall[R:WO]=0.0000" in kv and "recall[R:VERB-FORM]=1.0000" in kv
    assert "R:VERB-FORM" in r.to_table()


def test_totals_equal_sum_of_sentences():
    rng = random.Random(11)
    pairs = [random_fixture(rng) for _ in range(80)]
    r = score_corpus([p[0] for p in pairs], [p[1] for p in pairs])
    total = Counts()
    for s in r.per_sentence:
        total = total + s.counts
    assert total == r.counts


def test_per_sentence_selection_flag():
    rng = random.Random(5)
    pairs = [random_fixture(rng) for _ in range(40)]
    gold, hyps = [p[0] for p in pairs], [p[1] for p in pairs]
    a = M2Scorer(selection="per-sentence").score(gold, hyps)
    b = M2Scorer().score(gold, hyps)
    assert a.counts.tp + a.counts.fn == sum(
        len(g.edits(s.annotator)) for g, s in zip(gold, a.per_sentence))
    assert b.f05 >= 0
    with pytest.raises(ValueError):
        M2Scorer(selection="best").score(gold, hyps)


def test_parallel_matches_serial():
    rng = random.Random(8)
    pairs = [random_fixture(rng) for _ in range(50)]
    gold, hyps = [p[0] for p in pairs], [p[1] for p in pairs]
    assert M2Scorer(n_jobs=2).score(gold, hyps).counts == M2Scorer().score(gold, hyps).counts


def test_lattice_equals_brute_force_sample():
    rng = random.Random(1234)
    for _ in range(150):
        sent, hyp = random_fixture(rng)
        for res in sentence_candidates(sent, hyp):
            assert res.counts == brute_counts(sent, res.annotator, hyp)


@settings(max_examples=150, deadline=None)
@given(st.randoms(use_true_random=False))
def test_correction_recall_never_exceeds_detection(rnd):
    pairs = [random_fixture(rnd) for _ in range(5)]
    r = score_corpus([p[0] for p in pairs], [p[1] for p in pairs])
    for lab, rec in r.per_label_correction_recall.items():
        assert rec <= r.per_label_detection_recall[lab]


@settings(max_examples=100, deadline=None)
@given(st.randoms(use_true_random=False))
def test_matching_a_gold_edit_never_hurts(rnd):
    sent, _ = random_fixture(rnd, allow_wo=False)
    edits = sent.edits(0)
    if not edits:
        return
    gold = [AnnotatedSentence(sent.source, {0: edits})]
    k = rnd.randrange(len(edits))
    partial = apply_edits(sent.source, [e for i, e in enumerate(edits) if i != k])
    full = apply_edits(sent.source, edits)
    assert score_corpus(gold, [full]).f05 >= score_corpus(gold, [partial]).f05


def test_brute_corpus_agrees_on_selection():
    rng = random.Random(99)
    pairs = [random_fixture(rng) for _ in range(60)]
    gold, hyps = [p[0] for p in pairs], [p[1] for p in pairs]
    total, chosen = brute_corpus(gold, hyps)
    r = score_corpus(gold, hyps)
    assert r.counts == total
    assert [(s.annotator, s.counts) for s in r.per_sentence] == chosen
