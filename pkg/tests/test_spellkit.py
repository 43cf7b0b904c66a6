import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from fixtures import desk_corpus, plant_typos
from oracles import brute_candidates, osa
from gecw.ngram_lm import train
from gecw.spellkit import (CandidateIndex, CorrectionPolicy, ReplacementList,
                           ReplacementListError, SpellCorrector, apply_replacement_list,
                           candidates, correct_sentence, deletes, is_protected,
                           load_replacement_list, osa_distance)

words = st.text(alphabet="abcõä", min_size=0, max_size=6)


@settings(max_examples=300)
@given(words, words)
def test_osa_matches_recursive_oracle(a, b):
    assert osa_distance(a, b) == osa(a, b)


def test_transposition_costs_one():
    assert osa_distance("kooli", "okoli") == 1
    assert osa_distance("ab", "ba") == 1


def test_deletes_include_the_word():
    assert deletes("abc", 1) == {"abc", "ab", "ac", "bc"}


def _named(index, found):
    return {(index.words[i], d) for i, d in found}


def test_candidate_examples():
    idx = CandidateIndex(["kooli", "kool", "kuul"])
    assert _named(idx, candidates("koli", idx, 1)) == {("kooli", 1)}
    # "kool" needs two edits from "koli"
    assert {("kooli", 1), ("kool", 2)} <= _named(idx, candidates("koli", idx, 2))
    assert ("kuul", 0) in _named(idx, idx.candidates("kuul", 2))
    assert candidates("xyz", idx, 1) == set()


@settings(max_examples=200, deadline=None)
@given(st.sets(words.filter(bool), min_size=1, max_size=40), words, st.sampled_from([1, 2]))
def test_candidates_match_brute_force(vocab, word, dist):
    idx = CandidateIndex(vocab)
    assert _named(idx, idx.candidates(word, dist)) == brute_candidates(word, vocab, dist)


def test_candidates_exhaustive_on_desk_vocab():
    vocab = sorted({w for s in desk_corpus(500, 3) for w in s})
    assert len(vocab) <= 500
    idx = CandidateIndex(vocab)
    rng = random.Random(0)
    probes = vocab + ["".join(rng.choice("aeiklmnostuõäü") for _ in range(rng.randint(1, 8)))
                      for _ in range(300)]
    for w in probes:
        for d in (1, 2):
            assert _named(idx, idx.candidates(w, d)) == brute_candidates(w, vocab, d)


def test_index_depth_is_enforced():
    with pytest.raises(ValueError):
        CandidateIndex(["a"], max_deletes=1).candidates("a", 2)


@pytest.mark.parametrize("token, pos, expected", [
    ("2023", 3, True), ("EKI", 2, True), ("Juta", 2, True), ("Juta", 0, False),
    ("läjen", 1, False), (",", 1, True), ("A", 1, True),
])
def test_protected_tokens(token, pos, expected):
    assert is_protected(token, pos) is expected


@pytest.fixture(scope="module")
def koju_model():
    return train([["ma", "lähen", "koju"], ["ta", "läheb", "koju"]] * 20, order=3)


def test_oov_typo_corrected(koju_model):
    idx = CandidateIndex(koju_model.words)
    out, applied = correct_sentence(["ma", "läjen", "koju"], koju_model, idx)
    assert out == ("ma", "lähen", "koju")
    assert [(r.position, r.source, r.target, r.distance) for r in applied] == \
        [(1, ("läjen",), ("lähen",), 1)]


def test_hand_scored_decision(koju_model):
    # the corrected form wins by a wide margin over the other vocabulary verb
    m = koju_model
    s_lahen = m.sentence_logprob(["ma", "lähen", "koju"]) - 4.0
    s_laheb = m.sentence_logprob(["ma", "läheb", "koju"]) - 8.0
    s_orig = m.sentence_logprob(["ma", "läjen", "koju"])
    assert s_lahen > max(s_laheb, s_orig)


def test_likely_in_vocab_sentence_unchanged(koju_model):
    idx = CandidateIndex(koju_model.words)
    assert correct_sentence(["ta", "läheb", "koju"], koju_model, idx)[1] == []


REAL_WORD = ([["väga", "hea"]] * 40 + [["väga", "hea", "ilm"]] * 20
             + [["ta", "on", "vaga", "mees"]] * 2)


def test_real_word_error():
    m = train(REAL_WORD, order=3)
    # the gain must clear the distance penalty plus the in-vocabulary margin
    gain = m.window_logprob(["väga", "hea"], 0) - m.window_logprob(["vaga", "hea"], 0)
    assert gain > 4.0 + 2.0
    assert correct_sentence(["vaga", "hea"], m, CandidateIndex(m.words))[0] == ("väga", "hea")


def test_infinite_margin_protects_vocab():
    m = train(REAL_WORD, order=3)
    idx = CandidateIndex(m.words)
    policy = CorrectionPolicy(margin=math.inf)
    assert correct_sentence(["vaga", "hea"], m, idx, policy)[0] == ("vaga", "hea")


def test_zero_distances_is_identity(koju_model):
    idx = CandidateIndex(koju_model.words)
    policy = CorrectionPolicy(max_edit_distance_oov=0, max_edit_distance_vocab=0)
    assert correct_sentence(["ma", "läjen", "koju"], koju_model, idx, policy)[0] == \
        ("ma", "läjen", "koju")


def test_protected_tokens_skipped(koju_model):
    idx = CandidateIndex(koju_model.words)
    assert correct_sentence(["ma", "Läjen", "koju"], koju_model, idx)[0][1] == "Läjen"
    off = CorrectionPolicy(protect=False)
    assert correct_sentence(["ma", "Läjen", "koju"], koju_model, idx, off)[0][1] == "lähen"


def test_never_corrects_into_punctuation():
    m = train([["a", "."], ["b", "."]] * 5, order=2)
    idx = CandidateIndex(m.words)
    assert correct_sentence(["x", "."], m, idx, CorrectionPolicy(max_length_ratio=1.0))[0][0] != "."


def test_unigram_model_rejected():
    m = train([["a"]], order=1)
    with pytest.raises(ValueError):
        correct_sentence(["a"], m, CandidateIndex(m.words))


def test_policy_rejects_negative_values():
    with pytest.raises(ValueError):
        CorrectionPolicy(margin=-1)


@pytest.fixture(scope="module")
def desk_corrector():
    return SpellCorrector().fit(desk_corpus(2000, 1))


def test_correction_is_idempotent(desk_corrector):
    noisy, _ = plant_typos(desk_corpus(120, 4), 60, seed=4)
    once = desk_corrector.transform(noisy)
    assert desk_corrector.transform(once) == once


def test_planted_typos_recovered(desk_corrector):
    clean = desk_corpus(100, 5)
    noisy, planted = plant_typos(clean, 25, seed=5)
    out = desk_corrector.transform(noisy)
    fixed = sum(out[s][t] == clean[s][t] for s, t in planted)
    assert fixed / len(planted) >= 0.9
    assert all(out[s][t] == clean[s][t] for s in range(len(clean))
               for t in range(len(clean[s])) if (s, t) not in planted)


# --- replacement lists ------------------------------------------------------

def test_load_one_to_many():
    rl = load_replacement_list("# comment\nkuidagimoodi\tkuidagi moodi\n")
    assert rl.entries == {("kuidagimoodi",): ("kuidagi", "moodi")}


def test_duplicate_key_warns_and_last_wins(caplog):
    rl = load_replacement_list("a\tb\na\tc\n")
    assert rl.entries == {("a",): ("c",)}
    assert "duplicate" in caplog.text


def test_extra_tabs_rejected_with_line_number():
    with pytest.raises(ReplacementListError, match="line 2"):
        load_replacement_list("a\tb\nx\ty\tz\tw\n")


def test_empty_source_rejected():
    with pytest.raises(ReplacementListError):
        load_replacement_list(" \tb\n")


@pytest.mark.parametrize("entries, tokens, expected", [
    ({("a",): ("b",)}, ["a", "a"], ("b", "b")),
    ({("a", "b"): ("c",)}, ["x", "a", "b"], ("x", "c")),
    ({("a",): ("b",), ("b",): ("c",)}, ["a"], ("b",)),
    ({("a",): ("x",), ("a", "b"): ("y",)}, ["a", "b", "a"], ("y", "x")),
])
def test_apply_examples(entries, tokens, expected):
    assert apply_replacement_list(tokens, ReplacementList(entries)) == expected


@settings(max_examples=200)
@given(st.dictionaries(st.lists(st.sampled_from("abc"), min_size=1, max_size=3).map(tuple),
                       st.lists(st.sampled_from("xyz"), max_size=3).map(tuple), max_size=5),
       st.lists(st.sampled_from("abc"), max_size=10))
def test_length_bookkeeping(entries, tokens):
    rl = ReplacementList(entries)
    out, edits = rl.apply_with_edits(tokens)
    assert len(out) == len(tokens) + sum(len(e.correction) - (e.end - e.start) for e in edits)


def test_list_applied_before_statistics(koju_model):
    rl = ReplacementList({("mna",): ("ma",)})
    sc = SpellCorrector.from_model(koju_model, replacements=rl)
    assert sc.correct(["mna", "läjen", "koju"])[0] == ("ma", "lähen", "koju")


def test_estimator_params_round_trip():
    sc = SpellCorrector(margin=3.0)
    assert sc.get_params()["margin"] == 3.0
    assert sc.set_params(margin=1.0).policy.margin == 1.0
