"""Random and hand-built test data."""

from __future__ import annotations

import random

from gecw.corpusio import AnnotatedSentence, Edit, apply_edits
from gecw.taxonomy import BaseLabel, ErrorLabel

WORDS = ["ma", "Ma", "lähen", "läksin", "kooli", "koju", "ta", "ja", "."]
PLAIN_LABELS = [ErrorLabel((b,)) for b in (BaseLabel.R_SPELL, BaseLabel.R_LEX,
                                           BaseLabel.R_VERB_FORM, BaseLabel.M_WORD,
                                           BaseLabel.U_WORD)]
WO = ErrorLabel((BaseLabel.R_WO,))


def _random_edits(rng: random.Random, source, max_edits=3, allow_wo=True):
    n = len(source)
    edits = []
    taken = []
    if allow_wo and n >= 2 and rng.random() < 0.25:
        s = rng.randrange(0, n - 1)
        e = rng.randrange(s + 2, min(n, s + 3) + 1)
        corr = list(source[s:e])
        rng.shuffle(corr)
        if corr == list(source[s:e]):
            corr.reverse()
        wo = Edit(s, e, tuple(corr), WO)
        # optional nested one-token fix; the word-order correction carries it
        if rng.random() < 0.5:
            k = rng.randrange(s, e)
            new = rng.choice(WORDS)
            if new != source[k]:
                nested = Edit(k, k + 1, (new,), PLAIN_LABELS[2])
                pos = corr.index(source[k])
                corr[pos] = new
                wo = Edit(s, e, tuple(corr), WO)
                edits.append(nested)
        edits.append(wo)
        taken.append((s, e))
    for _ in range(rng.randint(0, max_edits - len(edits))):
        s = rng.randrange(0, n + 1)
        e = min(n, s + rng.choice([0, 1, 1, 2]))
        if any((a < e and s < b) or (s == e and a <= s <= b) or (a == b and s <= a <= e)
               for a, b in taken):
            continue
        corr = tuple(rng.choice(WORDS) for _ in range(rng.choice([0, 1, 1, 2])))
        if s == e and not corr:
            continue
        if tuple(source[s:e]) == corr:
            continue
        edits.append(Edit(s, e, corr, rng.choice(PLAIN_LABELS)))
        taken.append((s, e))
    return tuple(sorted(edits, key=lambda x: (x.start, x.end)))


def random_fixture(rng: random.Random, max_len=8, max_annotators=2, allow_wo=True):
    """A gold sentence and a hypothesis near one of its corrections."""
    n = rng.randint(1, max_len)
    source = tuple(rng.choice(WORDS) for _ in range(n))
    ann = {}
    for a in range(rng.randint(1, max_annotators)):
        ann[a] = tuple(Edit(e.start, e.end, e.correction, e.label, a)
                       for e in _random_edits(rng, source, allow_wo=allow_wo))
    sent = AnnotatedSentence(source, ann)
    mode = rng.random()
    if mode < 0.4:
        a = rng.choice(list(ann))
        keep = [e for e in ann[a] if rng.random() < 0.7]
        hyp = apply_edits(source, keep)
    elif mode < 0.8:
        hyp = list(source)
        for _ in range(rng.randint(1, 2)):
            op = rng.random()
            k = rng.randrange(0, len(hyp) + 1)
            if op < 0.4 and k < len(hyp):
                hyp[k] = rng.choice(WORDS)
            elif op < 0.7:
                hyp.insert(k, rng.choice(WORDS))
            elif hyp and k < len(hyp):
                del hyp[k]
        hyp = tuple(hyp)
    else:
        hyp = source
    return sent, tuple(hyp[:10])


# --- desk corpus for the spelling corrector ------------------------------------

SUBJECT_VERBS = [
    ("ma", ["lähen", "tulen", "sõidan", "jooksen"]),
    ("sa", ["lähed", "tuled", "sõidad", "jooksed"]),
    ("ta", ["läheb", "tuleb", "sõidab", "jookseb"]),
    ("me", ["läheme", "tuleme", "sõidame", "jookseme"]),
    ("te", ["lähete", "tulete", "sõidate", "jooksete"]),
    ("nad", ["lähevad", "tulevad", "sõidavad", "jooksevad"]),
]
READERS = [("ma", "loen"), ("sa", "loed"), ("ta", "loeb"), ("me", "loeme"),
           ("te", "loete"), ("nad", "loevad")]
TIMES = ["täna", "homme", "eile", "jälle", "varsti", "hommikul", "õhtul"]
PLACES = ["kooli", "koju", "tööle", "poodi", "linna", "randa", "metsa", "turule", "maale"]
OBJECTS = ["raamatut", "ajalehte", "kirja", "luuletust", "ajakirja", "juttu"]
ADJ = ["huvitavat", "pikka", "lühikest", "vana", "uut", "ilusat"]


def desk_sentence(rng: random.Random):
    if rng.random() < 0.6:
        subj, verbs = rng.choice(SUBJECT_VERBS)
        return (subj, rng.choice(verbs), rng.choice(TIMES), rng.choice(PLACES), ".")
    subj, verb = rng.choice(READERS)
    return (subj, rng.choice(TIMES), verb, rng.choice(ADJ), rng.choice(OBJECTS), ".")


def desk_corpus(n: int, seed: int):
    rng = random.Random(seed)
    return [desk_sentence(rng) for _ in range(n)]


def plant_typos(sentences, n_typos: int, seed: int):
    """Plant distance-1 typos with the noiser's character operations.

    At most one typo per sentence, only in words of four or more letters so
    the damaged form stays within the corrector's length guard. Returns the
    noisy sentences and a {(sentence, position): typo} map.
    """
    from gecw.spellkit import osa_distance
    from gecw.synth import NoiseProfile, corrupt_word, substream

    profile = NoiseProfile(char_delete=0.04, char_insert=0.04, char_transpose=0.04,
                           char_alphabet={c: 1 for c in "abdeghijklmnoprstuvõäöü"})
    rng = random.Random(seed)
    slots = [(s, t) for s, sent in enumerate(sentences)
             for t, w in enumerate(sent) if len(w) >= 4 and w.isalpha()]
    rng.shuffle(slots)
    planted = {}
    used = set()
    for s, t in slots:
        if s in used:
            continue
        word = sentences[s][t]
        for attempt in range(10_000):
            typo = corrupt_word(word, substream(seed, len(planted) * 10_000 + attempt), profile)
            if osa_distance(word, typo) == 1:
                break
        else:
            continue
        planted[(s, t)] = typo
        used.add(s)
        if len(planted) == n_typos:
            break
    noisy = [tuple(planted.get((s, t), w) for t, w in enumerate(sent))
             for s, sent in enumerate(sentences)]
    return noisy, planted
