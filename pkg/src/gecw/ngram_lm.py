"""Interpolated additive-smoothing n-gram language model.

Counts are exact integers; probabilities are computed on demand as

    P(w | h) = sum_n lambda_n * (c(h_n, w) + delta) / (c(h_n) + delta * |V|)

where ``h_n`` is the last ``n - 1`` tokens of the history, ``c(h_n)`` is the
number of times ``h_n`` was followed by any token, and ``V`` is the set of
predictable types: the training words plus the end sentinel and ``<unk>``.
"""

from __future__ import annotations

import hashlib
import io
import math
import struct
from collections import Counter, defaultdict
from typing import BinaryIO, Iterable, Optional, Sequence, Union

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_sentences

UNK, BOS, EOS = "<unk>", "<s>", "</s>"
UNK_ID, BOS_ID, EOS_ID = 0, 1, 2
RESERVED = (UNK, BOS, EOS)

MAGIC = b"ETLM"
VERSION = 1
MAX_ORDER = 5
DEFAULT_DELTA = 0.01


class ModelFormatError(ValueError):
    pass


def default_weights(order: int) -> tuple[float, ...]:
    if order == 3:
        return (0.1, 0.3, 0.6)
    return tuple([1.0 / order] * order)


class NGramModel(BaseEstimator):
    """n-gram model over token sequences (words or POS tags).

    Parameters
    ----------
    order : int
        Highest n-gram order, 1 to 5.
    weights : sequence of float, optional
        Interpolation weights for orders 1..order. Defaults to
        ``(0.1, 0.3, 0.6)`` for trigrams, uniform otherwise.
    delta : float
        Additive smoothing constant.
    hapax_unk : bool
        Map tokens seen once in training to ``<unk>``.
    """

    def __init__(self, order=3, weights=None, delta=DEFAULT_DELTA, hapax_unk=False):
        self.order = order
        self.weights = weights
        self.delta = delta
        self.hapax_unk = hapax_unk

    # --- training ---------------------------------------------------------

    def fit(self, X, y=None):
        if not 1 <= self.order <= MAX_ORDER:
            raise ValueError(f"order must be in [1, {MAX_ORDER}], got {self.order}")
        sentences = check_sentences(X)
        if not any(sentences):
            raise ValueError("training data has no non-empty sentence")
        weights = tuple(float(w) for w in (self.weights or default_weights(self.order)))
        if len(weights) != self.order or abs(sum(weights) - 1.0) > 1e-9 or min(weights) < 0:
            raise ValueError("weights must be one non-negative value per order summing to 1")

        freq = Counter(t for s in sentences for t in s)
        if self.hapax_unk:
            keep = sorted(t for t, c in freq.items() if c > 1 and t not in RESERVED)
        else:
            keep = sorted(t for t in freq if t not in RESERVED)
        vocab = {tok: i for i, tok in enumerate(RESERVED + tuple(keep))}

        k = self.order
        counts = [Counter() for _ in range(k)]
        for sent in sentences:
            ids = [BOS_ID] * (k - 1) + [vocab.get(t, UNK_ID) for t in sent] + [EOS_ID]
            for n in range(1, k + 1):
                table = counts[n - 1]
                for p in range(len(ids) - n + 1):
                    table[tuple(ids[p:p + n])] += 1
        self._set_state(vocab, [dict(c) for c in counts], weights)
        return self

    def _set_state(self, vocab, counts, weights):
        self.vocab_ = vocab
        self.id_to_token_ = [None] * len(vocab)
        for tok, i in vocab.items():
            self.id_to_token_[i] = tok
        self.counts_ = counts
        self.weights_ = tuple(weights)
        self.total_tokens_ = sum(counts[0].values())
        # history totals: how often each (n-1)-gram was followed by a token
        ctx = [defaultdict(int) for _ in range(len(counts))]
        for n, table in enumerate(counts, start=1):
            for gram, c in table.items():
                if gram[-1] != BOS_ID:
                    ctx[n - 1][gram[:-1]] += c
        self.context_totals_ = [dict(c) for c in ctx]
        # predictable types: everything but the begin sentinel
        self.n_outcomes_ = len(vocab) - 1

    # --- queries ----------------------------------------------------------

    def token_id(self, token: str) -> int:
        return self.vocab_.get(token, UNK_ID)

    def __contains__(self, token: str) -> bool:
        check_is_fitted(self, "vocab_")
        return token in self.vocab_ and token not in RESERVED

    @property
    def words(self) -> list[str]:
        return self.id_to_token_[len(RESERVED):]

    def count(self, gram: Sequence[str]) -> int:
        ids = tuple(self.token_id(t) if t not in (BOS, EOS) else self.vocab_[t] for t in gram)
        return self.counts_[len(ids) - 1].get(ids, 0)

    def _history(self, context: Sequence[str]) -> list[int]:
        k = self.order
        ids = [self.vocab_[t] if t in (BOS, EOS) else self.token_id(t) for t in context]
        ids = ids[len(ids) - (k - 1):] if k > 1 else []
        return [BOS_ID] * (k - 1 - len(ids)) + ids

    def prob_ids(self, history: Sequence[int], wid: int) -> float:
        d = self.delta
        v = self.n_outcomes_
        total = 0.0
        k = self.order
        for n in range(1, k + 1):
            lam = self.weights_[n - 1]
            if lam == 0.0:
                continue
            h = tuple(history[k - n:]) if n > 1 else ()
            c = self.counts_[n - 1].get(h + (wid,), 0)
            ch = self.context_totals_[n - 1].get(h, 0)
            total += lam * (c + d) / (ch + d * v)
        return total

    def prob(self, context: Sequence[str], token: str) -> float:
        """Probability of ``token`` after ``context``.

        A context shorter than ``order - 1`` is taken to start the sentence
        and is left-padded with the begin sentinel.
        """
        check_is_fitted(self, "vocab_")
        if len(context) > self.order - 1 and self.order > 1:
            context = context[len(context) - (self.order - 1):]
        elif self.order == 1:
            context = ()
        wid = EOS_ID if token == EOS else self.token_id(token)
        return self.prob_ids(self._history(context), wid)

    def sentence_logprob(self, tokens: Sequence[str]) -> float:
        """Natural-log probability of the sentence including its end sentinel."""
        check_is_fitted(self, "vocab_")
        k = self.order
        ids = [BOS_ID] * (k - 1) + [self.token_id(t) for t in tokens] + [EOS_ID]
        return sum(math.log(self.prob_ids(ids[p - k + 1:p], ids[p]))
                   for p in range(k - 1, len(ids)))

    def window_logprob(self, tokens: Sequence[str], position: int) -> float:
        """Log-probability of the terms a token at ``position`` takes part in.

        Differences of this quantity between two fillers of ``position``
        equal the differences of their full sentence log-probabilities.
        """
        k = self.order
        ids = [BOS_ID] * (k - 1) + [self.token_id(t) for t in tokens] + [EOS_ID]
        p0 = position + k - 1
        last = min(p0 + k - 1, len(ids) - 1)
        return sum(math.log(self.prob_ids(ids[p - k + 1:p], ids[p]))
                   for p in range(p0, last + 1))

    def score(self, X, y=None) -> float:
        """Mean per-token log-probability over ``X``."""
        sentences = check_sentences(X)
        total = sum(self.sentence_logprob(s) for s in sentences)
        return total / sum(len(s) + 1 for s in sentences)

    # --- persistence ------------------------------------------------------

    def to_bytes(self) -> bytes:
        check_is_fitted(self, "vocab_")
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<IB", VERSION, self.order))
        buf.write(struct.pack(f"<{self.order}d", *self.weights_))
        buf.write(struct.pack("<I", len(self.id_to_token_)))
        for tok in self.id_to_token_:
            raw = tok.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
        for n, table in enumerate(self.counts_, start=1):
            buf.write(struct.pack("<Q", len(table)))
            fmt = f"<{n}IQ"
            for gram in sorted(table):
                buf.write(struct.pack(fmt, *gram, table[gram]))
        body = buf.getvalue()
        return body + _checksum(body)

    def save(self, sink: Union[str, BinaryIO]) -> None:
        data = self.to_bytes()
        if isinstance(sink, (str, bytes)) or hasattr(sink, "__fspath__"):
            with open(sink, "wb") as fh:
                fh.write(data)
        else:
            sink.write(data)

    @classmethod
    def from_bytes(cls, data: bytes, delta: float = DEFAULT_DELTA) -> "NGramModel":
        if len(data) < len(MAGIC) + 8 or data[:4] != MAGIC:
            raise ModelFormatError("not an ETLM model file (bad magic)")
        if len(data) >= 9:
            version = struct.unpack_from("<I", data, 4)[0]
            if version != VERSION:
                raise ModelFormatError(f"unsupported model version {version}")
        body, tail = data[:-8], data[-8:]
        if _checksum(body) != tail:
            raise ModelFormatError("checksum mismatch (truncated or corrupted file)")
        try:
            return cls._parse_body(body, delta)
        except struct.error as exc:
            raise ModelFormatError(f"corrupted model body: {exc}") from None

    @classmethod
    def _parse_body(cls, body: bytes, delta: float) -> "NGramModel":
        off = 4
        _, order = struct.unpack_from("<IB", body, off)
        off += 5
        weights = struct.unpack_from(f"<{order}d", body, off)
        off += 8 * order
        (nvocab,) = struct.unpack_from("<I", body, off)
        off += 4
        tokens = []
        for _ in range(nvocab):
            (ln,) = struct.unpack_from("<I", body, off)
            off += 4
            tokens.append(body[off:off + ln].decode("utf-8"))
            off += ln
        counts = []
        for n in range(1, order + 1):
            (size,) = struct.unpack_from("<Q", body, off)
            off += 8
            fmt = f"<{n}IQ"
            step = struct.calcsize(fmt)
            table = {}
            for rec in struct.iter_unpack(fmt, body[off:off + size * step]):
                table[tuple(rec[:n])] = rec[n]
            if len(table) != size:
                raise ModelFormatError("count table shorter than declared")
            off += size * step
            counts.append(table)
        if off != len(body):
            raise ModelFormatError("trailing bytes after count tables")
        model = cls(order=order, weights=tuple(weights), delta=delta)
        model._set_state({t: i for i, t in enumerate(tokens)}, counts, weights)
        return model

    @classmethod
    def load(cls, source: Union[str, BinaryIO], delta: float = DEFAULT_DELTA) -> "NGramModel":
        if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
            with open(source, "rb") as fh:
                data = fh.read()
        else:
            data = source.read()
        return cls.from_bytes(data, delta)

    def __eq__(self, other):
        if not isinstance(other, NGramModel):
            return NotImplemented
        fitted = hasattr(self, "vocab_"), hasattr(other, "vocab_")
        if fitted != (True, True):
            return fitted == (False, False) and self.get_params() == other.get_params()
        return (self.order == other.order and self.weights_ == other.weights_
                and self.id_to_token_ == other.id_to_token_ and self.counts_ == other.counts_)

    __hash__ = None


def _checksum(body: bytes) -> bytes:
    return hashlib.blake2b(body, digest_size=8).digest()


def train(sentences: Iterable[Sequence[str]], order: int = 3, **params) -> NGramModel:
    return NGramModel(order=order, **params).fit(list(sentences))


def save(model: NGramModel, sink) -> None:
    model.save(sink)


def load(source, delta: float = DEFAULT_DELTA) -> NGramModel:
    return NGramModel.load(source, delta)


def normalization_error(model: NGramModel, context: Sequence[str]) -> float:
    """|1 - sum of P(w | context)| over every predictable type."""
    hist = model._history(list(context)[-(model.order - 1):] if model.order > 1 else [])
    ids = [i for i in range(len(model.vocab_)) if i != BOS_ID]
    return abs(1.0 - math.fsum(model.prob_ids(hist, i) for i in ids))
