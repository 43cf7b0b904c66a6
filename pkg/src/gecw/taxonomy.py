"""Error labels for Estonian M2 annotation.

Twelve base codes; replacement-family codes may combine into compound
labels joined by ``+`` (for instance ``R:SPELL+R:NOM-FORM``).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, TextIO

logger = logging.getLogger(__name__)

NOOP = "noop"
MAX_COMPONENTS = 3


class BaseLabel(str, enum.Enum):
    M_WORD = "M:WORD"
    U_WORD = "U:WORD"
    M_PUNCT = "M:PUNCT"
    U_PUNCT = "U:PUNCT"
    R_PUNCT = "R:PUNCT"
    R_SPELL = "R:SPELL"
    R_CAP = "R:CAP"
    R_CMP = "R:CMP"
    R_NOM_FORM = "R:NOM-FORM"
    R_VERB_FORM = "R:VERB-FORM"
    R_LEX = "R:LEX"
    R_WO = "R:WO"

    def __str__(self) -> str:
        return self.value

    @property
    def is_replacement(self) -> bool:
        return self.value.startswith("R:")


_BY_CODE = {b.value: b for b in BaseLabel}


class LabelError(ValueError):
    pass


class UnknownLabel(LabelError):
    def __init__(self, text: str):
        super().__init__(f"unknown error label: {text!r}")
        self.text = text


class InvalidCompound(LabelError):
    def __init__(self, text: str, reason: str):
        super().__init__(f"invalid compound label {text!r}: {reason}")
        self.text = text
        self.reason = reason


@dataclass(frozen=True)
class ErrorLabel:
    """An edit's label.

    ``components`` holds the base codes in written order. Labels that could
    not be parsed keep their raw text in ``opaque`` and have no components;
    the noop sentinel has neither.
    """

    components: tuple[BaseLabel, ...] = ()
    opaque: Optional[str] = None

    @property
    def is_noop(self) -> bool:
        return not self.components and self.opaque is None

    @property
    def is_compound(self) -> bool:
        return len(self.components) > 1

    @property
    def is_word_order(self) -> bool:
        return BaseLabel.R_WO in self.components

    def __str__(self) -> str:
        if self.opaque is not None:
            return self.opaque
        if not self.components:
            return NOOP
        return "+".join(c.value for c in self.components)


NOOP_LABEL = ErrorLabel()
# Hypothesis edits carry no label; they reuse the sentinel.
UNLABELLED = NOOP_LABEL


def all_compounds() -> list[tuple[BaseLabel, ...]]:
    """Every compound the permissive default accepts, in canonical order."""
    members = [b for b in BaseLabel if b.is_replacement and b is not BaseLabel.R_WO]
    out = []
    for size in range(2, MAX_COMPONENTS + 1):
        out.extend(combinations(members, size))
    return out


@dataclass
class LabelScheme:
    """Label parsing rules.

    ``mapping`` rewrites corpus-specific tags to canonical codes before
    parsing. ``allowed_compounds`` restricts compounds to an explicit set
    (order-insensitive); ``None`` accepts every structurally legal compound.
    """

    mapping: dict[str, str] = field(default_factory=dict)
    allowed_compounds: Optional[frozenset[frozenset[BaseLabel]]] = None

    def parse(self, text: str) -> ErrorLabel:
        text = text.strip()
        text = self.mapping.get(text, text)
        if text == NOOP:
            return NOOP_LABEL
        parts = [self.mapping.get(p, p) for p in text.split("+")]
        comps = []
        for part in parts:
            base = _BY_CODE.get(part)
            if base is None:
                raise UnknownLabel(text)
            comps.append(base)
        if len(comps) > 1:
            if len(comps) > MAX_COMPONENTS:
                raise InvalidCompound(text, f"more than {MAX_COMPONENTS} components")
            if len(set(comps)) != len(comps):
                raise InvalidCompound(text, "duplicate component")
            for c in comps:
                if not c.is_replacement:
                    raise InvalidCompound(text, f"{c.value} is not a replacement label")
                if c is BaseLabel.R_WO:
                    raise InvalidCompound(text, "R:WO cannot be compounded")
            if (self.allowed_compounds is not None
                    and frozenset(comps) not in self.allowed_compounds):
                raise InvalidCompound(text, "not in the compound allowlist")
        return ErrorLabel(tuple(comps))

    def parse_lenient(self, text: str) -> ErrorLabel:
        """Like :meth:`parse` but unknown labels become opaque with a warning."""
        try:
            return self.parse(text)
        except UnknownLabel:
            logger.warning("unknown label %r kept as opaque label", text)
            return ErrorLabel((), opaque=text.strip())


DEFAULT_SCHEME = LabelScheme()


def parse_label(text: str, scheme: Optional[LabelScheme] = None) -> ErrorLabel:
    return (scheme or DEFAULT_SCHEME).parse(text)


def base_components(label: ErrorLabel) -> frozenset[BaseLabel]:
    """Base codes credited by per-type statistics; empty for noop and opaque."""
    return frozenset(label.components)


def load_label_map(stream: TextIO) -> dict[str, str]:
    """Read ``corpus-tag<TAB>canonical-code`` lines (``#`` starts a comment)."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(stream, 1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 2 or not cols[0] or not cols[1]:
            raise LabelError(f"line {lineno}: expected 'tag<TAB>code', got {line!r}")
        mapping[cols[0].strip()] = cols[1].strip()
    return mapping


def scheme_from_files(label_map: Optional[TextIO] = None,
                      allowlist: Optional[Iterable[str]] = None) -> LabelScheme:
    mapping = load_label_map(label_map) if label_map is not None else {}
    allowed = None
    if allowlist is not None:
        allowed = frozenset(
            frozenset(_BY_CODE[p] for p in entry.strip().split("+"))
            for entry in allowlist if entry.strip() and not entry.startswith("#")
        )
    return LabelScheme(mapping=mapping, allowed_compounds=allowed)
