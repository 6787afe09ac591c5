"""Slots, constructions, the lexicon and the cross-level slot predicates.

A construction is written as a dash-joined sequence of slots, for example
``NOUN--AUX--be``.  Each slot sits at one of three abstraction levels:

* lexical   -- a lowercase surface word (``be``)
* syntactic -- a Universal POS tag (``NOUN``)
* semantic  -- a word-cluster id, written ``<7>``
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

SEPARATOR = "--"

UPOS_TAGS = frozenset(
    {
        "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
        "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
    }
)

_SEMANTIC_RE = re.compile(r"^<(\d+)>$")


class GrammarError(ValueError):
    """Malformed construction label, lexicon entry or inventory file."""

    def __init__(self, message, source=None, line=None):
        self.source = source
        self.line = line
        if source is not None and line is not None:
            message = f"{source}:{line}: {message}"
        elif source is not None:
            message = f"{source}: {message}"
        super().__init__(message)


class Level(enum.IntEnum):
    # ordered from most concrete to most abstract
    LEXICAL = 0
    SEMANTIC = 1
    SYNTACTIC = 2


@dataclass(frozen=True)
class Slot:
    level: Level
    value: str | int

    def __post_init__(self):
        if self.level is Level.LEXICAL:
            if not isinstance(self.value, str) or not self.value:
                raise GrammarError(f"lexical slot needs a non-empty word, got {self.value!r}")
            if "-" in self.value or any(ch.isspace() for ch in self.value):
                raise GrammarError(f"lexical slot {self.value!r} contains a dash or whitespace")
            object.__setattr__(self, "value", self.value.lower())
        elif self.level is Level.SYNTACTIC:
            if not isinstance(self.value, str) or not self.value:
                raise GrammarError(f"syntactic slot needs a POS tag, got {self.value!r}")
        else:
            if isinstance(self.value, bool) or not isinstance(self.value, int) or self.value < 0:
                raise GrammarError(f"semantic slot needs a non-negative cluster id, got {self.value!r}")

    @classmethod
    def lex(cls, word: str) -> "Slot":
        return cls(Level.LEXICAL, word)

    @classmethod
    def syn(cls, tag: str) -> "Slot":
        return cls(Level.SYNTACTIC, tag)

    @classmethod
    def sem(cls, cluster: int) -> "Slot":
        return cls(Level.SEMANTIC, cluster)

    def render(self) -> str:
        if self.level is Level.SEMANTIC:
            return f"<{self.value}>"
        return str(self.value)

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class Construction:
    id: int
    slots: tuple[Slot, ...]

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        if len(self.slots) < 2:
            raise GrammarError(f"a construction needs at least 2 slots, got {len(self.slots)}")

    @property
    def label(self) -> str:
        return render_slots(self.slots)

    def __len__(self):
        return len(self.slots)


@dataclass(frozen=True)
class Lexicon:
    """Word-level annotations consulted by the cross-level matcher.

    ``pos_of`` maps each lowercase word to the non-empty set of POS tags it
    can carry; ``cluster_of`` optionally assigns a semantic cluster.
    """

    pos_of: Mapping[str, frozenset[str]] = field(default_factory=dict)
    cluster_of: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        pos_of = {}
        for word, tags in self.pos_of.items():
            tags = frozenset([tags] if isinstance(tags, str) else tags)
            if not tags:
                raise GrammarError(f"lexicon entry {word!r} has an empty POS set")
            pos_of[word.lower()] = tags
        object.__setattr__(self, "pos_of", pos_of)
        object.__setattr__(self, "cluster_of", {w.lower(): int(c) for w, c in self.cluster_of.items()})

    def tags(self, word: str) -> frozenset[str]:
        return self.pos_of.get(word, frozenset())

    def cluster(self, word: str) -> int | None:
        return self.cluster_of.get(word)


@dataclass(frozen=True)
class GrammarInventory:
    constructions: tuple[Construction, ...]
    lexicon: Lexicon = field(default_factory=Lexicon)
    pos_tags: frozenset[str] = UPOS_TAGS

    def __post_init__(self):
        object.__setattr__(self, "constructions", tuple(self.constructions))
        seen = {}
        for i, cxn in enumerate(self.constructions):
            for slot in cxn.slots:
                if slot.level is Level.SYNTACTIC and slot.value not in self.pos_tags:
                    raise GrammarError(f"unknown POS tag {slot.value!r} in {cxn.label!r}")
            if cxn.id != i:
                raise GrammarError(f"construction ids must be dense 0..n-1, got id {cxn.id} at position {i}")
            if cxn.label in seen:
                raise GrammarError(f"duplicate construction label {cxn.label!r}")
            seen[cxn.label] = i
        object.__setattr__(self, "_by_label", seen)

    @classmethod
    def from_labels(cls, labels: Iterable[str], lexicon: Lexicon | None = None,
                    extra_tags: Iterable[str] = ()) -> "GrammarInventory":
        tags = UPOS_TAGS | frozenset(extra_tags)
        cxns = [Construction(i, parse_construction(lab, tags)) for i, lab in enumerate(labels)]
        return cls(tuple(cxns), lexicon if lexicon is not None else Lexicon(), tags)

    def __len__(self):
        return len(self.constructions)

    def __getitem__(self, idx: int) -> Construction:
        return self.constructions[idx]

    def __iter__(self):
        return iter(self.constructions)

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.constructions]

    def id_of(self, label: str) -> int:
        try:
            return self._by_label[label]
        except KeyError:
            raise KeyError(f"unknown construction {label!r}") from None


def render_slots(slots: Sequence[Slot]) -> str:
    return SEPARATOR.join(s.render() for s in slots)


def parse_construction(label: str, pos_tags: frozenset[str] = UPOS_TAGS) -> tuple[Slot, ...]:
    """Split a dash-joined label into slots.

    A token that is exactly a known POS tag is syntactic, ``<k>`` is a
    semantic cluster, anything else is a lexical word.

    >>> [str(s) for s in parse_construction("NOUN--AUX--be")]
    ['NOUN', 'AUX', 'be']
    """
    label = label.strip()
    parts = label.split(SEPARATOR)
    slots = []
    for part in parts:
        if not part:
            raise GrammarError(f"empty slot in {label!r}")
        if part in pos_tags:
            slots.append(Slot.syn(part))
            continue
        m = _SEMANTIC_RE.match(part)
        if m:
            slots.append(Slot.sem(int(m.group(1))))
            continue
        if part.startswith("<") or part.endswith(">"):
            raise GrammarError(f"unknown sigil form {part!r} in {label!r}")
        slots.append(Slot.lex(part))
    if len(slots) < 2:
        raise GrammarError(f"{label!r} has fewer than 2 slots")
    return tuple(slots)


def is_match(a: Slot, b: Slot, lexicon: Lexicon) -> bool:
    """Cross-level slot compatibility used by the multi-level edit distance."""
    if a.level > b.level:
        a, b = b, a
    if a.level is Level.LEXICAL:
        if b.level is Level.LEXICAL:
            if a.value == b.value:
                return True
            if lexicon.tags(a.value) & lexicon.tags(b.value):
                return True
            ca, cb = lexicon.cluster(a.value), lexicon.cluster(b.value)
            return ca is not None and ca == cb
        if b.level is Level.SYNTACTIC:
            return b.value in lexicon.tags(a.value)
        return lexicon.cluster(a.value) == b.value
    if a.level is b.level:
        return a.value == b.value
    # syntactic vs semantic has no matching criterion
    return False


def slot_matches_token(slot: Slot, token) -> bool:
    """Does a token (anything with ``surface``, ``upos``, ``cluster``) fill the slot?"""
    if slot.level is Level.LEXICAL:
        return token.surface.lower() == slot.value
    if slot.level is Level.SYNTACTIC:
        return token.upos == slot.value
    return token.cluster is not None and token.cluster == slot.value


def _content_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def load_lexicon(path: str | Path, pos_tags: frozenset[str] = UPOS_TAGS) -> Lexicon:
    """Read ``word<TAB>POS[,POS...]<TAB>cluster`` lines (cluster may be empty)."""
    pos_of, cluster_of = {}, {}
    for lineno, line in _content_lines(path):
        fields = line.split("\t")
        if len(fields) not in (2, 3):
            raise GrammarError("expected word<TAB>POS[,POS...]<TAB>cluster", path, lineno)
        word = fields[0].strip().lower()
        if not word:
            raise GrammarError("empty word", path, lineno)
        tags = frozenset(t.strip() for t in fields[1].split(",") if t.strip())
        if not tags:
            raise GrammarError(f"no POS tags for {word!r}", path, lineno)
        unknown = tags - pos_tags
        if unknown:
            raise GrammarError(f"unknown POS tag(s) {sorted(unknown)}", path, lineno)
        pos_of[word] = pos_of.get(word, frozenset()) | tags
        cluster = fields[2].strip() if len(fields) == 3 else ""
        if cluster:
            if not cluster.isdigit():
                raise GrammarError(f"cluster must be a non-negative integer, got {cluster!r}", path, lineno)
            cluster_of[word] = int(cluster)
    return Lexicon(pos_of, cluster_of)


def load_inventory(path: str | Path, lexicon: Lexicon | None = None,
                   extra_tags: Iterable[str] = ()) -> GrammarInventory:
    """Read one construction label per line; ``#`` lines are comments."""
    tags = UPOS_TAGS | frozenset(extra_tags)
    cxns, seen = [], set()
    for lineno, line in _content_lines(path):
        try:
            slots = parse_construction(line, tags)
        except GrammarError as exc:
            raise GrammarError(str(exc), path, lineno) from None
        label = render_slots(slots)
        if label in seen:
            raise GrammarError(f"duplicate construction {label!r}", path, lineno)
        seen.add(label)
        cxns.append(Construction(len(cxns), slots))
    return GrammarInventory(tuple(cxns), lexicon if lexicon is not None else Lexicon(), tags)


def write_inventory(inventory: GrammarInventory, path: str | Path) -> None:
    Path(path).write_text("".join(c.label + "\n" for c in inventory), encoding="utf-8")
