"""Construction matching over annotated sentences.

Besides :func:`match_all` this module holds the overlap classifier, the
word-to-subword span alignment and the corpus sparsity metrics (AoC, ACR).
"""
from __future__ import annotations

import enum
import json
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .grammar import GrammarError, GrammarInventory, Level, Slot, render_slots, slot_matches_token


@dataclass(frozen=True)
class Token:
    surface: str
    upos: str
    cluster: int | None = None
    index: int = 0


@dataclass(frozen=True)
class AnnotatedSentence:
    tokens: tuple[Token, ...]
    sentence_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise ValueError("a sentence needs at least one token")
        for i, tok in enumerate(self.tokens):
            if tok.index != i:
                raise ValueError(f"token indices must be dense 0..m-1, got {tok.index} at position {i}")

    @classmethod
    def from_tagged(cls, pairs: Iterable[tuple], sentence_id: str = "") -> "AnnotatedSentence":
        """Build from ``(surface, upos)`` or ``(surface, upos, cluster)`` tuples."""
        toks = []
        for i, p in enumerate(pairs):
            cluster = p[2] if len(p) > 2 else None
            toks.append(Token(p[0], p[1], cluster, i))
        return cls(tuple(toks), sentence_id)

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Match:
    """A construction instantiated on the half-open token window [start, end)."""

    construction_id: int
    start: int
    end: int
    slots: tuple[Slot, ...] = ()

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"empty span [{self.start}, {self.end})")
        if self.slots and len(self.slots) != self.end - self.start:
            raise ValueError("span length must equal the construction's slot count")

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def covered(self) -> frozenset[int]:
        return frozenset(range(self.start, self.end))

    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def label(self) -> str:
        return render_slots(self.slots)


def _token_keys(tok: Token):
    yield (Level.LEXICAL, tok.surface.lower())
    yield (Level.SYNTACTIC, tok.upos)
    if tok.cluster is not None:
        yield (Level.SEMANTIC, tok.cluster)


def _first_slot_index(inventory: GrammarInventory):
    index = defaultdict(list)
    for cxn in inventory:
        first = cxn.slots[0]
        index[(first.level, first.value)].append(cxn)
    return index


def match_all(sentence: AnnotatedSentence, inventory: GrammarInventory) -> list[Match]:
    """Every (construction, offset) whose window satisfies all slot constraints.

    Results are ordered by start offset, then construction id.
    """
    index = _first_slot_index(inventory)
    tokens = sentence.tokens
    m = len(tokens)
    found = []
    for start, tok in enumerate(tokens):
        candidates = []
        for key in _token_keys(tok):
            candidates.extend(index.get(key, ()))
        for cxn in candidates:
            r = len(cxn.slots)
            if start + r > m:
                continue
            if all(slot_matches_token(s, tokens[start + j]) for j, s in enumerate(cxn.slots[1:], 1)):
                found.append(Match(cxn.id, start, start + r, cxn.slots))
    found.sort(key=lambda mt: (mt.start, mt.construction_id))
    return found


class Overlap(enum.Enum):
    INCLUSION = "inclusion"
    INTERSECTION = "intersection"
    DISJOINT = "disjoint"


def classify_overlap(a: Match, b: Match) -> Overlap:
    ca, cb = a.covered, b.covered
    if ca <= cb or cb <= ca:
        return Overlap.INCLUSION
    if ca & cb:
        return Overlap.INTERSECTION
    return Overlap.DISJOINT


@dataclass(frozen=True)
class SubwordAlignment:
    """Maps each word index to its half-open interval of subword positions."""

    word_to_subwords: Mapping[int, tuple[int, int]]

    def __post_init__(self):
        spans = {int(k): (int(v[0]), int(v[1])) for k, v in self.word_to_subwords.items()}
        expected = 0
        for w in sorted(spans):
            lo, hi = spans[w]
            if hi <= lo:
                raise ValueError(f"word {w} maps to an empty subword interval")
            if lo != expected:
                raise ValueError(f"subword intervals must be contiguous and increasing (word {w} starts at {lo})")
            expected = hi
        object.__setattr__(self, "word_to_subwords", spans)

    @classmethod
    def from_word_ids(cls, word_ids: Sequence[int | None]) -> "SubwordAlignment":
        """From a per-subword word index list (``None`` marks special tokens).

        Special tokens are dropped and positions count only real subwords,
        e.g. ``[None, 0, 1, 1, 2, None]`` gives ``{0: (0, 1), 1: (1, 3), 2: (3, 4)}``.
        """
        spans: dict[int, list[int]] = {}
        pos = 0
        prev = None
        for wid in word_ids:
            if wid is None:
                continue
            if wid in spans and wid != prev:
                raise ValueError(f"word {wid} has non-adjacent subwords")
            spans.setdefault(wid, [pos, pos])[1] = pos + 1
            prev = wid
            pos += 1
        return cls({w: (lo, hi) for w, (lo, hi) in spans.items()})

    @classmethod
    def from_pieces(cls, pieces_per_word: Sequence[Sequence[str]]) -> "SubwordAlignment":
        spans, pos = {}, 0
        for w, pieces in enumerate(pieces_per_word):
            n = len(pieces)
            spans[w] = (pos, pos + n)
            pos += n
        return cls(spans)

    @property
    def n_subwords(self) -> int:
        return max((hi for _, hi in self.word_to_subwords.values()), default=0)


def align_to_subwords(matches: Sequence[Match], alignment: SubwordAlignment) -> list[tuple[int, int]]:
    table = alignment.word_to_subwords
    out = []
    for mt in matches:
        try:
            first = table[mt.start][0]
            last = table[mt.end - 1][1]
        except KeyError as exc:
            raise KeyError(f"word index {exc.args[0]} missing from the subword alignment") from None
        out.append((first, last))
    return out


def aoc(corpus: Sequence[AnnotatedSentence], inventory: GrammarInventory) -> Fraction:
    """Average number of extracted constructions per token, over sentences."""
    if not corpus:
        raise ValueError("AoC is undefined for an empty corpus")
    total = sum((Fraction(len(match_all(s, inventory)), len(s)) for s in corpus), Fraction(0))
    return total / len(corpus)


def coverage_lengths(sentence: AnnotatedSentence, inventory: GrammarInventory, config=None) -> int:
    """Total slot length of the unconditional max-coverage selection."""
    from .selector import SelectorConfig, max_coverage

    universe = match_all(sentence, inventory)
    if not universe:
        return 0
    selection = max_coverage(universe, config if config is not None else SelectorConfig())
    return sum(mt.length for mt in selection.chosen)


def acr(corpus: Sequence[AnnotatedSentence], inventory: GrammarInventory, config=None) -> Fraction:
    """Average ratio of selected construction length to sentence length.

    The selection per sentence maximises coverage alone (overlap and
    concreteness weights forced to zero).
    """
    if not corpus:
        raise ValueError("ACR is undefined for an empty corpus")
    total = sum((Fraction(coverage_lengths(s, inventory, config), len(s)) for s in corpus), Fraction(0))
    return total / len(corpus)


# --- corpus and match-record files ------------------------------------------

def parse_corpus(lines: Iterable[str], source: str = "<corpus>") -> list[AnnotatedSentence]:
    """Parse ``index<TAB>surface<TAB>UPOS<TAB>cluster-or-dash`` blocks.

    Blank lines separate sentences; ``#`` lines are comments, and a comment of
    the form ``# id = X`` names the following sentence.
    """
    sentences, block, pending_id = [], [], None

    def flush():
        nonlocal block, pending_id
        if block:
            sid = pending_id if pending_id is not None else f"s{len(sentences)}"
            sentences.append(AnnotatedSentence(tuple(block), sid))
        block, pending_id = [], None

    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("id") and "=" in body:
                if block:
                    flush()
                pending_id = body.split("=", 1)[1].strip()
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise GrammarError(f"expected 4 tab-separated fields, got {len(fields)}", source, lineno)
        idx, surface, upos, cluster = fields
        if not idx.isdigit() or int(idx) != len(block):
            raise GrammarError(f"token index {idx!r} out of sequence (expected {len(block)})", source, lineno)
        if not surface or not upos:
            raise GrammarError("empty surface or POS field", source, lineno)
        if cluster == "-":
            cl = None
        elif cluster.isdigit():
            cl = int(cluster)
        else:
            raise GrammarError(f"cluster must be an integer or '-', got {cluster!r}", source, lineno)
        block.append(Token(surface, upos, cl, len(block)))
    flush()
    return sentences


def load_corpus(path: str | Path) -> list[AnnotatedSentence]:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh, str(path))


def format_corpus(corpus: Sequence[AnnotatedSentence]) -> str:
    blocks = []
    for s in corpus:
        lines = [f"# id = {s.sentence_id}"]
        for t in s.tokens:
            cl = "-" if t.cluster is None else str(t.cluster)
            lines.append(f"{t.index}\t{t.surface}\t{t.upos}\t{cl}")
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def match_record(sentence_id: str, match: Match) -> str:
    return json.dumps(
        {"sentence_id": sentence_id, "construction": match.label, "start": match.start, "end": match.end},
        sort_keys=True,
    )


def read_match_records(path: str | Path, inventory: GrammarInventory) -> dict[str, list[Match]]:
    """Group JSON-lines match records by sentence id, resolving labels."""
    grouped: dict[str, list[Match]] = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                cid = inventory.id_of(rec["construction"])
                mt = Match(cid, int(rec["start"]), int(rec["end"]), inventory[cid].slots)
            except (ValueError, KeyError, TypeError) as exc:
                raise GrammarError(f"bad match record: {exc}", str(path), lineno) from None
            grouped[rec["sentence_id"]].append(mt)
    return dict(grouped)
