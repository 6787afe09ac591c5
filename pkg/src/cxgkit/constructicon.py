"""Network of constructions linked by inheritance relations.

Candidate links come from the ``k`` nearest constructions under
``gamma * semantic distance + multi-level edit distance``; each candidate
pair is then typed as polysemy, subpart or instance (or dropped).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grammar import Construction, GrammarInventory, Level, Lexicon, Slot, is_match
from .rhgat import load_features, save_features


class Relation(enum.Enum):
    POLYSEMY = "polysemy"
    SUBPART = "subpart"
    INSTANCE = "instance"


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    relation: Relation
    directed: bool

    def sort_key(self):
        return (self.src, self.dst, self.relation.value)


@dataclass(frozen=True)
class NetworkConfig:
    k: int = 15
    gamma: float = 10.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class ConstructiconGraph:
    nodes: tuple[int, ...]
    edges: tuple[Link, ...]

    def __post_init__(self):
        edges = set()
        for e in self.edges:
            if e.src == e.dst:
                raise ValueError(f"self-loop on construction {e.src}")
            if e.relation is Relation.POLYSEMY:
                if e.directed:
                    raise ValueError("polysemy links are undirected")
                if e.src > e.dst:
                    e = Link(e.dst, e.src, e.relation, False)
            elif not e.directed:
                raise ValueError(f"{e.relation.value} links are directed")
            edges.add(e)
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(sorted(edges, key=Link.sort_key)))

    def relation_edges(self, relation: Relation) -> list[Link]:
        return [e for e in self.edges if e.relation is relation]


# --- distances ----------------------------------------------------------------

def sd(embeddings: np.ndarray, i: int, j: int) -> float:
    """One minus the cosine similarity of two embedding rows."""
    a, b = embeddings[i], embeddings[j]
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("semantic distance is undefined for a zero-norm embedding")
    return float(1.0 - np.dot(a, b) / (na * nb))


def sd_row(embeddings: np.ndarray, g: int) -> np.ndarray:
    norms = np.linalg.norm(embeddings, axis=1)
    if np.any(norms == 0):
        raise ValueError("semantic distance is undefined for a zero-norm embedding")
    return 1.0 - (embeddings @ embeddings[g]) / (norms * norms[g])


def _slots(c) -> tuple[Slot, ...]:
    return c.slots if isinstance(c, Construction) else tuple(c)


def med(a, b, lexicon: Lexicon) -> int:
    """Multi-level edit distance between two slot sequences.

    Unit insertion and deletion; substitution is free when the slots match
    across abstraction levels and costs 1 otherwise.
    """
    xs, ys = _slots(a), _slots(b)
    p, q = len(xs), len(ys)
    dp = [[0] * (q + 1) for _ in range(p + 1)]
    for i in range(p + 1):
        dp[i][0] = i
    for j in range(q + 1):
        dp[0][j] = j
    for i in range(1, p + 1):
        for j in range(1, q + 1):
            d = 0 if is_match(xs[i - 1], ys[j - 1], lexicon) else 1
            dp[i][j] = min(dp[i - 1][j] + 1, dp[i][j - 1] + 1, dp[i - 1][j - 1] + d)
    return dp[p][q]


def md_matrix(inventory: GrammarInventory, lexicon: Lexicon | None = None) -> np.ndarray:
    lexicon = inventory.lexicon if lexicon is None else lexicon
    n = len(inventory)
    out = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = med(inventory[i], inventory[j], lexicon)
    return out


def neighbors(g: int, embeddings: np.ndarray, md: np.ndarray, config: NetworkConfig) -> list[int]:
    """The k constructions closest to g (g excluded, ties to the smaller id)."""
    n = md.shape[0]
    if n <= config.k:
        raise ValueError(f"need more than k={config.k} constructions, got {n}")
    dist = config.gamma * sd_row(embeddings, g) + md[g]
    ids = np.arange(n)
    order = np.lexsort((ids, dist))
    return [int(i) for i in order if i != g][: config.k]


# --- relation typing ------------------------------------------------------------

def _subpart(longer: Construction, shorter: Construction) -> bool:
    r = len(shorter.slots)
    return any(longer.slots[off:off + r] == shorter.slots for off in range(len(longer.slots) - r + 1))


def type_relation(a: Construction, b: Construction, lexicon: Lexicon) -> Link | None:
    """Classify the inheritance link between two constructions, if any.

    * subpart  -- the shorter one occurs verbatim inside the longer (whole -> part)
    * instance -- equal length, all slots match, and one side is lexical where
      the other is abstract, always on the same side (abstract -> concrete)
    * polysemy -- equal length, differing only in lexical slots whose words
      share a POS tag or cluster (undirected)
    """
    if len(a.slots) != len(b.slots):
        longer, shorter = (a, b) if len(a.slots) > len(b.slots) else (b, a)
        if _subpart(longer, shorter):
            return Link(longer.id, shorter.id, Relation.SUBPART, True)
        return None

    a_concrete = b_concrete = False
    for x, y in zip(a.slots, b.slots):
        if not is_match(x, y, lexicon):
            return None
        if x.level is Level.LEXICAL and y.level is not Level.LEXICAL:
            a_concrete = True
        elif y.level is Level.LEXICAL and x.level is not Level.LEXICAL:
            b_concrete = True
    if a_concrete and b_concrete:
        return None
    if a_concrete:
        return Link(b.id, a.id, Relation.INSTANCE, True)
    if b_concrete:
        return Link(a.id, b.id, Relation.INSTANCE, True)

    differs = False
    for x, y in zip(a.slots, b.slots):
        if x == y:
            continue
        if x.level is not Level.LEXICAL or y.level is not Level.LEXICAL:
            return None
        differs = True
    if not differs:
        return None
    return Link(min(a.id, b.id), max(a.id, b.id), Relation.POLYSEMY, False)


def build_network(inventory: GrammarInventory, embeddings: np.ndarray, config: NetworkConfig,
                  lexicon: Lexicon | None = None) -> ConstructiconGraph:
    lexicon = inventory.lexicon if lexicon is None else lexicon
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] != len(inventory):
        raise ValueError(f"expected {len(inventory)} embedding rows, got shape {embeddings.shape}")
    md = md_matrix(inventory, lexicon)
    links = []
    for g in range(len(inventory)):
        for h in neighbors(g, embeddings, md, config):
            link = type_relation(inventory[g], inventory[h], lexicon)
            if link is not None:
                links.append(link)
    return ConstructiconGraph(tuple(range(len(inventory))), tuple(links))


# --- export -------------------------------------------------------------------

def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: ConstructiconGraph, labels: Sequence[str]) -> str:
    lines = ["digraph constructicon {", "  node [shape=box];"]
    for n in graph.nodes:
        lines.append(f"  n{n} [label={_dot_quote(labels[n])}];")
    for e in graph.edges:
        attrs = f"label={_dot_quote(e.relation.value)}"
        if not e.directed:
            attrs += ", dir=none, style=dashed"
        lines.append(f"  n{e.src} -> n{e.dst} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_records(graph: ConstructiconGraph, labels: Sequence[str]) -> str:
    rows = [f"{labels[e.src]}\t{labels[e.dst]}\t{e.relation.value}\t{str(e.directed).lower()}"
            for e in graph.edges]
    return "".join(r + "\n" for r in rows)


def parse_records(lines: Iterable[str], inventory: GrammarInventory) -> ConstructiconGraph:
    links = []
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4 or fields[3] not in ("true", "false"):
            raise ValueError(f"line {lineno}: expected src<TAB>dst<TAB>relation<TAB>true|false")
        src, dst = inventory.id_of(fields[0]), inventory.id_of(fields[1])
        links.append(Link(src, dst, Relation(fields[2]), fields[3] == "true"))
    return ConstructiconGraph(tuple(range(len(inventory))), tuple(links))


def export(graph: ConstructiconGraph, inventory: GrammarInventory, fmt: str = "dot") -> str:
    labels = inventory.labels
    if fmt == "dot":
        return to_dot(graph, labels)
    if fmt == "records":
        return to_records(graph, labels)
    raise ValueError(f"unknown export format {fmt!r}")


def load_embeddings(path: str | Path) -> np.ndarray:
    """``|V| d`` header then one row of d numbers per construction."""
    return load_features(path)


def save_embeddings(embeddings: np.ndarray, path: str | Path) -> None:
    save_features(np.asarray(embeddings, dtype=np.float64), path)
