"""Sentence hypergraphs: tokens are nodes, selected constructions are hyperedges."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .matcher import Match


@dataclass(frozen=True)
class Hyperedge:
    construction_id: int
    members: tuple[int, ...]
    label: str = ""


@dataclass(frozen=True)
class Hypergraph:
    """Edge membership lists; the dense incidence matrix is built on demand."""

    m: int
    edges: tuple[Hyperedge, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        for j, e in enumerate(self.edges):
            if len(e.members) < 2:
                raise ValueError(f"hyperedge {j} has fewer than 2 members")
            if len(set(e.members)) != len(e.members):
                raise ValueError(f"hyperedge {j} repeats a node")
            if any(not 0 <= v < self.m for v in e.members):
                raise ValueError(f"hyperedge {j} references a node outside 0..{self.m - 1}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def incidence(self) -> np.ndarray:
        h = np.zeros((self.m, len(self.edges)), dtype=bool)
        for j, e in enumerate(self.edges):
            h[list(e.members), j] = True
        return h

    @property
    def construction_ids(self) -> list[int]:
        return [e.construction_id for e in self.edges]

    def isolated_nodes(self) -> list[int]:
        touched = {v for e in self.edges for v in e.members}
        return [i for i in range(self.m) if i not in touched]


def build(sentence_len: int, selection: Sequence[Match]) -> Hypergraph:
    if sentence_len < 1:
        raise ValueError("a hypergraph needs at least one node")
    edges = []
    for mt in selection:
        if mt.start < 0 or mt.end > sentence_len:
            raise ValueError(f"span [{mt.start}, {mt.end}) lies outside a {sentence_len}-token sentence")
        edges.append(Hyperedge(mt.construction_id, tuple(range(mt.start, mt.end)), mt.label))
    return Hypergraph(sentence_len, tuple(edges))


def incident_edges(h: Hypergraph, node: int) -> set[int]:
    if not 0 <= node < h.m:
        raise IndexError(f"node {node} out of range for {h.m} nodes")
    return {j for j, e in enumerate(h.edges) if node in e.members}


def to_text(h: Hypergraph, labels: Sequence[str] | None = None) -> str:
    """Node count on the first line, then ``label: i1 i2 ...`` per edge."""
    lines = [str(h.m)]
    for e in h.edges:
        label = labels[e.construction_id] if labels is not None else (e.label or str(e.construction_id))
        lines.append(f"{label}: " + " ".join(map(str, e.members)))
    return "\n".join(lines) + "\n"


def from_text(lines: Iterable[str], label_to_id=None) -> Hypergraph:
    """Inverse of :func:`to_text`; ``label_to_id`` resolves edge labels."""
    rows = [ln.strip() for ln in lines if ln.strip()]
    if not rows:
        raise ValueError("empty hypergraph text")
    m = int(rows[0])
    edges = []
    for row in rows[1:]:
        label, _, members = row.rpartition(":")
        label = label.strip()
        cid = label_to_id(label) if label_to_id is not None else int(label)
        edges.append(Hyperedge(cid, tuple(int(x) for x in members.split()), label))
    return Hypergraph(m, tuple(edges))
