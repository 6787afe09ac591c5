"""Link related constructions into a network.

Neighbors are ranked by embedding distance plus structural edit distance.
Each neighbor pair is then typed: one construction may be a sub-part of a
longer one, an instance of a more abstract one, or a polysemous variant
sharing the same abstract shape.  The result prints as Graphviz DOT.
"""
from pathlib import Path

import numpy as np

from cxgkit import NetworkConfig, Relation, build_network, load_inventory, load_lexicon
from cxgkit.constructicon import load_embeddings, md_matrix, to_dot

DATA = Path(__file__).resolve().parent / "data"

lexicon = load_lexicon(DATA / "network_lexicon.tsv")
inventory = load_inventory(DATA / "network_inventory.txt", lexicon)
embeddings = load_embeddings(DATA / "network_embeddings.txt")

labels = [c.label for c in inventory]
md = md_matrix(inventory)
print("structural edit distance (lexicon-aware):")
print("\n".join(f"  {lab:<28} {' '.join(f'{v:g}' for v in row)}" for lab, row in zip(labels, md)))

graph = build_network(inventory, embeddings, NetworkConfig(k=8, gamma=10.0))
for rel in Relation:
    links = graph.relation_edges(rel)
    print(f"\n{rel.value} ({len(links)})")
    arrow = "--" if rel is Relation.POLYSEMY else "->"
    for e in links:
        print(f"  {labels[e.src]} {arrow} {labels[e.dst]}")

print("\n" + to_dot(graph, labels))
