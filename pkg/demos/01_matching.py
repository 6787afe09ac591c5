"""Find every construction instance in a small tagged corpus.

Constructions mix three slot levels: literal words (``be``), word clusters
(``<2>``) and part-of-speech tags (``NOUN``).  A match is a contiguous token
window whose tokens satisfy the slots in order.  The script lists the
matches per sentence, then reports the two corpus-level coverage metrics.
"""
from pathlib import Path

from cxgkit import acr, aoc, load_inventory, load_lexicon, match_all
from cxgkit.matcher import load_corpus

DATA = Path(__file__).resolve().parent / "data"

inventory = load_inventory(DATA / "inventory.txt", load_lexicon(DATA / "lexicon.tsv"))
corpus = load_corpus(DATA / "corpus.tsv")

print(f"{len(inventory)} constructions, {len(corpus)} sentences\n")
for sent in corpus:
    words = [t.surface for t in sent.tokens]
    print(f"[{sent.sentence_id}] {' '.join(words)}")
    for m in match_all(sent, inventory):
        print(f"    {inventory[m.construction_id].label:<18} -> {' '.join(words[m.start:m.end])!r} [{m.start},{m.end})")
    print()

# AoC: matches per token, averaged over sentences.
# ACR: share of each sentence spanned by a coverage-maximizing selection.
print(f"average occurrence coverage: {aoc(corpus, inventory)} ~ {float(aoc(corpus, inventory)):.3f}")
print(f"average coverage rate:       {acr(corpus, inventory)} ~ {float(acr(corpus, inventory)):.3f}")
