"""Construction-grammar toolkit: matching, Cond-MC selection, hypergraph
attention encoding and construction networks."""

from .grammar import (Construction, GrammarError, GrammarInventory, Level, Lexicon, Slot, is_match,
                      load_inventory, load_lexicon, parse_construction)
from .matcher import AnnotatedSentence, Match, Token, acr, aoc, match_all
from .selector import SelectorConfig, Selection, score, solve_exact, solve_sa
from .hypergraph import Hyperedge, Hypergraph, build
from .rhgat import RHgatParams, Task, backward, forward, init_params, train_toy
from .constructicon import ConstructiconGraph, NetworkConfig, Relation, build_network, med

__version__ = "0.1.0"
