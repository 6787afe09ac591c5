import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cxgkit.grammar import GrammarError, GrammarInventory
from cxgkit.matcher import (AnnotatedSentence, Match, Overlap, SubwordAlignment, acr, align_to_subwords, aoc,
                            classify_overlap, format_corpus, match_all, match_record, parse_corpus,
                            read_match_records)

from generators import naive_matches, random_inventory, random_sentence


def tagged(text):
    """'the/DET staff/NOUN' -> AnnotatedSentence."""
    return AnnotatedSentence.from_tagged([tuple(w.split("/")) for w in text.split()])


STAFF = tagged("the/DET staff/NOUN should/AUX be/AUX friendlier/ADJ ./PUNCT")
HARD = tagged("it/PRON was/AUX too/ADV hard/ADJ to/PART find/VERB")
SERVED = tagged("if/SCONJ it/PRON served/VERB pizza/NOUN ,/PUNCT fine/ADJ")


def spans(ms):
    return [(m.construction_id, m.start, m.end) for m in ms]


class TestMatchAll:
    @pytest.mark.parametrize("sentence,label,span", [
        (STAFF, "NOUN--AUX--be", (1, 4)),
        (HARD, "too--hard--to", (2, 5)),
        (SERVED, "if--PRON--VERB", (0, 3)),
    ])
    def test_table_pairs(self, sentence, label, span):
        inv = GrammarInventory.from_labels([label])
        assert spans(match_all(sentence, inv)) == [(0, *span)]

    def test_empty_inventory(self):
        assert match_all(STAFF, GrammarInventory(())) == []

    def test_overlapping_and_repeated_kept(self):
        s = tagged("a/NOUN b/NOUN c/NOUN d/NOUN")
        inv = GrammarInventory.from_labels(["NOUN--NOUN", "NOUN--NOUN--NOUN"])
        assert spans(match_all(s, inv)) == [(0, 0, 2), (1, 0, 3), (0, 1, 3), (1, 1, 4), (0, 2, 4)]

    def test_semantic_slot(self):
        s = AnnotatedSentence.from_tagged([("eat", "VERB", 1), ("pizza", "NOUN", 3), ("now", "ADV", None)])
        inv = GrammarInventory.from_labels(["VERB--<3>", "<3>--ADV", "ADV--<3>"])
        assert spans(match_all(s, inv)) == [(0, 0, 2), (1, 1, 3)]

    def test_matches_carry_slots(self):
        inv = GrammarInventory.from_labels(["NOUN--AUX--be"])
        (m,) = match_all(STAFF, inv)
        assert m.label == "NOUN--AUX--be" and m.covered == {1, 2, 3}

    def test_random_against_window_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(300):
            s = random_sentence(rng, int(rng.integers(1, 12)))
            inv = random_inventory(rng, int(rng.integers(0, 12)))
            got = spans(match_all(s, inv))
            assert set(got) == naive_matches(s, inv)
            assert got == sorted(got, key=lambda t: (t[1], t[0]))


class TestOverlap:
    def test_figure_cases(self):
        assert classify_overlap(Match(0, 5, 8), Match(1, 5, 9)) is Overlap.INCLUSION
        assert classify_overlap(Match(0, 5, 9), Match(1, 8, 10)) is Overlap.INTERSECTION
        assert classify_overlap(Match(0, 0, 3), Match(1, 4, 7)) is Overlap.DISJOINT

    @given(st.tuples(st.integers(0, 10), st.integers(1, 5)), st.tuples(st.integers(0, 10), st.integers(1, 5)))
    def test_symmetric(self, a, b):
        ma, mb = Match(0, a[0], a[0] + a[1]), Match(1, b[0], b[0] + b[1])
        assert classify_overlap(ma, mb) is classify_overlap(mb, ma)


class TestSubwords:
    def test_interval_mapping(self):
        al = SubwordAlignment({0: (0, 1), 1: (1, 3), 2: (3, 4)})
        assert align_to_subwords([Match(0, 1, 3)], al) == [(1, 4)]
        assert align_to_subwords([Match(0, 0, 1)], SubwordAlignment({0: (0, 4)})) == [(0, 4)]

    def test_identity(self):
        al = SubwordAlignment({i: (i, i + 1) for i in range(6)})
        ms = [Match(0, 0, 3), Match(1, 2, 6)]
        assert align_to_subwords(ms, al) == [(0, 3), (2, 6)]

    def test_from_word_ids(self):
        al = SubwordAlignment.from_word_ids([None, 0, 1, 1, 2, None])
        assert al.word_to_subwords == {0: (0, 1), 1: (1, 3), 2: (3, 4)}
        assert al.n_subwords == 4
        assert SubwordAlignment.from_pieces([["a"], ["b", "##c"], ["d"]]) == al

    def test_errors(self):
        with pytest.raises(KeyError):
            align_to_subwords([Match(0, 0, 3)], SubwordAlignment({0: (0, 1), 1: (1, 2)}))
        with pytest.raises(ValueError):
            SubwordAlignment({0: (0, 2), 1: (1, 3)})
        with pytest.raises(ValueError):
            SubwordAlignment.from_word_ids([0, 1, 0])

    @given(st.lists(st.integers(1, 4), min_size=3, max_size=10), st.data())
    def test_containment_preserved(self, pieces, data):
        al = SubwordAlignment.from_pieces([["x"] * p for p in pieces])
        n = len(pieces)
        s = data.draw(st.integers(0, n - 2))
        e = data.draw(st.integers(s + 2, n))
        s2 = data.draw(st.integers(s, e - 1))
        e2 = data.draw(st.integers(s2 + 1, e))
        (outer, inner) = align_to_subwords([Match(0, s, e), Match(1, s2, e2)], al)
        assert outer[0] <= inner[0] and inner[1] <= outer[1]


def ten_token():
    # DET--ADJ--NOUN matches at [0,3) and [5,8) only
    return tagged("the/DET big/ADJ dog/NOUN ran/VERB ,/PUNCT a/DET small/ADJ cat/NOUN hid/VERB ./PUNCT")


class TestMetrics:
    inv = GrammarInventory.from_labels(["DET--ADJ--NOUN"])

    def test_aoc_single(self):
        assert aoc([ten_token()], self.inv) == Fraction(1, 5)

    def test_aoc_two_sentences(self):
        five = tagged("run/VERB fast/ADV now/ADV !/PUNCT ok/INTJ")
        assert aoc([ten_token(), five], self.inv) == Fraction(1, 10)

    def test_acr_disjoint(self):
        assert acr([ten_token()], self.inv) == Fraction(3, 5)

    def test_acr_overlapping(self):
        s = tagged("a/NOUN b/VERB c/NOUN d/VERB e/NOUN f/PUNCT g/PUNCT h/PUNCT")
        inv = GrammarInventory.from_labels(["NOUN--VERB--NOUN"])
        assert acr([s], inv) == Fraction(3, 4)

    def test_zero(self):
        inv = GrammarInventory.from_labels(["INTJ--INTJ"])
        assert aoc([ten_token()], inv) == 0 and acr([ten_token()], inv) == 0

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            aoc([], self.inv)
        with pytest.raises(ValueError):
            acr([], self.inv)

    def test_aoc_is_mean_of_sentences(self):
        rng = np.random.default_rng(2)
        corpus = [random_sentence(rng, int(rng.integers(2, 9))) for _ in range(6)]
        inv = random_inventory(rng, 8, max_len=3)
        assert aoc(corpus, inv) == sum(aoc([s], inv) for s in corpus) / len(corpus)


class TestFiles:
    def test_corpus_round_trip(self):
        text = "# id = a\n0\tThe\tDET\t-\n1\tstaff\tNOUN\t2\n\n0\tok\tINTJ\t-\n"
        corpus = parse_corpus(text.splitlines(True))
        assert [s.sentence_id for s in corpus] == ["a", "s1"]
        assert corpus[0].tokens[1].cluster == 2
        again = parse_corpus(format_corpus(corpus).splitlines(True))
        assert [s.tokens for s in again] == [s.tokens for s in corpus]

    def test_corpus_errors(self):
        with pytest.raises(GrammarError, match=r"c.tsv:2:"):
            parse_corpus(["0\ta\tNOUN\t-\n", "1\tb\tNOUN\n"], "c.tsv")
        with pytest.raises(GrammarError, match=r":1:"):
            parse_corpus(["3\ta\tNOUN\t-\n"])
        with pytest.raises(GrammarError):
            parse_corpus(["0\ta\tNOUN\tx\n"])

    def test_empty_corpus_file(self):
        assert parse_corpus([]) == []

    def test_match_records(self, tmp_path):
        inv = GrammarInventory.from_labels(["NOUN--AUX--be"])
        (m,) = match_all(STAFF, inv)
        line = match_record("s0", m)
        assert json.loads(line) == {"sentence_id": "s0", "construction": "NOUN--AUX--be", "start": 1, "end": 4}
        (tmp_path / "m.jsonl").write_text(line + "\n")
        assert read_match_records(tmp_path / "m.jsonl", inv) == {"s0": [m]}
