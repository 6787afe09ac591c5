import numpy as np
import pytest
from hypothesis import given, strategies as st

from cxgkit.hypergraph import Hyperedge, Hypergraph, build, from_text, incident_edges, to_text
from cxgkit.matcher import Match


class TestBuild:
    def test_two_edges(self):
        h = build(5, [Match(0, 0, 3), Match(1, 2, 5)])
        H = h.incidence
        assert H.shape == (5, 2)
        np.testing.assert_array_equal(H.sum(axis=0), [3, 3])
        np.testing.assert_array_equal(H[2], [True, True])
        assert incident_edges(h, 2) == {0, 1}
        assert incident_edges(h, 0) == {0}

    def test_empty_selection(self):
        h = build(4, [])
        assert h.incidence.shape == (4, 0)
        assert h.isolated_nodes() == [0, 1, 2, 3]
        assert incident_edges(h, 1) == set()

    def test_full_edge(self):
        h = build(3, [Match(7, 0, 3)])
        np.testing.assert_array_equal(h.incidence, np.ones((3, 1), dtype=bool))
        assert all(incident_edges(h, i) == {0} for i in range(3))
        assert h.construction_ids == [7]

    def test_errors(self):
        with pytest.raises(ValueError):
            build(3, [Match(0, 1, 4)])
        with pytest.raises(IndexError):
            incident_edges(build(3, []), 3)
        with pytest.raises(ValueError):
            Hypergraph(3, (Hyperedge(0, (1,)),))
        with pytest.raises(ValueError):
            Hypergraph(3, (Hyperedge(0, (1, 1)),))

    @given(st.integers(2, 12), st.lists(st.tuples(st.integers(0, 10), st.integers(2, 4)), max_size=6))
    def test_incidence_consistent(self, m, raw):
        ms = [Match(i, s, s + r) for i, (s, r) in enumerate(raw) if s + r <= m]
        h = build(m, ms)
        H = h.incidence
        assert H.sum() == sum(len(e.members) for e in h.edges)
        for i in range(m):
            assert incident_edges(h, i) == set(np.flatnonzero(H[i]).tolist())


class TestText:
    def test_round_trip(self):
        h = build(6, [Match(0, 0, 3, ()), Match(1, 3, 6, ())])
        labels = ["NOUN--AUX--be", "too--hard--to"]
        text = to_text(h, labels)
        assert text == "6\nNOUN--AUX--be: 0 1 2\ntoo--hard--to: 3 4 5\n"
        back = from_text(text.splitlines(), labels.index)
        assert back.m == 6 and back.construction_ids == [0, 1]
        assert [e.members for e in back.edges] == [e.members for e in h.edges]
