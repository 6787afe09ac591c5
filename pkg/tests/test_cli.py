import json
import subprocess
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from cxgkit import rhgat
from cxgkit.cli import main
from cxgkit.grammar import load_inventory, load_lexicon
from cxgkit.matcher import load_corpus, match_all
from cxgkit.selector import SelectorConfig, score, solve_exact

DATA = Path(__file__).resolve().parent.parent / "demos" / "data"
GRAMMAR = ["--inventory", str(DATA / "inventory.txt"), "--lexicon", str(DATA / "lexicon.tsv")]
CORPUS = ["--corpus", str(DATA / "corpus.tsv")]


def run(args, capsys):
    code = main(args)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def write_corpus(path, sentences):
    blocks = []
    for sid, text in sentences:
        rows = [f"# id = {sid}"]
        for i, tok in enumerate(text.split()):
            w, t = tok.rsplit("/", 1)
            rows.append(f"{i}\t{w}\t{t}\t-")
        blocks.append("\n".join(rows) + "\n")
    path.write_text("\n".join(blocks))
    return path


class TestMatch:
    def test_table_sentence(self, tmp_path, capsys):
        inv = tmp_path / "inv.txt"
        inv.write_text("too--hard--to\n")
        corpus = write_corpus(tmp_path / "c.tsv", [("h", "it/PRON was/AUX too/ADV hard/ADJ to/PART go/VERB")])
        code, out, err = run(["match", "--inventory", str(inv), "--corpus", str(corpus)], capsys)
        assert code == 0
        assert [json.loads(x) for x in out.splitlines()] == [
            {"sentence_id": "h", "construction": "too--hard--to", "start": 2, "end": 5}]
        assert "[match]" in err

    def test_empty_corpus(self, tmp_path, capsys):
        (tmp_path / "c.tsv").write_text("")
        code, out, _ = run(["match", *GRAMMAR, "--corpus", str(tmp_path / "c.tsv")], capsys)
        assert code == 0 and out == ""

    def test_malformed_line(self, tmp_path, capsys):
        (tmp_path / "c.tsv").write_text("0\tthe\tDET\t-\n1\tstaff\tNOUN\n")
        code, _, err = run(["match", *GRAMMAR, "--corpus", str(tmp_path / "c.tsv")], capsys)
        assert code == 2 and "c.tsv:2:" in err

    def test_bad_inventory(self, tmp_path, capsys):
        (tmp_path / "inv.txt").write_text("NOUN--AUX\nNOUN--\n")
        code, _, err = run(["match", "--inventory", str(tmp_path / "inv.txt"), *CORPUS], capsys)
        assert code == 2 and "inv.txt:2:" in err

    def test_missing_inputs(self, capsys):
        assert run(["match", *CORPUS], capsys)[0] == 2
        assert run(["match", *GRAMMAR, "--corpus", "/nonexistent/c.tsv"], capsys)[0] == 2

    def test_argparse_errors_exit_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["select", "--w1", "abc"])
        assert exc.value.code == 2


class TestSelect:
    def test_exact_matches_oracle(self, tmp_path, capsys):
        out_path = tmp_path / "sel.jsonl"
        code, _, _ = run(["select", *GRAMMAR, *CORPUS, "--exact", "--out", str(out_path)], capsys)
        assert code == 0
        inv = load_inventory(DATA / "inventory.txt", load_lexicon(DATA / "lexicon.tsv"))
        cfg = SelectorConfig()
        for rec, sent in zip(map(json.loads, out_path.read_text().splitlines()), load_corpus(DATA / "corpus.tsv")):
            best = solve_exact(match_all(sent, inv), cfg)
            assert rec["selected"] == [{"construction": m.label, "start": m.start, "end": m.end} for m in best.chosen]
            br = score(best, cfg)
            assert Fraction(rec["total"]) == br.total and Fraction(rec["s_ob3"]) == br.s_ob3

    def test_seeded_and_parallel_identical(self, capsys):
        outs = [run(["select", *GRAMMAR, *CORPUS, "--seed", "3", "--jobs", j], capsys)[1] for j in ("1", "1", "3")]
        assert outs[0] == outs[1] == outs[2]

    def test_coverage_mode(self, capsys):
        _, out, _ = run(["select", *GRAMMAR, *CORPUS, "--w2", "0", "--w3", "0", "--exact"], capsys)
        for rec in map(json.loads, out.splitlines()):
            assert Fraction(rec["total"]) == int(rec["s_ob1"])

    def test_consumes_match_output(self, tmp_path, capsys):
        matches = tmp_path / "m.jsonl"
        run(["match", *GRAMMAR, *CORPUS, "--out", str(matches)], capsys)
        direct = run(["select", *GRAMMAR, *CORPUS], capsys)[1]
        piped = run(["select", *GRAMMAR, *CORPUS, "--matches", str(matches)], capsys)[1]
        assert direct == piped

    def test_config_file_and_flags(self, tmp_path, capsys):
        (tmp_path / "s.cfg").write_text("w2 = 0\nw3 = 0\n")
        a = run(["select", *GRAMMAR, *CORPUS, "--config", str(tmp_path / "s.cfg")], capsys)[1]
        b = run(["select", *GRAMMAR, *CORPUS, "--w2", "0", "--w3", "0"], capsys)[1]
        assert a == b


class TestOtherCommands:
    def test_hypergraph_chain(self, tmp_path, capsys):
        sel = tmp_path / "sel.jsonl"
        run(["select", *GRAMMAR, *CORPUS, "--exact", "--out", str(sel)], capsys)
        code, out, _ = run(["hypergraph", *GRAMMAR, *CORPUS, "--selection", str(sel)], capsys)
        assert code == 0
        first = out.split("\n\n")[0].splitlines()
        assert first[0] == "# id = staff" and first[1] == "7"

    def test_hypergraph_bad_selection(self, tmp_path, capsys):
        (tmp_path / "sel.jsonl").write_text('{"sentence_id": "staff", "selected": [{"construction": "x--y"}]}\n')
        code, _, err = run(["hypergraph", *GRAMMAR, *CORPUS, "--selection", str(tmp_path / "sel.jsonl")], capsys)
        assert code == 2 and "sel.jsonl:1:" in err

    def test_metrics_hand_corpus(self, tmp_path, capsys):
        (tmp_path / "inv.txt").write_text("DET--ADJ--NOUN\n")
        corpus = write_corpus(tmp_path / "c.tsv", [
            ("a", "the/DET big/ADJ dog/NOUN ran/VERB ,/PUNCT a/DET small/ADJ cat/NOUN hid/VERB ./PUNCT"),
            ("b", "run/VERB fast/ADV now/ADV !/PUNCT ok/INTJ"),
        ])
        code, out, _ = run(["metrics", "--inventory", str(tmp_path / "inv.txt"), "--corpus", str(corpus),
                            "--jobs", "2"], capsys)
        rec = json.loads(out)
        assert code == 0 and rec["aoc"] == "1/10" and rec["acr"] == "3/10" and rec["sentences"] == 2

    def test_metrics_empty(self, tmp_path, capsys):
        (tmp_path / "c.tsv").write_text("\n")
        code, out, _ = run(["metrics", *GRAMMAR, "--corpus", str(tmp_path / "c.tsv")], capsys)
        assert code == 0 and json.loads(out)["aoc"] is None

    def test_network_table(self, capsys):
        code, out, err = run(["network", "--inventory", str(DATA / "network_inventory.txt"),
                              "--lexicon", str(DATA / "network_lexicon.tsv"),
                              "--embeddings", str(DATA / "network_embeddings.txt"),
                              "--k", "8", "--format", "records"], capsys)
        assert code == 0
        rows = {tuple(ln.split("\t")[:3]) for ln in out.splitlines()}
        assert ("think--PRON--AUX", "know--PRON--AUX", "polysemy") in rows
        assert ("SCONJ--PRON--AUX--VERB--to", "SCONJ--PRON--AUX--VERB", "subpart") in rows
        assert ("if--PRON--AUX", "if--PRON--can", "instance") in rows
        assert "polysemy=3" in err

    def test_network_from_params(self, tmp_path, capsys):
        params = rhgat.init_params(4, 9, seed=1)
        rhgat.save_params(params, tmp_path / "p.bin")
        code, out, _ = run(["network", "--inventory", str(DATA / "network_inventory.txt"),
                            "--lexicon", str(DATA / "network_lexicon.tsv"), "--embeddings", str(tmp_path / "p.bin"),
                            "--k", "8"], capsys)
        assert code == 0 and out.startswith("digraph")

    def test_network_row_mismatch(self, tmp_path, capsys):
        (tmp_path / "e.txt").write_text("2 2\n1 0\n0 1\n")
        code, _, _ = run(["network", "--inventory", str(DATA / "network_inventory.txt"),
                          "--embeddings", str(tmp_path / "e.txt")], capsys)
        assert code == 2

    def test_toy_train_zero_epochs(self, tmp_path, capsys):
        out = tmp_path / "p.bin"
        code, _, _ = run(["toy-train", "--epochs", "0", "--d", "4", "--instances", "10", "--seed", "5",
                          "--out", str(out)], capsys)
        assert code == 0
        got = rhgat.load_params(out)
        want = rhgat.init_params(4, 8, seed=5)
        for (_, a), (_, b) in zip(got.tensors(), want.tensors()):
            np.testing.assert_array_equal(a, b)

    def test_toy_train_needs_out(self, capsys):
        assert run(["toy-train", "--epochs", "0"], capsys)[0] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cxgkit", "match", *GRAMMAR, *CORPUS],
                         capture_output=True, check=True)
    assert res.stdout.count(b"\n") == 21
