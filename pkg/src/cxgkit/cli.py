"""``cxgkit`` command line: one subcommand per pipeline stage.

match -> select -> hypergraph chain through JSON-lines files; toy-train,
network and metrics are standalone drivers.  Every command writes one
artifact (``--out``, default stdout) and a short summary on stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from . import constructicon, hypergraph, matcher, rhgat, selector
from .grammar import GrammarError, Lexicon, load_inventory, load_lexicon

SEED_STRIDE = 1000003

_SELECTOR_FLAGS = {
    "w1": "w1", "w2": "w2", "w3": "w3", "s_syn": "s_syn", "s_sem": "s_sem", "s_lex": "s_lex",
    "t0": "t0", "tf": "tf", "kmax": "k_max", "flip_ratio": "flip_ratio",
}


class CliError(Exception):
    pass


# --- worker plumbing ------------------------------------------------------------
# Workers receive the shared state once through the pool initializer.

_STATE: dict = {}


def _init_worker(state):
    _STATE.clear()
    _STATE.update(state)


def _run(fn, items, jobs, state):
    if jobs <= 1 or len(items) <= 1:
        _init_worker(state)
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(state,)) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _match_worker(sentence):
    return matcher.match_all(sentence, _STATE["inventory"])


def _select_worker(item):
    index, universe = item
    cfg = replace(_STATE["config"], seed=_STATE["config"].seed * SEED_STRIDE + index)
    if not universe:
        return selector.Selection.empty(universe)
    if _STATE["exact"] and len(universe) <= selector.EXACT_LIMIT:
        return selector.solve_exact(universe, cfg)
    return selector.solve_sa(universe, cfg)


def _metrics_worker(sentence):
    inv = _STATE["inventory"]
    n = len(sentence)
    return (Fraction(len(matcher.match_all(sentence, inv)), n),
            Fraction(matcher.coverage_lengths(sentence, inv, _STATE["config"]), n))


# --- loading helpers -------------------------------------------------------------

def _load_grammar(args):
    if not args.inventory:
        raise CliError("--inventory is required")
    lexicon = load_lexicon(args.lexicon) if args.lexicon else Lexicon()
    return load_inventory(args.inventory, lexicon)


def _load_corpus(args):
    if not args.corpus:
        raise CliError("--corpus is required")
    return matcher.load_corpus(args.corpus)


def _selector_config(args) -> selector.SelectorConfig:
    cfg = selector.SelectorConfig.from_file(args.config) if args.config else selector.SelectorConfig()
    overrides = {field: getattr(args, flag) for flag, field in _SELECTOR_FLAGS.items()
                 if getattr(args, flag) is not None}
    overrides["seed"] = args.seed
    return replace(cfg, **overrides)


def _emit(args, text: str | bytes):
    data = text.encode("utf-8") if isinstance(text, str) else text
    if args.out in (None, "-"):
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(args.out).write_bytes(data)


def _summary(name, started, **counts):
    parts = " ".join(f"{k}={v}" for k, v in counts.items())
    print(f"[{name}] {parts} time={time.perf_counter() - started:.3f}s", file=sys.stderr)


def _rational(x: Fraction) -> str:
    return str(x)


# --- subcommands -------------------------------------------------------------------

def cmd_match(args) -> int:
    t = time.perf_counter()
    inv = _load_grammar(args)
    corpus = _load_corpus(args)
    results = _run(_match_worker, corpus, args.jobs, {"inventory": inv})
    lines = [matcher.match_record(s.sentence_id, mt) for s, ms in zip(corpus, results) for mt in ms]
    _emit(args, "".join(ln + "\n" for ln in lines))
    _summary("match", t, sentences=len(corpus), matches=len(lines))
    return 0


def _universes(args, inv, corpus):
    if args.matches:
        grouped = matcher.read_match_records(args.matches, inv)
        known = {s.sentence_id for s in corpus}
        stray = sorted(set(grouped) - known)
        if stray:
            raise CliError(f"{args.matches}: match records for unknown sentence {stray[0]!r}")
        out = []
        for s in corpus:
            ms = sorted(grouped.get(s.sentence_id, []), key=lambda mt: (mt.start, mt.construction_id))
            for mt in ms:
                if mt.end > len(s):
                    raise CliError(f"{args.matches}: span [{mt.start}, {mt.end}) exceeds sentence {s.sentence_id!r}")
            out.append(ms)
        return out
    return _run(_match_worker, corpus, args.jobs, {"inventory": inv})


def selection_record(sentence_id, sel: selector.Selection, config) -> str:
    br = selector.score(sel, config)
    chosen = [{"construction": mt.label, "start": mt.start, "end": mt.end} for mt in sel.chosen]
    return json.dumps({
        "sentence_id": sentence_id, "selected": chosen, "n_candidates": len(sel.universe),
        "s_ob1": _rational(br.s_ob1), "s_ob2": _rational(br.s_ob2), "s_ob3": _rational(br.s_ob3),
        "total": _rational(br.total), "total_float": float(br.total),
    }, sort_keys=True)


def cmd_select(args) -> int:
    t = time.perf_counter()
    inv = _load_grammar(args)
    corpus = _load_corpus(args)
    cfg = _selector_config(args)
    universes = _universes(args, inv, corpus)
    state = {"config": cfg, "exact": args.exact}
    sels = _run(_select_worker, list(enumerate(universes)), args.jobs, state)
    lines = [selection_record(s.sentence_id, sel, cfg) for s, sel in zip(corpus, sels)]
    _emit(args, "".join(ln + "\n" for ln in lines))
    _summary("select", t, sentences=len(corpus), candidates=sum(map(len, universes)),
             selected=sum(len(sel.indices) for sel in sels), solver="exact" if args.exact else "sa")
    return 0


def _read_selections(path, inv):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                ms = []
                for item in rec["selected"]:
                    cid = inv.id_of(item["construction"])
                    ms.append(matcher.Match(cid, int(item["start"]), int(item["end"]), inv[cid].slots))
                out[rec["sentence_id"]] = ms
            except (ValueError, KeyError, TypeError) as exc:
                raise GrammarError(f"bad selection record: {exc}", str(path), lineno) from None
    return out


def cmd_hypergraph(args) -> int:
    t = time.perf_counter()
    inv = _load_grammar(args)
    corpus = _load_corpus(args)
    if not args.selection:
        raise CliError("--selection is required (output of the select command)")
    chosen = _read_selections(args.selection, inv)
    blocks, n_edges = [], 0
    for s in corpus:
        try:
            h = hypergraph.build(len(s), chosen.get(s.sentence_id, []))
        except ValueError as exc:
            raise CliError(f"{args.selection}: sentence {s.sentence_id!r}: {exc}") from None
        n_edges += h.n_edges
        blocks.append(f"# id = {s.sentence_id}\n" + hypergraph.to_text(h, inv.labels))
    _emit(args, "\n".join(blocks))
    _summary("hypergraph", t, sentences=len(corpus), hyperedges=n_edges)
    return 0


def cmd_toy_train(args) -> int:
    t = time.perf_counter()
    if args.out in (None, "-"):
        raise CliError("toy-train writes a binary parameter file; pass --out PATH")
    data = rhgat.hyperedge_presence_task(args.instances, args.d, n_constructions=args.constructions,
                                         seed=args.seed)
    params = rhgat.init_params(args.d, args.constructions, n_outputs=2, n_layers=args.layers, seed=args.seed)
    trained, trace = rhgat.train_toy(data, params,
                                     rhgat.TrainConfig(args.lr, args.epochs, args.seed, args.weight_decay))
    rhgat.save_params(trained, args.out)
    first = f"{trace[0]:.6f}" if trace else "n/a"
    last = f"{trace[-1]:.6f}" if trace else "n/a"
    _summary("toy-train", t, instances=len(data), epochs=len(trace), first_loss=first, last_loss=last,
             accuracy=f"{rhgat.accuracy(data, trained):.4f}")
    return 0


def _load_embeddings(path):
    with open(path, "rb") as fh:
        head = fh.read(6)
    if head == rhgat._MAGIC:
        return rhgat.load_params(path).Ec
    return constructicon.load_embeddings(path)


def cmd_network(args) -> int:
    t = time.perf_counter()
    inv = _load_grammar(args)
    if not args.embeddings:
        raise CliError("--embeddings is required")
    emb = _load_embeddings(args.embeddings)
    if emb.shape[0] != len(inv):
        raise CliError(f"{args.embeddings}: {emb.shape[0]} embedding rows for {len(inv)} constructions")
    graph = constructicon.build_network(inv, emb, constructicon.NetworkConfig(args.k, args.gamma))
    _emit(args, constructicon.export(graph, inv, args.format))
    counts = {r.value: len(graph.relation_edges(r)) for r in constructicon.Relation}
    _summary("network", t, constructions=len(inv), **counts)
    return 0


def cmd_metrics(args) -> int:
    t = time.perf_counter()
    inv = _load_grammar(args)
    corpus = _load_corpus(args)
    cfg = _selector_config(args)
    terms = _run(_metrics_worker, corpus, args.jobs, {"inventory": inv, "config": cfg})
    rec: dict = {"sentences": len(corpus)}
    if corpus:
        a = sum((x for x, _ in terms), Fraction(0)) / len(corpus)
        c = sum((y for _, y in terms), Fraction(0)) / len(corpus)
        rec.update(aoc=_rational(a), aoc_float=float(a), acr=_rational(c), acr_float=float(c))
    else:
        rec.update(aoc=None, aoc_float=None, acr=None, acr_float=None)
    _emit(args, json.dumps(rec, sort_keys=True) + "\n")
    _summary("metrics", t, sentences=len(corpus), aoc=rec["aoc"], acr=rec["acr"])
    return 0


# --- argument parsing ---------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--inventory", help="construction inventory, one label per line")
    common.add_argument("--lexicon", help="word<TAB>POS[,POS]<TAB>cluster lexicon")
    common.add_argument("--corpus", help="tab-separated annotated corpus")
    common.add_argument("--out", default="-", help="output path (default stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")

    sel = argparse.ArgumentParser(add_help=False)
    for flag in _SELECTOR_FLAGS:
        kind = int if flag == "kmax" else float
        sel.add_argument("--" + flag.replace("_", "-"), dest=flag, type=kind, default=None)
    sel.add_argument("--config", help="key = value selector config file")

    p = argparse.ArgumentParser(prog="cxgkit", description="Construction-grammar processing toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("match", parents=[common], help="extract all construction matches")
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("select", parents=[common, sel], help="choose a non-redundant subset per sentence")
    sp.add_argument("--matches", help="match records from the match command (default: recompute)")
    sp.add_argument("--exact", action="store_true", help="exhaustive search for small universes")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("hypergraph", parents=[common], help="build sentence hypergraphs")
    sp.add_argument("--selection", help="selection records from the select command")
    sp.set_defaults(func=cmd_hypergraph)

    sp = sub.add_parser("toy-train", parents=[common], help="train the encoder on a synthetic task")
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--lr", type=float, default=0.02)
    sp.add_argument("--weight-decay", type=float, default=0.0)
    sp.add_argument("--d", type=_positive_int, default=16)
    sp.add_argument("--instances", type=_positive_int, default=500)
    sp.add_argument("--constructions", type=_positive_int, default=8)
    sp.add_argument("--layers", type=_positive_int, default=1)
    sp.set_defaults(func=cmd_toy_train)

    sp = sub.add_parser("network", parents=[common], help="type inheritance links between constructions")
    sp.add_argument("--embeddings", help="|V| d text table or a saved parameter file")
    sp.add_argument("--k", type=_positive_int, default=15)
    sp.add_argument("--gamma", type=float, default=10.0)
    sp.add_argument("--format", choices=("dot", "records"), default="dot")
    sp.set_defaults(func=cmd_network)

    sp = sub.add_parser("metrics", parents=[common, sel], help="AoC and ACR sparsity metrics")
    sp.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GrammarError, CliError, OSError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"cxgkit {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
