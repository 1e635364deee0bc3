"""Command-line entry point: ``funcgnn {gen-corpus,ged,train,eval,predict,bench}``.

Exit codes: 0 success, 1 usage error, 2 data error (bad/missing file, parse
failure, checkpoint or config mismatch), 3 compute error (budget exhausted,
non-finite training values).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .autodiff import NonFiniteError
from .corpus import CorpusError, ParseError, builtin_programs, cfg_from_source, generate_corpus, load_programs
from .experiment import compare_runtimes
from .ged import DEFAULT_BUDGET, DEFAULT_EXACT_LIMIT, METHODS, GedBudgetExhausted
from .graph_core import DatasetError, GraphPairRecord, LabeledCfg, read_graph, read_pair_dataset, write_pair_dataset
from .model import CheckpointError, ModelConfig, forward, load_checkpoint, save_checkpoint
from .train import TrainConfig, TrainingError, evaluate_methods, split_dataset, train, write_loss_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_COMPUTE = 0, 1, 2, 3
CONFIG_VERSION = 1

log = logging.getLogger("funcgnn")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class ComputeError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- helpers ---------------------------------------------------------------------


def load_graph(path: str) -> LabeledCfg:
    """A ``.mini`` source file becomes its CFG; anything else is read as a JSON graph."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{path}: no such file")
    if p.suffix == ".mini":
        try:
            return cfg_from_source(p.read_text(encoding="utf-8"), p.stem)
        except ParseError as exc:
            raise DataError(f"{path}: {exc}") from None
    try:
        return read_graph(p)
    except DatasetError as exc:
        raise DataError(str(exc)) from None


def load_dataset(path: str) -> list[GraphPairRecord]:
    if not Path(path).is_file():
        raise DataError(f"{path}: no such file")
    try:
        return read_pair_dataset(path)
    except DatasetError as exc:
        raise DataError(str(exc)) from None


def load_model(path: str):
    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise DataError(str(exc)) from None


def load_run_config(path: str | None, seed: int | None) -> tuple[dict, TrainConfig]:
    """Read ``{"version": 1, "model": {...}, "train": {...}}``; --seed overrides both seeds."""
    model_kw: dict = {}
    train_kw: dict = {}
    if path:
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: cannot read config: {exc}") from None
        if not isinstance(obj, dict):
            raise DataError(f"{path}: config must be a JSON object")
        if obj.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise DataError(f"{path}: config version {obj.get('version')} != supported {CONFIG_VERSION}")
        model_kw = dict(obj.get("model", {}))
        train_kw = dict(obj.get("train", {}))
        allowed_m = {f.name for f in fields(ModelConfig)} - {"vocab_size"}
        allowed_t = {f.name for f in fields(TrainConfig)}
        unknown = sorted(set(model_kw) - allowed_m) + sorted(set(train_kw) - allowed_t)
        if unknown:
            raise DataError(f"{path}: unknown config keys {unknown}")
    if seed is not None:
        model_kw["seed"] = seed
        train_kw["seed"] = seed
    try:
        return model_kw, TrainConfig(**train_kw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad train config: {exc}") from None


def _histogram_lines(values, bins: int = 10, width: int = 40) -> list[str]:
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    top = max(int(counts.max()), 1)
    lines = []
    for k, (lo, hi, c) in enumerate(zip(edges, edges[1:], counts)):
        close = "]" if k == bins - 1 else ")"  # numpy's last bin includes its right edge
        lines.append(f"  [{lo:.1f}, {hi:.1f}{close} {c:7d} {'#' * round(width * c / top)}")
    return lines


def corpus_summary(records: list[GraphPairRecord]) -> dict:
    graphs = {}
    for r in records:
        graphs.setdefault(r.graph_1, None)
        graphs.setdefault(r.graph_2, None)
    sizes = np.array([len(g) for g in graphs])
    sims = np.array([r.similarity for r in records])
    prov: dict[str, int] = {}
    for r in records:
        prov[r.provenance] = prov.get(r.provenance, 0) + 1
    return {
        "graphs": len(graphs),
        "pairs": len(records),
        "nodes_min": int(sizes.min()),
        "nodes_mean": float(sizes.mean()),
        "nodes_max": int(sizes.max()),
        "similarity_mean": float(sims.mean()),
        "similarity_var": float(sims.var()),
        "provenance": prov,
        "similarity_histogram": np.histogram(sims, bins=10, range=(0.0, 1.0))[0].tolist(),
    }


# --- subcommands -------------------------------------------------------------------


def cmd_gen_corpus(args) -> int:
    if args.builtin:
        programs = builtin_programs()
        if args.programs is not None:
            programs = programs[: args.programs]
    else:
        try:
            programs = load_programs(args.src)
        except FileNotFoundError as exc:
            raise DataError(str(exc)) from None
        for prog in programs:
            try:
                cfg_from_source(prog.source, prog.name)
            except ParseError as exc:
                raise DataError(f"{Path(args.src) / (prog.name + '.mini')}: {exc}") from None
    try:
        records = generate_corpus(
            programs, args.mutants, exact_node_limit=args.exact_limit, seed=args.seed, workers=args.workers, budget=args.budget
        )
    except CorpusError as exc:
        if isinstance(exc.__cause__, GedBudgetExhausted):
            raise ComputeError(str(exc)) from None
        raise DataError(str(exc)) from None
    write_pair_dataset(records, args.out)
    s = corpus_summary(records)
    if args.json:
        print(json.dumps(s))
    else:
        print(f"graphs: {s['graphs']}  pairs: {s['pairs']}")
        print(f"nodes per graph: min {s['nodes_min']}  mean {s['nodes_mean']:.2f}  max {s['nodes_max']}")
        print("labels: " + ", ".join(f"{k} {v}" for k, v in sorted(s["provenance"].items())))
        print(f"similarity: mean {s['similarity_mean']:.4f}  var {s['similarity_var']:.4f}")
        print("\n".join(_histogram_lines([r.similarity for r in records])))
    return EXIT_OK


def cmd_ged(args) -> int:
    g1, g2 = load_graph(args.g1), load_graph(args.g2)
    fn = METHODS[args.method]
    try:
        res = fn(g1, g2, budget=args.budget) if args.method == "exact" else fn(g1, g2)
    except GedBudgetExhausted as exc:
        if args.json:
            print(json.dumps({"error": "budget_exhausted", "lower_bound": exc.lower_bound, "upper_bound": exc.upper_bound}))
        raise ComputeError(str(exc)) from None
    out = {
        "method": args.method,
        "distance": res.distance,
        "kind": res.kind,
        "similarity": res.similarity(len(g1), len(g2)),
        "elapsed": res.elapsed,
        "expanded_states": res.expanded_states,
    }
    if args.json:
        print(json.dumps(out))
    else:
        print(f"distance {res.distance:g} ({res.kind})  similarity {out['similarity']:.6f}  elapsed {res.elapsed:.4f}s")
    return EXIT_OK


def cmd_train(args) -> int:
    records = load_dataset(args.data)
    model_kw, tcfg = load_run_config(args.config, args.seed)
    tcfg = TrainConfig(**{**asdict(tcfg), "checkpoint_path": args.out})
    if args.epochs is not None:
        tcfg = TrainConfig(**{**asdict(tcfg), "epochs": args.epochs})
    train_set, test_set = split_dataset(records, tcfg.split_ratio, tcfg.seed)
    try:
        mcfg = ModelConfig(vocab_size=1, **model_kw)
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad model config: {exc}") from None
    try:
        res = train(train_set, test_set, mcfg, tcfg)
    except (TrainingError, NonFiniteError) as exc:
        raise ComputeError(str(exc)) from None
    # the checkpoint on disk must hold the returned (best-test) parameters
    save_checkpoint(args.out, res.config, res.vocab, res.params)
    curves = args.curves or str(Path(args.out).with_suffix(".loss.csv"))
    write_loss_csv(res.curves, curves)
    best = res.curves[res.best_epoch]
    print(f"train pairs {len(train_set)}  test pairs {len(test_set)}  vocabulary {res.vocab.size}")
    print(f"best epoch {res.best_epoch}: train mse {best[1]:.6f}  test mse {best[2]:.6f}  ({res.elapsed:.1f}s)")
    print(f"checkpoint {args.out}  curves {curves}")
    return EXIT_OK


def _eval_records(args) -> list[GraphPairRecord]:
    records = load_dataset(args.data)
    if args.split == "all":
        return records
    _, test = split_dataset(records, args.split_ratio, args.seed)
    return test


def cmd_eval(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in ("funcgnn", *METHODS)]
    if unknown or not methods:
        raise UsageError(f"unknown methods {unknown}; choose from funcgnn,exact,lsap,hed")
    model = None
    if "funcgnn" in methods:
        if not args.checkpoint:
            raise UsageError("--checkpoint is required when evaluating funcgnn")
        model = load_model(args.checkpoint)
    test = _eval_records(args)
    report = evaluate_methods(test, model, methods, args.workers, exact_node_limit=args.exact_limit, budget=args.budget)
    if args.out:
        report.write_json(args.out)
    print(report.table())
    return EXIT_OK


def cmd_predict(args) -> int:
    config, vocab, params = load_model(args.checkpoint)
    g1, g2 = load_graph(args.g1), load_graph(args.g2)
    y = forward(g1, g2, vocab, params, config)
    unseen = sorted({x for g in (g1, g2) for x in g.labels if x not in vocab})
    if args.json:
        print(json.dumps({"similarity": y, "unseen_labels": len(unseen)}))
    else:
        print(f"{y:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    model = load_model(args.checkpoint)
    test = _eval_records(args)
    cmp = compare_runtimes(test, model, args.repeat, args.exact_limit, args.budget)
    if args.json:
        print(json.dumps(cmp.to_json()))
    else:
        t = cmp.seconds
        print(f"funcgnn (serial, {cmp.pairs} pairs)  {t['funcgnn']:.4f}s")
        print(f"lsap    (serial, {cmp.pairs} pairs)  {t['lsap']:.4f}s  ratio {cmp.lsap_over_funcgnn:.1f}x")
        print(f"exact   (serial, {cmp.exact_pairs} pairs)  {t['exact']:.4f}s  ratio {cmp.exact_over_funcgnn:.1f}x")
        print(f"funcgnn (serial, {cmp.exact_pairs} pairs)  {t['funcgnn_small']:.4f}s  exact ratio {cmp.exact_over_funcgnn_same_pairs:.1f}x")
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="funcgnn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-corpus", help="build mutants and label every ordered graph pair")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--src", help="directory of *.mini programs")
    src.add_argument("--builtin", action="store_true", help="use the bundled programs")
    g.add_argument("--programs", type=int, default=None, help="with --builtin: keep only the first N (default: all)")
    g.add_argument("--mutants", type=int, default=4, help="mutants per program (default 4)")
    g.add_argument("--out", required=True, help="dataset JSON to write")
    g.add_argument("--exact-limit", type=int, default=DEFAULT_EXACT_LIMIT, help="exact GED up to this many nodes (default 10)")
    g.add_argument("--seed", type=int, default=0, help="mutation seed (default 0)")
    g.add_argument("--workers", type=int, default=1, help="labeling processes (default 1)")
    g.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="exact-search state budget per pair")
    g.add_argument("--json", action="store_true", help="print the summary as JSON")
    g.set_defaults(func=cmd_gen_corpus)

    d = sub.add_parser("ged", help="graph edit distance between two graphs (.mini or JSON)")
    d.add_argument("--g1", required=True)
    d.add_argument("--g2", required=True)
    d.add_argument("--method", choices=sorted(METHODS), default="exact", help="default exact")
    d.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="exact-search state budget")
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_ged)

    t = sub.add_parser("train", help="train funcGNN on a pair dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--config", default=None, help='JSON {"version": 1, "model": {...}, "train": {...}}; defaults otherwise')
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--curves", default=None, help="loss CSV (default: <out>.loss.csv)")
    t.add_argument("--epochs", type=int, default=None, help="override the configured epoch count")
    t.add_argument("--seed", type=int, default=None, help="seed for split, init and shuffling (default: config, else 0)")
    t.set_defaults(func=cmd_train)

    for name, helptext, func in (
        ("eval", "score methods against ground truth (Table-style report)", cmd_eval),
        ("bench", "serial runtime comparison: funcgnn vs lsap vs exact", cmd_bench),
    ):
        e = sub.add_parser(name, help=helptext)
        e.add_argument("--data", required=True)
        e.add_argument("--checkpoint", required=name == "bench", default=None)
        e.add_argument("--split", choices=("test", "all"), default="test", help="evaluate the held-out split (default) or all pairs")
        e.add_argument("--split-ratio", type=float, default=0.8, help="must match training (default 0.8)")
        e.add_argument("--seed", type=int, default=0, help="split seed; must match training (default 0)")
        e.add_argument("--exact-limit", type=int, default=DEFAULT_EXACT_LIMIT)
        e.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
        if name == "eval":
            e.add_argument("--methods", default="funcgnn,lsap,hed", help="comma list of funcgnn,exact,lsap,hed")
            e.add_argument("--workers", type=int, default=1, help="processes for classical methods (default 1)")
            e.add_argument("--out", default=None, help="write the EvalReport JSON here")
        else:
            e.add_argument("--repeat", type=int, default=3, help="best-of-N timing (default 3)")
            e.add_argument("--json", action="store_true")
        e.set_defaults(func=func)

    r = sub.add_parser("predict", help="predicted similarity for one pair")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--g1", required=True)
    r.add_argument("--g2", required=True)
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"funcgnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"funcgnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ComputeError as exc:
        print(f"funcgnn: compute error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"funcgnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
