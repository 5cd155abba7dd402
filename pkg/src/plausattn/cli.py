"""Command-line entry point.

Subcommands: ingest, heuristics, train, sweep, evaluate, render, report.
Every command is a thin composition of module operations. Exit codes:
0 success, 2 partial sweep failure, 1 fatal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import heuristic as heuristic_mod
from . import trainer as trainer_mod
from .corpus import Task, read_jsonl, write_jsonl
from .model import load_checkpoint, load_glove_text
from .render import build_document, render_html, render_text
from .tagging import get_tagger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plausattn",
                                     description="attention plausibility toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config yaml")
    common.add_argument("--seed", type=int, default=None, help="override run seed")
    common.add_argument("--deterministic", action="store_true",
                        help="force deterministic mode")
    common.add_argument("--out", default=None, help="output directory or file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="corpus -> canonical jsonl")
    p.add_argument("--corpus", required=True, choices=corpus_mod.CORPUS_NAMES)
    p.add_argument("--in", dest="input", help="source corpus directory/file")
    p.add_argument("--split", default="train")
    p.add_argument("--tagger", default="spacy", help="'spacy' or 'fixture:<path>'")
    p.add_argument("--max-tokens", type=int, default=None,
                   help="drop examples longer than this many tokens")
    p.add_argument("--min-annotators", type=int, default=2)
    p.add_argument("--synthetic-n", type=int, default=1000)

    p = sub.add_parser("heuristics", parents=[common],
                       help="canonical jsonl -> heuristic target maps")
    p.add_argument("--corpus", dest="corpus_jsonl", required=True)
    p.add_argument("--task", required=True, choices=[t.value for t in Task])
    p.add_argument("--embeddings", help="glove text file (nli weighting)")
    p.add_argument("--freq-table", help="write the lemma frequency table csv here")

    sub.add_parser("train", parents=[common], help="single training run")

    p = sub.add_parser("sweep", parents=[common], help="grid of runs")
    p.add_argument("--kinds", help="comma list of constraint kinds")
    p.add_argument("--layers", help="comma list of bi-LSTM depths")
    p.add_argument("--lambdas", help="comma list of lambda values (default: config grid)")

    p = sub.add_parser("evaluate", parents=[common], help="re-evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="val")

    p = sub.add_parser("render", parents=[common], help="token heatmap document")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="canonical jsonl with examples")
    p.add_argument("--heuristic", help="heuristic maps jsonl")
    p.add_argument("--format", default="text", choices=["text", "html"])
    p.add_argument("--raw", action="store_true", help="show raw softmax values")
    p.add_argument("--limit", type=int, default=20)

    p = sub.add_parser("report", parents=[common], help="result tables from a store")
    p.add_argument("--store", required=True)
    p.add_argument("--axes", default="corpus,constraint,layers,lambda",
                   help="comma list of grouping axes")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    return {
        "ingest": cmd_ingest,
        "heuristics": cmd_heuristics,
        "train": cmd_train,
        "sweep": cmd_sweep,
        "evaluate": cmd_evaluate,
        "render": cmd_render,
        "report": cmd_report,
    }[args.command](args)


def _load_config(args) -> trainer_mod.ExperimentConfig:
    if not args.config:
        raise ValueError("this command needs --config <yaml>")
    config = trainer_mod.load_experiment_config(args.config)
    if args.deterministic:
        config = config.with_updates(deterministic=True)
    if args.out:
        config = config.with_updates(out_dir=args.out)
    return config


def cmd_ingest(args) -> int:
    out = args.out
    if not out:
        raise ValueError("ingest needs --out <jsonl>")
    tagger = None
    if args.corpus != "synthetic":
        if not args.input:
            raise ValueError("ingest needs --in <dir> for file corpora")
        tagger = get_tagger(args.tagger)
    synthetic_options = {"n": args.synthetic_n}
    if args.seed is not None:
        synthetic_options["seed"] = args.seed
    result = corpus_mod.load_corpus(
        args.corpus, args.input, args.split, tagger,
        min_annotators=args.min_annotators, synthetic_options=synthetic_options)
    examples = result.examples
    if args.max_tokens is not None:
        examples = corpus_mod.filter_max_tokens(examples, args.max_tokens)
    n = write_jsonl(examples, out)
    print(f"wrote {n} examples to {out} "
          f"(skipped {result.n_skipped}, annotations dropped {result.n_annotation_dropped})")
    return 0


def cmd_heuristics(args) -> int:
    if not args.out:
        raise ValueError("heuristics needs --out <jsonl>")
    examples = read_jsonl(args.corpus_jsonl)
    task = Task(args.task)
    embeddings = None
    frequency = None
    if task is Task.NLI:
        if not args.embeddings:
            raise ValueError("nli heuristics need --embeddings <glove text file>")
        embeddings = load_glove_text(args.embeddings)
    else:
        frequency = heuristic_mod.build_frequency_table(examples)
        if args.freq_table:
            frequency.save_csv(args.freq_table)
    maps = heuristic_mod.build_maps_for_corpus(examples, task,
                                               frequency=frequency, embeddings=embeddings)
    heuristic_mod.write_heuristic_jsonl(maps, args.out)
    print(f"wrote heuristic maps for {len(maps)} examples to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    seed = args.seed if args.seed is not None else config.seeds[0]
    record = trainer_mod.train_one(config, seed)
    print(json.dumps({"config_hash": record.config_hash, "seed": record.seed,
                      "status": record.status, "final": record.final,
                      "checkpoint": record.checkpoint_path}, indent=1, sort_keys=True))
    return 0 if record.status == "ok" else 1


def _csv_list(raw, cast):
    return [cast(x) for x in raw.split(",") if x.strip()] if raw else None


def cmd_sweep(args) -> int:
    config = _load_config(args)
    store = args.out or config.out_dir
    configs = trainer_mod.expand_grid(
        config,
        kinds=_csv_list(args.kinds, str),
        lambdas=_csv_list(args.lambdas, float),
        layers=_csv_list(args.layers, int))
    result = trainer_mod.sweep(configs, store, progress=True)
    print(f"sweep done: {result.n_new} new, {result.n_reused} reused, "
          f"{result.n_failed} failed (store: {store})")
    return 2 if result.n_failed else 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    report = trainer_mod.evaluate_checkpoint(args.checkpoint, config, split=args.split)
    print(report.to_json())
    return 0


def cmd_render(args) -> int:
    if not args.out:
        raise ValueError("render needs --out <file>")
    model, vocab_hash, extra = load_checkpoint(args.checkpoint)
    examples = read_jsonl(args.data)[: args.limit]
    if not examples:
        raise ValueError(f"no examples in {args.data}")
    heuristic_maps = (heuristic_mod.read_heuristic_jsonl(args.heuristic)
                      if args.heuristic else {})
    # the checkpoint and the data must share a vocabulary to be meaningful
    vocab = corpus_mod.Vocabulary.from_examples(examples)
    if model.config.vocab_size < len(vocab):
        raise ValueError("checkpoint vocabulary is smaller than the rendered corpus; "
                         "render from the corpus the model was trained on")
    records = []
    for batch in corpus_mod.batchify(examples, 16, vocab):
        probs, atts = model.forward_batch(batch)
        for b, ex_id in enumerate(batch.example_ids):
            ex = next(e for e in examples if e.id == ex_id)
            segments = []
            for s, att in enumerate(atts):
                L = int(batch.segments[s].lengths[b])
                seg = {
                    "tokens": [t.surface for t in ex.segments[s]],
                    "model": att.map[b, :L].detach().numpy().tolist(),
                    "human": ex.annotation[s] if ex.annotation else None,
                }
                if ex_id in heuristic_maps:
                    seg["heuristic"] = heuristic_maps[ex_id][s].values.tolist()
                segments.append(seg)
            records.append({"id": ex_id, "segments": segments})
    constraint = extra.get("constraint_kind", "unknown")
    lam = extra.get("lam", float("nan"))
    doc = build_document(records, constraint, lam, scale_model_track=not args.raw)
    text = render_html(doc) if args.format == "html" else render_text(doc)
    Path(args.out).write_text(text, encoding="utf-8")
    print(f"wrote {args.format} heatmap for {len(records)} examples to {args.out}")
    return 0


def cmd_report(args) -> int:
    store = Path(args.store)
    records = [r for r in trainer_mod.read_store(store)]
    if not records:
        raise ValueError(f"result store {store} is empty")
    axes = [a.strip() for a in args.axes.split(",") if a.strip()]
    known = {"corpus", "constraint", "layers", "lambda"}
    for axis in axes:
        if axis not in known:
            raise ValueError(f"unknown report axis {axis!r} (choose from {sorted(known)})")
    out_dir = Path(args.out or store)
    out_dir.mkdir(parents=True, exist_ok=True)
    long_rows = []
    for rec in records:
        if rec.status != "ok":
            continue
        cfg = rec.config
        base = {
            "corpus": cfg["corpus"],
            "constraint": cfg["constraint"]["kind"],
            "layers": cfg["model"]["num_bilstm_layers"],
            "lambda": cfg["constraint"]["lam"],
            "seed": rec.seed,
        }
        for metric, value in trainer_mod._record_metrics(rec).items():
            long_rows.append({**base, "metric": metric, "value": value})
    if not long_rows:
        raise ValueError(f"result store {store} has no successful runs")
    long_path = out_dir / "results_long.csv"
    with open(long_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["corpus", "constraint", "layers",
                                               "lambda", "seed", "metric", "value"])
        writer.writeheader()
        for row in long_rows:
            writer.writerow({**row, "value": repr(row["value"])})

    grouped: dict[tuple, list[float]] = {}
    for row in long_rows:
        key = tuple(row[a] for a in axes) + (row["metric"],)
        grouped.setdefault(key, []).append(row["value"])
    agg_path = out_dir / "results_aggregated.csv"
    with open(agg_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(axes + ["metric", "n", "mean", "min", "max"])
        for key, values in sorted(grouped.items(), key=lambda kv: tuple(map(str, kv[0]))):
            writer.writerow(list(key) + [len(values), repr(float(np.mean(values))),
                                         repr(float(np.min(values))),
                                         repr(float(np.max(values)))])
    print(f"wrote {long_path} and {agg_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
