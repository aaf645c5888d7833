"""relbootstrap command line: per-stage commands plus the end-to-end runner.

Every pipeline stage is a subcommand. Stage subcommands accept --config to
run inside a configured working directory; the data-flow commands (harvest,
markup, silver, assemble, train, predict, eval, report-matrix, serve-review)
also run standalone on explicit file arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .filtering import FilterConfig, LookupTypeTagger, filter_candidates, relation_embeddings, tag_entity_types
from .harvest import (
    ingest_corpus,
    load_catalog,
    load_corpus_dir,
    load_pair_table,
    retrieve_evidence,
    sample_entity_pairs,
    select_relations,
)
from .markup import MarkupScheme, render_markup
from .metrics import EvalReport, evaluate, render_transfer_matrix
from .minicorpus import build_mini_corpus
from .model import group_by_lang, instance_to_dict, read_records, write_records
from .pipeline import (
    PipelineConfig,
    PrerequisiteError,
    make_embedder,
    make_translator,
    run,
    summarize_instances,
)
from .probe import load_model, predict_batch, save_model, train as train_probe
from .scenarios import load_scenario, assemble_scenario
from .silver import batch_silver


def _config_from(args) -> PipelineConfig:
    return PipelineConfig.from_file(args.config)


def _stage_via_config(args, stage: str) -> int:
    manifests = run(_config_from(args), stage)
    for m in manifests:
        print(m)
    return 0


def cmd_harvest(args) -> int:
    if args.config:
        return _stage_via_config(args, "harvest")
    catalog = load_catalog(args.catalog)
    selected = select_relations(catalog, args.budget)
    table = load_pair_table(args.pairs)
    index = ingest_corpus(load_corpus_dir(args.corpus))
    candidates = []
    seen = set()
    for rel in selected:
        if rel.id not in table.by_relation:
            continue
        for e1, e2 in sample_entity_pairs(rel.id, table, args.pairs_per_relation, args.seed):
            for inst in retrieve_evidence(index, e1, e2, rel.id, k=args.k):
                if inst.id not in seen:
                    seen.add(inst.id)
                    candidates.append(inst)
    candidates.sort(key=lambda i: i.id)
    write_records(candidates, args.out)
    print(f"wrote {len(candidates)} candidates to {args.out}")
    return 0


def cmd_filter(args) -> int:
    if args.config:
        return _stage_via_config(args, "filter")
    candidates = read_records(args.infile)
    provider = make_embedder(args.embedder)
    catalog = load_catalog(args.catalog)
    cfg = FilterConfig(tau=args.tau)
    outcome = filter_candidates(candidates, relation_embeddings(catalog.entries, provider), cfg, provider)
    retained = list(outcome.retained)
    if args.type_map:
        tagger = LookupTypeTagger(json.loads(Path(args.type_map).read_text(encoding="utf-8")))
        retained = tag_entity_types(retained, tagger)
    write_records(retained, args.out)
    if args.discards:
        with open(args.discards, "w", encoding="utf-8") as fh:
            for inst, score in outcome.discarded:
                fh.write(json.dumps({"score": score, "instance": instance_to_dict(inst)},
                                    ensure_ascii=False) + "\n")
    print(f"retained {len(retained)} / {len(candidates)}")
    return 0


def cmd_markup(args) -> int:
    if args.config:
        return _stage_via_config(args, "markup")
    scheme = MarkupScheme(kind=args.scheme, language_flag=args.lang_flag)
    instances = read_records(args.infile)
    with open(args.out, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(render_markup(inst, scheme) + "\n")
    print(f"rendered {len(instances)} instances to {args.out}")
    return 0


def cmd_silver(args) -> int:
    if args.config:
        return _stage_via_config(args, "silver")
    translator = make_translator(args.translator, args.lexicon)
    gold = read_records(args.infile)
    silver, skips = batch_silver(gold, translator, args.target_lang)
    write_records(silver, args.out)
    if args.skiplog:
        with open(args.skiplog, "w", encoding="utf-8") as fh:
            for rec in skips:
                fh.write(json.dumps({"id": rec.instance_id, "reason": rec.reason}) + "\n")
    print(f"projected {len(silver)} silver instances ({len(skips)} skipped)")
    return 0


def cmd_assemble(args) -> int:
    if args.config:
        return _stage_via_config(args, "assemble")
    spec = load_scenario(args.scenario)
    gold_by_lang = {}
    for path in sorted(Path(args.data).glob("*.jsonl")):
        for inst in read_records(path):
            gold_by_lang.setdefault(inst.lang, []).append(inst)
    translator = make_translator(args.translator, args.lexicon) if args.translator else None
    assembled = assemble_scenario(spec, gold_by_lang, translator)
    write_records(assembled.train, args.out_train)
    write_records(assembled.test, args.out_test)
    print(f"train={len(assembled.train)} test={len(assembled.test)} skips={len(assembled.skips)}")
    return 0


_CLI_MODES = {"re": "re", "mt_ns": "mt_no_share", "mt_s": "mt_share"}


def _pipeline_cfg_for_standalone(args) -> PipelineConfig:
    # minimal config carrying the markup/pooling/provider knobs
    return PipelineConfig(
        workdir=Path("."), catalog=Path("."), pairs=Path("."), corpus_dir=Path("."),
        languages=(), relation_budget=1, embedder=args.embedder,
        markup_scheme=args.markup_scheme, language_flag=False, pooling=args.scheme,
        learning_rate=args.lr, epochs=args.epochs, l2=args.l2, seed=args.seed,
    )


def cmd_train(args) -> int:
    if args.config:
        return _stage_via_config(args, "train")
    cfg = _pipeline_cfg_for_standalone(args)
    provider = make_embedder(args.embedder)
    instances = read_records(args.infile)
    summaries = summarize_instances(instances, cfg, provider)
    mode = _CLI_MODES[args.mode]
    model = train_probe(
        summaries, [i.relation for i in instances], cfg.train_config(), mode=mode,
        entity_types=None if mode == "re" else [(i.e1.etype, i.e2.etype) for i in instances],
    )
    save_model(model, args.model)
    print(f"trained {mode} model on {len(instances)} instances -> {args.model}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    cfg = PipelineConfig(
        workdir=Path("."), catalog=Path("."), pairs=Path("."), corpus_dir=Path("."),
        languages=(), relation_budget=1, embedder=args.embedder,
        markup_scheme=args.markup_scheme, pooling=model.scheme,
    )
    provider = make_embedder(args.embedder)
    instances = read_records(args.infile)
    preds = predict_batch(model, summarize_instances(instances, cfg, provider))
    with open(args.out, "w", encoding="utf-8") as fh:
        for inst, pred in zip(instances, preds):
            fh.write(json.dumps({"id": inst.id, "pred": pred}) + "\n")
    print(f"wrote {len(preds)} predictions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    if args.config:
        return _stage_via_config(args, "eval")
    golds = read_records(args.gold)
    by_id = {}
    with open(args.pred, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                d = json.loads(line)
                by_id[d["id"]] = d["pred"]
    missing = [i.id for i in golds if i.id not in by_id]
    if missing:
        print(f"error: predictions missing for {len(missing)} instances", file=sys.stderr)
        return 2
    report = evaluate([by_id[i.id] for i in golds], [i.relation for i in golds],
                      [i.id for i in golds])
    Path(args.report).write_text(
        json.dumps(report.to_dict(), indent=1, sort_keys=True), encoding="utf-8"
    )
    print(f"macro_f1={report.macro_f1:.4f} accuracy={report.micro_accuracy:.4f}")
    return 0


def cmd_report_matrix(args) -> int:
    import numpy as np

    results = {}
    targets = []
    for path in sorted(Path(args.results).glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        key = (doc["source"], doc["task"], doc["target"], int(doc.get("k", 0)))
        results[key] = EvalReport(
            labels=(), macro_f1=float(doc["macro_f1"]),
            micro_accuracy=float(doc.get("micro_accuracy", 0.0)),
            per_relation={}, confusion=np.zeros((0, 0), dtype=int), fingerprint="",
        )
        if doc["target"] not in targets:
            targets.append(doc["target"])
    markdown, csv_text = render_transfer_matrix(results, sorted(targets), baseline=args.baseline)
    Path(args.out).write_text(markdown, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


def cmd_report(args) -> int:
    return _stage_via_config(args, "report")


def cmd_serve_review(args) -> int:
    import uvicorn

    from .review import ReviewStore, create_app

    instances = read_records(args.queue)
    catalog = None
    if args.catalog:
        catalog = {r.id: r for r in load_catalog(args.catalog).entries}
    store = ReviewStore(
        instances, mode=args.mode, decisions_path=args.decisions,
        n_per_language=args.n_per_language, catalog=catalog,
        lease_timeout=args.lease_timeout,
    )
    if args.decisions and Path(args.decisions).exists():
        from .review import read_decision_log

        for decision in read_decision_log(args.decisions):
            store._apply(decision)
    app = create_app(store, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_all(args) -> int:
    return _stage_via_config(args, "all")


def cmd_demo_data(args) -> int:
    summary = build_mini_corpus(args.out, seed=args.seed)
    print(json.dumps(summary))
    return 0


def _add_config(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline config JSON; runs this stage in its workdir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relbootstrap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"relbootstrap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("harvest", help="select relations and retrieve candidate evidence")
    _add_config(p)
    p.add_argument("--catalog"), p.add_argument("--pairs"), p.add_argument("--corpus")
    p.add_argument("--budget", type=int, default=51)
    p.add_argument("--k", type=int, default=1000)
    p.add_argument("--pairs-per-relation", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_harvest)

    p = sub.add_parser("filter", help="cosine-threshold filtering of candidates")
    _add_config(p)
    p.add_argument("--in", dest="infile"), p.add_argument("--catalog")
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--embedder", default="stub:16")
    p.add_argument("--type-map")
    p.add_argument("--out"), p.add_argument("--discards")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("markup", help="render marker-annotated strings")
    _add_config(p)
    p.add_argument("--scheme", choices=("es", "et", "est"), default="es")
    p.add_argument("--lang-flag", action="store_true")
    p.add_argument("--in", dest="infile"), p.add_argument("--out")
    p.set_defaults(func=cmd_markup)

    p = sub.add_parser("silver", help="translate gold instances and project spans")
    _add_config(p)
    p.add_argument("--in", dest="infile")
    p.add_argument("--target-lang")
    p.add_argument("--translator", default="stub")
    p.add_argument("--lexicon")
    p.add_argument("--out"), p.add_argument("--skiplog")
    p.set_defaults(func=cmd_silver)

    p = sub.add_parser("assemble", help="build a transfer scenario's train/test sets")
    _add_config(p)
    p.add_argument("--scenario"), p.add_argument("--data")
    p.add_argument("--translator", default="stub"), p.add_argument("--lexicon")
    p.add_argument("--out-train"), p.add_argument("--out-test")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("train", help="train the pooled-summary probe")
    _add_config(p)
    p.add_argument("--scheme", choices=("cls", "es", "en", "cls_es", "cls_en"),
                   default="cls_en", help="pooling scheme")
    p.add_argument("--mode", choices=tuple(_CLI_MODES), default="re")
    p.add_argument("--markup-scheme", choices=("es", "et", "est"), default="es")
    p.add_argument("--embedder", default="stub:16")
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--in", dest="infile"), p.add_argument("--model")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict relations with a trained probe")
    p.add_argument("--model"), p.add_argument("--in", dest="infile"), p.add_argument("--out")
    p.add_argument("--markup-scheme", choices=("es", "et", "est"), default="es")
    p.add_argument("--embedder", default="stub:16")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold records")
    _add_config(p)
    p.add_argument("--pred"), p.add_argument("--gold"), p.add_argument("--report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report-matrix", help="render a transfer matrix from eval summaries")
    p.add_argument("--results", help="directory of {source,task,target,k,macro_f1} JSON files")
    p.add_argument("--out"), p.add_argument("--csv")
    p.add_argument("--baseline", default="elfi")
    p.set_defaults(func=cmd_report_matrix)

    p = sub.add_parser("report", help="pipeline report stage (config required)")
    _add_config(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve-review", help="serve the annotation review API and UI")
    p.add_argument("--queue", required=True), p.add_argument("--decisions")
    p.add_argument("--mode", choices=("pilot", "production"), default="production")
    p.add_argument("--n-per-language", type=int)
    p.add_argument("--lease-timeout", type=float, default=1800.0)
    p.add_argument("--catalog"), p.add_argument("--ui")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve_review)

    p = sub.add_parser("all", help="run the whole pipeline from a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_all)

    p = sub.add_parser("demo-data", help="write the bundled multilingual mini corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_demo_data)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PrerequisiteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
