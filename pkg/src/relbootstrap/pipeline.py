"""End-to-end pipeline: harvest -> filter -> markup -> silver -> assemble ->
train -> eval -> report, driven by a JSON config.

Stages communicate only through files in the canonical record format, so
every intermediate is inspectable and independently testable. Each stage
writes a manifest with the SHA-256 of its inputs and outputs plus the seed;
with stub providers the whole pipeline is deterministic, so re-running a
stage reproduces its manifest byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .filtering import FilterConfig, LookupTypeTagger, filter_candidates, relation_embeddings, tag_entity_types
from .harvest import (
    RelationCatalog,
    ingest_corpus,
    load_catalog,
    load_corpus_dir,
    load_pair_table,
    retrieve_evidence,
    sample_entity_pairs,
    select_relations,
)
from .markup import MarkupScheme, parse_markup, render_markup
from .metrics import EvalReport, evaluate, lexical_profile, render_transfer_matrix
from .model import (
    Instance,
    group_by_lang,
    instance_to_dict,
    read_records,
    write_records,
)
from .probe import (
    PooledSummary,
    TrainConfig,
    embed_markup,
    ensemble_per_relation,
    load_model,
    pool,
    predict_batch,
    save_model,
    train,
)
from .providers import (
    DictionaryTranslationStub,
    EmbeddingProvider,
    HashEmbeddingStub,
    HttpEmbeddingClient,
    HttpTranslationClient,
    TranslationProvider,
)
from .review import AnnotationDecision, ReviewStore
from .scenarios import ScenarioSpec, assemble_scenario, scenario_from_dict
from .silver import batch_silver

STAGES = ("harvest", "filter", "markup", "silver", "assemble", "train", "eval", "report")


class PrerequisiteError(RuntimeError):
    """A stage's inputs are missing; names the stage to run first."""


@dataclass
class PipelineConfig:
    workdir: Path
    catalog: Path
    pairs: Path
    corpus_dir: Path
    languages: tuple[str, ...]
    relation_budget: int
    type_map: Path | None = None
    translation_lexicon: Path | None = None
    retrieval_k: int = 1000
    pairs_per_relation: int = 8
    seed: int = 0
    embedder: str = "stub:16"
    translator: str = "stub"
    tau: float = 0.3
    tau_by_lang: Mapping[str, float] = field(default_factory=dict)
    markup_scheme: str = "es"
    language_flag: bool = False
    pooling: str = "cls_en"
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    scenarios: Sequence[dict] = field(default_factory=list)
    report_baseline: str = "elfi"
    auto_review: bool = True

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        doc = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent

        def respath(key, default=None):
            value = doc.get(key, default)
            return (base / value) if value is not None else None

        known = {f.name for f in dataclasses.fields(cls)}
        extra = {
            k: v for k, v in doc.items()
            if k in known and k not in
            ("workdir", "catalog", "pairs", "corpus_dir", "type_map",
             "translation_lexicon", "languages", "scenarios")
        }
        return cls(
            workdir=base / doc["workdir"],
            catalog=respath("catalog"),
            pairs=respath("pairs"),
            corpus_dir=respath("corpus_dir"),
            type_map=respath("type_map"),
            translation_lexicon=respath("translation_lexicon"),
            languages=tuple(doc["languages"]),
            scenarios=list(doc.get("scenarios", ())),
            **extra,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, epochs=self.epochs,
            l2=self.l2, seed=self.seed,
        )

    def filter_config(self) -> FilterConfig:
        return FilterConfig(tau=self.tau, tau_by_lang=dict(self.tau_by_lang))


def make_embedder(spec: str) -> EmbeddingProvider:
    if spec.startswith("stub"):
        dim = int(spec.split(":", 1)[1]) if ":" in spec else 16
        return HashEmbeddingStub(dimension=dim)
    return HttpEmbeddingClient(spec)


def make_translator(spec: str, lexicon_path: Path | None = None) -> TranslationProvider:
    if spec == "stub":
        lexicon = {}
        if lexicon_path is not None:
            doc = json.loads(Path(lexicon_path).read_text(encoding="utf-8"))
            for key, table in doc.items():
                src, tgt = key.split(">")
                lexicon[(src, tgt)] = table
        return DictionaryTranslationStub(lexicon)
    return HttpTranslationClient(spec)


# ---------------------------------------------------------------------------
# Manifests


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(stage_dir: Path, stage: str, cfg: PipelineConfig,
                    inputs: Sequence[Path], outputs: Sequence[Path]) -> Path:
    manifest = {
        "stage": stage,
        "seed": cfg.seed,
        "version": __version__,
        "inputs": {p.name: _sha256(p) for p in sorted(inputs)},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    path = stage_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")
    return path


def _require(path: Path, needed_by: str, produced_by: str) -> Path:
    if not path.exists():
        raise PrerequisiteError(
            f"stage {needed_by!r} needs {path}; run stage {produced_by!r} first"
        )
    return path


# ---------------------------------------------------------------------------
# Stages


def stage_harvest(cfg: PipelineConfig) -> Path:
    stage_dir = cfg.workdir / "harvest"
    stage_dir.mkdir(parents=True, exist_ok=True)
    catalog = load_catalog(cfg.catalog)
    selected = select_relations(catalog, cfg.relation_budget)
    table = load_pair_table(cfg.pairs)
    index = ingest_corpus(load_corpus_dir(cfg.corpus_dir))

    candidates: list[Instance] = []
    seen: set[str] = set()
    for rel in selected:
        if rel.id not in table.by_relation:
            continue
        pairs = sample_entity_pairs(rel.id, table, cfg.pairs_per_relation, cfg.seed)
        for e1, e2 in pairs:
            for inst in retrieve_evidence(index, e1, e2, rel.id, k=cfg.retrieval_k):
                if inst.id not in seen:
                    seen.add(inst.id)
                    candidates.append(inst)
    candidates.sort(key=lambda i: i.id)

    selected_path = stage_dir / "selected_relations.jsonl"
    with open(selected_path, "w", encoding="utf-8") as fh:
        for rel in selected:
            fh.write(json.dumps({
                "id": rel.id, "name": rel.name, "description": rel.description,
                "aliases": list(rel.aliases), "triple_count": rel.triple_count,
            }, ensure_ascii=False) + "\n")
    cand_path = stage_dir / "candidates.jsonl"
    write_records(candidates, cand_path)

    inputs = [cfg.catalog, cfg.pairs, *sorted(Path(cfg.corpus_dir).glob("*.jsonl"))]
    return _write_manifest(stage_dir, "harvest", cfg, inputs, [selected_path, cand_path])


def _load_selected(cfg: PipelineConfig) -> RelationCatalog:
    return load_catalog(cfg.workdir / "harvest" / "selected_relations.jsonl")


def stage_filter(cfg: PipelineConfig) -> Path:
    cand_path = _require(cfg.workdir / "harvest" / "candidates.jsonl", "filter", "harvest")
    stage_dir = cfg.workdir / "filter"
    stage_dir.mkdir(parents=True, exist_ok=True)

    candidates = read_records(cand_path)
    provider = make_embedder(cfg.embedder)
    selected = _load_selected(cfg)
    rel_embs = relation_embeddings(selected.entries, provider)
    outcome = filter_candidates(candidates, rel_embs, cfg.filter_config(), provider)

    retained = list(outcome.retained)
    if cfg.type_map is not None:
        tagger = LookupTypeTagger(json.loads(Path(cfg.type_map).read_text(encoding="utf-8")))
        retained = tag_entity_types(retained, tagger)

    retained_path = stage_dir / "retained.jsonl"
    write_records(retained, retained_path)
    discarded_path = stage_dir / "discarded.jsonl"
    with open(discarded_path, "w", encoding="utf-8") as fh:
        for inst, score in outcome.discarded:
            fh.write(json.dumps({
                "score": score, "instance": instance_to_dict(inst),
            }, ensure_ascii=False) + "\n")

    outputs = [retained_path, discarded_path]
    if cfg.auto_review:
        # stand-in for the human pass: accept every retained candidate so the
        # queue, decision log, and export machinery run end to end
        decisions_path = stage_dir / "decisions.log"
        decisions_path.unlink(missing_ok=True)
        store = ReviewStore(
            retained, mode="production", decisions_path=decisions_path,
            catalog={r.id: r for r in selected.entries}, clock=lambda: 0.0,
        )
        while (task := store.next_task("auto")) is not None:
            store.submit_decision(AnnotationDecision(
                instance_id=task["instance"]["id"], annotator="auto", action="accept",
            ))
        export = store.export_gold()
        gold_path = stage_dir / "gold.jsonl"
        write_records(export.instances, gold_path)
        stats_path = stage_dir / "stats.json"
        stats_path.write_text(
            json.dumps(export.stats, indent=1, sort_keys=True), encoding="utf-8"
        )
        outputs += [gold_path, decisions_path, stats_path]

    return _write_manifest(stage_dir, "filter", cfg, [cand_path], outputs)


def stage_markup(cfg: PipelineConfig) -> Path:
    gold_path = _require(cfg.workdir / "filter" / "gold.jsonl", "markup", "filter")
    stage_dir = cfg.workdir / "markup"
    stage_dir.mkdir(parents=True, exist_ok=True)
    scheme = MarkupScheme(kind=cfg.markup_scheme, language_flag=cfg.language_flag)
    out_path = stage_dir / "gold_markup.txt"
    with open(out_path, "w", encoding="utf-8") as fh:
        for inst in read_records(gold_path):
            rendered = render_markup(inst, scheme)
            parse_markup(rendered)  # self-check: every rendered line parses
            fh.write(rendered + "\n")
    return _write_manifest(stage_dir, "markup", cfg, [gold_path], [out_path])


def stage_silver(cfg: PipelineConfig) -> Path:
    gold_path = _require(cfg.workdir / "filter" / "gold.jsonl", "silver", "filter")
    stage_dir = cfg.workdir / "silver"
    stage_dir.mkdir(parents=True, exist_ok=True)
    translator = make_translator(cfg.translator, cfg.translation_lexicon)
    gold_by_lang = group_by_lang(read_records(gold_path))
    source = "en"
    outputs: list[Path] = []
    for target in cfg.languages:
        if target == source or source not in gold_by_lang:
            continue
        silver, skips = batch_silver(
            sorted(gold_by_lang[source], key=lambda i: i.id), translator, target
        )
        silver_path = stage_dir / f"silver_{source}_{target}.jsonl"
        write_records(silver, silver_path)
        skip_path = stage_dir / f"skiplog_{source}_{target}.jsonl"
        with open(skip_path, "w", encoding="utf-8") as fh:
            for rec in skips:
                fh.write(json.dumps({"id": rec.instance_id, "reason": rec.reason}) + "\n")
        outputs += [silver_path, skip_path]
    return _write_manifest(stage_dir, "silver", cfg, [gold_path], outputs)


def scenario_name(spec: ScenarioSpec) -> str:
    sources = spec.sources if isinstance(spec.sources, str) else "+".join(spec.sources)
    return f"{spec.kind}{spec.k}-{sources}-to-{spec.target}-f{spec.fold}"


def stage_assemble(cfg: PipelineConfig) -> Path:
    gold_path = _require(cfg.workdir / "filter" / "gold.jsonl", "assemble", "filter")
    stage_dir = cfg.workdir / "assemble"
    stage_dir.mkdir(parents=True, exist_ok=True)
    gold_by_lang = group_by_lang(read_records(gold_path))
    translator = make_translator(cfg.translator, cfg.translation_lexicon)

    outputs: list[Path] = []
    for doc in cfg.scenarios:
        spec = scenario_from_dict({"seed": cfg.seed, **doc})
        assembled = assemble_scenario(spec, gold_by_lang, translator)
        sdir = stage_dir / scenario_name(spec)
        sdir.mkdir(parents=True, exist_ok=True)
        spec_path = sdir / "spec.json"
        spec_path.write_text(json.dumps({
            "kind": spec.kind,
            "sources": spec.sources if isinstance(spec.sources, str) else list(spec.sources),
            "target": spec.target, "k": spec.k, "fold": spec.fold, "seed": spec.seed,
        }, indent=1, sort_keys=True), encoding="utf-8")
        train_path = sdir / "train.jsonl"
        test_path = sdir / "test.jsonl"
        write_records(assembled.train, train_path)
        write_records(assembled.test, test_path)
        skips_path = sdir / "skips.jsonl"
        with open(skips_path, "w", encoding="utf-8") as fh:
            for rec in assembled.skips:
                fh.write(json.dumps({"id": rec.instance_id, "reason": rec.reason}) + "\n")
        outputs += [spec_path, train_path, test_path, skips_path]
    return _write_manifest(stage_dir, "assemble", cfg, [gold_path], outputs)


def summarize_instances(
    instances: Sequence[Instance], cfg: PipelineConfig, provider: EmbeddingProvider
) -> list[PooledSummary]:
    scheme = MarkupScheme(kind=cfg.markup_scheme, language_flag=cfg.language_flag)
    out = []
    for inst in instances:
        emb = embed_markup(render_markup(inst, scheme), provider)
        out.append(pool(emb, cfg.pooling))
    return out


_MODE_FILES = {"re": "model_re.json", "mt_no_share": "model_mt_ns.json",
               "mt_share": "model_mt_s.json"}


def stage_train(cfg: PipelineConfig) -> Path:
    stage_dir = cfg.workdir / "train"
    assemble_dir = _require(cfg.workdir / "assemble", "train", "assemble")
    stage_dir.mkdir(parents=True, exist_ok=True)
    provider = make_embedder(cfg.embedder)

    inputs: list[Path] = []
    outputs: list[Path] = []
    for sdir in sorted(p for p in assemble_dir.iterdir() if p.is_dir()):
        train_path = sdir / "train.jsonl"
        instances = read_records(train_path)
        inputs.append(train_path)
        summaries = summarize_instances(instances, cfg, provider)
        relations = [i.relation for i in instances]
        etypes = [(i.e1.etype, i.e2.etype) for i in instances]
        mdir = stage_dir / sdir.name
        mdir.mkdir(parents=True, exist_ok=True)
        for mode, fname in _MODE_FILES.items():
            model = train(
                summaries, relations, cfg.train_config(), mode=mode,
                entity_types=None if mode == "re" else etypes,
            )
            path = mdir / fname
            save_model(model, path)
            outputs.append(path)
    return _write_manifest(stage_dir, "train", cfg, inputs, outputs)


def stage_eval(cfg: PipelineConfig) -> Path:
    train_dir = _require(cfg.workdir / "train", "eval", "train")
    assemble_dir = cfg.workdir / "assemble"
    stage_dir = cfg.workdir / "eval"
    stage_dir.mkdir(parents=True, exist_ok=True)
    provider = make_embedder(cfg.embedder)

    inputs: list[Path] = []
    outputs: list[Path] = []
    for mdir in sorted(p for p in train_dir.iterdir() if p.is_dir()):
        test_path = assemble_dir / mdir.name / "test.jsonl"
        instances = read_records(test_path)
        inputs.append(test_path)
        summaries = summarize_instances(instances, cfg, provider)
        golds = [i.relation for i in instances]
        ids = [i.id for i in instances]
        edir = stage_dir / mdir.name
        edir.mkdir(parents=True, exist_ok=True)
        reports: dict[str, EvalReport] = {}
        for mode, fname in _MODE_FILES.items():
            model = load_model(mdir / fname)
            preds = predict_batch(model, summaries)
            report = evaluate(preds, golds, ids)
            reports[mode] = report
            path = edir / f"eval_{mode}.json"
            path.write_text(
                json.dumps(report.to_dict(), indent=1, sort_keys=True), encoding="utf-8"
            )
            outputs.append(path)
            pred_path = edir / f"preds_{mode}.jsonl"
            with open(pred_path, "w", encoding="utf-8") as fh:
                for iid, gold, pred in zip(ids, golds, preds):
                    fh.write(json.dumps({"id": iid, "gold": gold, "pred": pred}) + "\n")
            outputs.append(pred_path)
        me = ensemble_per_relation(reports["mt_no_share"], reports["mt_share"])
        me_path = edir / "eval_me.json"
        me_path.write_text(json.dumps({
            "macro_f1": me.macro_f1,
            "per_relation": dict(sorted(me.per_relation.items())),
            "winner": dict(sorted(me.winner.items())),
            "micro_accuracy": max(
                reports["mt_no_share"].micro_accuracy, reports["mt_share"].micro_accuracy
            ),
        }, indent=1, sort_keys=True), encoding="utf-8")
        outputs.append(me_path)
    return _write_manifest(stage_dir, "eval", cfg, inputs, outputs)


def stage_report(cfg: PipelineConfig) -> Path:
    eval_dir = _require(cfg.workdir / "eval", "report", "eval")
    stage_dir = cfg.workdir / "report"
    stage_dir.mkdir(parents=True, exist_ok=True)

    results: dict[tuple[str, str, str, int], EvalReport] = {}
    rows: list[dict] = []
    targets: list[str] = []
    for edir in sorted(p for p in eval_dir.iterdir() if p.is_dir()):
        spec_doc = json.loads((cfg.workdir / "assemble" / edir.name / "spec.json").read_text())
        sources = spec_doc["sources"]
        source_row = (
            "elfi" if spec_doc["kind"] == "elfi"
            else sources if isinstance(sources, str) else "+".join(sources)
        )
        target = spec_doc["target"]
        if target not in targets:
            targets.append(target)
        for task, fname in (("RE", "eval_re.json"), ("ME", "eval_me.json")):
            doc = json.loads((edir / fname).read_text(encoding="utf-8"))
            rows.append({
                "scenario": edir.name, "kind": spec_doc["kind"], "source": source_row,
                "task": task, "target": target, "k": spec_doc["k"],
                "macro_f1": doc["macro_f1"], "micro_accuracy": doc["micro_accuracy"],
            })
            if spec_doc["k"] == 0 and spec_doc["kind"] in ("elfi", "lmx"):
                # zero-shot matrix cell; only the headline numbers matter here
                results[(source_row, task, target, spec_doc["k"])] = EvalReport(
                    labels=(), macro_f1=doc["macro_f1"],
                    micro_accuracy=doc["micro_accuracy"], per_relation={},
                    confusion=np.zeros((0, 0), dtype=int), fingerprint="",
                )

    markdown, _csv = render_transfer_matrix(
        results, targets=sorted(targets), baseline=cfg.report_baseline,
        sources=[*cfg.languages, "all", cfg.report_baseline],
    )
    matrix_path = stage_dir / "transfer_matrix.md"
    matrix_path.write_text(markdown, encoding="utf-8")

    results_path = stage_dir / "results.csv"
    with open(results_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "scenario", "kind", "source", "task", "target", "k",
            "macro_f1", "micro_accuracy",
        ], lineterminator="\n")
        writer.writeheader()
        for row in sorted(rows, key=lambda r: (r["scenario"], r["task"])):
            writer.writerow(row)

    gold_path = cfg.workdir / "filter" / "gold.jsonl"
    profile = lexical_profile(read_records(gold_path))
    profile_path = stage_dir / "lexical_profile.csv"
    profile_path.write_text(profile.to_csv(), encoding="utf-8")

    inputs = sorted(eval_dir.glob("*/eval_*.json"))
    return _write_manifest(
        stage_dir, "report", cfg, inputs, [matrix_path, results_path, profile_path]
    )


_STAGE_FUNCS = {
    "harvest": stage_harvest,
    "filter": stage_filter,
    "markup": stage_markup,
    "silver": stage_silver,
    "assemble": stage_assemble,
    "train": stage_train,
    "eval": stage_eval,
    "report": stage_report,
}


def run(cfg: PipelineConfig, stage: str) -> list[Path]:
    """Run one stage or `all`; returns the manifest paths written."""
    if stage == "all":
        return [func(cfg) for func in _STAGE_FUNCS.values()]
    if stage not in _STAGE_FUNCS:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES} or 'all'")
    return [_STAGE_FUNCS[stage](cfg)]
