"""Evaluation: macro F1, 0/1 accuracy, confusion matrices, lexical-distance
profiles, annotator agreement, and transfer-matrix report rendering.

Macro F1 averages per-relation F1 over the relations present in the gold
labels only; 0/0 precision or recall is defined as 0.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .markup import lexical_distance
from .model import Instance


@dataclass(frozen=True)
class RelationScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    labels: tuple[str, ...]
    macro_f1: float
    micro_accuracy: float
    per_relation: Mapping[str, RelationScore]
    confusion: np.ndarray  # rows = gold, cols = predicted
    fingerprint: str

    def gold_relations(self) -> list[str]:
        return [r for r in self.labels if self.per_relation[r].support > 0]

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "macro_f1": self.macro_f1,
            "micro_accuracy": self.micro_accuracy,
            "per_relation": {
                r: {"precision": s.precision, "recall": s.recall, "f1": s.f1,
                    "support": s.support}
                for r, s in self.per_relation.items()
            },
            "confusion": self.confusion.tolist(),
            "fingerprint": self.fingerprint,
        }


def _fingerprint(golds: Sequence[str], ids: Sequence[str] | None) -> str:
    h = hashlib.sha256()
    for g in golds:
        h.update(g.encode("utf-8") + b"\x1e")
    if ids is not None:
        for i in ids:
            h.update(i.encode("utf-8") + b"\x1f")
    return h.hexdigest()[:16]


def evaluate(
    predictions: Sequence[str], golds: Sequence[str], ids: Sequence[str] | None = None
) -> EvalReport:
    """Score predictions against gold labels."""
    if len(predictions) != len(golds):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(golds)} golds")
    if ids is not None and len(ids) != len(golds):
        raise ValueError("ids must align with golds")
    labels = tuple(sorted(set(golds) | set(predictions)))
    index = {l: i for i, l in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=int)
    for p, g in zip(predictions, golds):
        confusion[index[g], index[p]] += 1

    per: dict[str, RelationScore] = {}
    for label, i in index.items():
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum() - tp)
        fn = int(confusion[i, :].sum() - tp)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per[label] = RelationScore(precision, recall, f1, support=tp + fn)

    gold_present = [l for l in labels if per[l].support > 0]
    macro = sum(per[l].f1 for l in gold_present) / len(gold_present) if gold_present else 0.0
    micro = sum(1 for p, g in zip(predictions, golds) if p == g) / len(golds) if golds else 0.0
    return EvalReport(
        labels=labels, macro_f1=macro, micro_accuracy=micro, per_relation=per,
        confusion=confusion, fingerprint=_fingerprint(golds, ids),
    )


# ---------------------------------------------------------------------------
# Lexical-distance profile


@dataclass(frozen=True)
class LexicalProfile:
    """Mean lexical distance grouped by (relation, language)."""

    means: Mapping[tuple[str, str], float]
    counts: Mapping[tuple[str, str], int]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["relation", "lang", "mean_lexical_distance", "n"])
        for (rel, lang) in sorted(self.means):
            writer.writerow([rel, lang, f"{self.means[(rel, lang)]:.4f}", self.counts[(rel, lang)]])
        return buf.getvalue()

    def to_markdown(self) -> str:
        langs = sorted({lang for _, lang in self.means})
        rels = sorted({rel for rel, _ in self.means})
        lines = ["| relation | " + " | ".join(langs) + " |",
                 "|---" * (len(langs) + 1) + "|"]
        for rel in rels:
            cells = [
                f"{self.means[(rel, lang)]:.2f}" if (rel, lang) in self.means else "–"
                for lang in langs
            ]
            lines.append("| " + rel + " | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def lexical_profile(dataset: Sequence[Instance]) -> LexicalProfile:
    """Average token gap between entities, per relation and language."""
    sums: dict[tuple[str, str], int] = {}
    counts: dict[tuple[str, str], int] = {}
    for inst in dataset:
        key = (inst.relation, inst.lang)
        sums[key] = sums.get(key, 0) + lexical_distance(inst)
        counts[key] = counts.get(key, 0) + 1
    means = {k: sums[k] / counts[k] for k in sums}
    return LexicalProfile(means=means, counts=counts)


# ---------------------------------------------------------------------------
# Transfer-matrix report


def render_transfer_matrix(
    results: Mapping[tuple[str, str, str, int], EvalReport],
    targets: Sequence[str],
    tasks: Sequence[str] = ("RE", "ME"),
    ks: Sequence[int] = (0,),
    baseline: str | None = None,
    sources: Sequence[str] | None = None,
) -> tuple[str, str]:
    """Render macro-F1 results into a source x target transfer matrix.

    `results` is keyed by (source row, task, target, k); rows are source ×
    task, columns are targets (× k when several shot counts are present).
    Missing cells and source=target cells render as dashes; the best cell per
    (target, k) column is bold, annotated with its gap from the baseline row
    in parentheses when a baseline row is named. Returns (markdown, csv),
    deterministically.
    """
    present = {k[0] for k in results}
    if sources is None:
        sources = sorted(present, key=lambda s: (s == baseline, s == "all", s))
    else:
        sources = [s for s in sources if s in present]
        sources += sorted(present - set(sources), key=lambda s: (s == baseline, s == "all", s))
    ks = sorted(set(ks) | {k[3] for k in results})
    multi_k = len(ks) > 1

    def fmt(value: float | None) -> str:
        return "–" if value is None else f"{100 * value:.2f}"

    def cell_value(source: str, task: str, target: str, k: int) -> float | None:
        if source == target:
            return None
        rep = results.get((source, task, target, k))
        return None if rep is None else rep.macro_f1

    best: dict[tuple[str, int], tuple[float, str, str]] = {}
    for (source, task, target, k), rep in results.items():
        if source == target or source == baseline:
            continue
        cur = best.get((target, k))
        if cur is None or rep.macro_f1 > cur[0]:
            best[(target, k)] = (rep.macro_f1, source, task)

    def baseline_value(target: str, k: int) -> float | None:
        if baseline is None:
            return None
        vals = [
            rep.macro_f1 for (s, _t, tgt, kk), rep in results.items()
            if s == baseline and tgt == target and kk == k
        ]
        return max(vals) if vals else None

    # markdown
    lines: list[str] = []
    if multi_k:
        header = ["Source", "Task"]
        for t in targets:
            header += [f"{t} (k={k})" for k in ks]
    else:
        header = ["Source", "Task"] + list(targets)
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for source in sources:
        for task in tasks:
            if not any(k[0] == source and k[1] == task for k in results):
                continue
            row = [source, task]
            for target in targets:
                for k in ks:
                    v = cell_value(source, task, target, k)
                    text = fmt(v)
                    b = best.get((target, k))
                    if v is not None and b is not None and (b[1], b[2]) == (source, task):
                        bv = baseline_value(target, k)
                        if bv is not None:
                            text = f"**{text} ({100 * (v - bv):+.2f})**"
                        else:
                            text = f"**{text}**"
                    row.append(text)
            lines.append("| " + " | ".join(row) + " |")
    markdown = "\n".join(lines) + "\n"

    # tidy csv
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source", "task", "target", "k", "macro_f1", "micro_accuracy"])
    for (source, task, target, k) in sorted(results):
        rep = results[(source, task, target, k)]
        writer.writerow([source, task, target, k, f"{rep.macro_f1:.6f}", f"{rep.micro_accuracy:.6f}"])
    return markdown, buf.getvalue()


# ---------------------------------------------------------------------------
# Annotator agreement


def pairwise_agreement(a: Mapping[str, str], b: Mapping[str, str]) -> float:
    """Fraction of instances with the same keep/discard decision.

    Inputs map instance id -> action; accept/correct both count as keep.
    Both annotators must have decided exactly the same instance ids.
    """
    if set(a) != set(b):
        raise ValueError("annotators decided different instance sets")
    if not a:
        raise ValueError("no decisions to compare")

    def keep(action: str) -> bool:
        return action in ("accept", "correct")

    matches = sum(1 for i in a if keep(a[i]) == keep(b[i]))
    return matches / len(a)
