"""Assembly of cross-lingual transfer experiments.

Four scenario kinds over per-language gold datasets:

    elfi  train and test on the target language's own gold folds
    lmx   train on full source-language gold (optionally + k target shots),
          test on the target fold; the language model carries the transfer
    mtx   train on source gold translated into silver target instances
          (+ k target shots), test on the target fold
    ix    train on pivot-language gold (+ k target shots translated to the
          pivot), translate the target test fold into the pivot at test time

Gold folds are split 80/20 per relation at entity-pair granularity with zero
train/test pair overlap; the test fold is fixed across scenario kinds for a
given (target, fold, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from random import Random
from typing import Mapping, Sequence

from .model import Instance, group_by_relation
from .providers import TranslationProvider
from .silver import SkipRecord, batch_silver

SCENARIO_KINDS = ("elfi", "lmx", "mtx", "ix")
ALLOWED_SHOTS = (0, 1, 5, 10)
ALL_SOURCES = "all"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    n_folds: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0,1)")
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")


@dataclass(frozen=True)
class FoldAssignment:
    train: tuple[Instance, ...]
    test: tuple[Instance, ...]
    excluded_relations: tuple[str, ...]


def _pair_key(inst: Instance) -> tuple[str, str]:
    return (inst.e1.surface, inst.e2.surface)


def split_gold(dataset: Sequence[Instance], spec: SplitSpec = SplitSpec()) -> list[FoldAssignment]:
    """Per-relation, pair-atomic 80/20 splits; one assignment per fold.

    Entity pairs (not instances) are assigned to train or test, so no pair
    straddles the boundary; a seeded greedy pass packs pairs toward the train
    fraction. Relations with a single entity pair cannot be split and are
    excluded from both sides.
    """
    langs = {i.lang for i in dataset}
    if len(langs) > 1:
        raise ScenarioError(f"split_gold expects a single language, got {sorted(langs)}")
    if any(i.grade != "gold" for i in dataset):
        raise ScenarioError("split_gold expects gold instances only")

    by_relation = group_by_relation(dataset)
    folds: list[FoldAssignment] = []
    for fold in range(spec.n_folds):
        train: list[Instance] = []
        test: list[Instance] = []
        excluded: list[str] = []
        for relation in sorted(by_relation):
            insts = by_relation[relation]
            pairs: dict[tuple[str, str], list[Instance]] = {}
            for inst in sorted(insts, key=lambda i: i.id):
                pairs.setdefault(_pair_key(inst), []).append(inst)
            if len(pairs) < 2:
                excluded.append(relation)
                continue
            order = sorted(pairs)
            Random(f"{spec.seed}:{fold}:{relation}").shuffle(order)
            total = len(insts)
            target = spec.train_fraction * total
            train_pairs: list[tuple[str, str]] = []
            count = 0
            for pair in order:
                c = len(pairs[pair])
                if abs(count + c - target) <= abs(count - target):
                    train_pairs.append(pair)
                    count += c
            # both sides must hold at least one pair
            if len(train_pairs) == len(order):
                train_pairs.pop()
            if not train_pairs:
                train_pairs.append(order[0])
            chosen = set(train_pairs)
            for pair in order:
                (train if pair in chosen else test).extend(pairs[pair])
        train.sort(key=lambda i: i.id)
        test.sort(key=lambda i: i.id)
        folds.append(FoldAssignment(tuple(train), tuple(test), tuple(excluded)))
    return folds


def few_shot_sample(pool: Sequence[Instance], k: int, seed: int) -> list[Instance]:
    """Uniform per-relation sample of min(k, available) instances."""
    if k not in ALLOWED_SHOTS:
        raise ScenarioError(f"k must be one of {ALLOWED_SHOTS}, got {k}")
    if k == 0:
        return []
    out: list[Instance] = []
    by_relation = group_by_relation(pool)
    for relation in sorted(by_relation):
        insts = sorted(by_relation[relation], key=lambda i: i.id)
        rng = Random(f"{seed}:shots:{relation}")
        take = min(k, len(insts))
        out.extend(rng.sample(insts, take))
    out.sort(key=lambda i: i.id)
    return out


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    sources: tuple[str, ...] | str  # explicit codes, or "all" (= every lang but target)
    target: str
    k: int = 0
    fold: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"kind must be one of {SCENARIO_KINDS}")
        if self.k not in ALLOWED_SHOTS:
            raise ValueError(f"k must be one of {ALLOWED_SHOTS}")
        if isinstance(self.sources, str):
            if self.sources != ALL_SOURCES:
                raise ValueError(f"string sources must be {ALL_SOURCES!r}")
        else:
            object.__setattr__(self, "sources", tuple(self.sources))
        if self.kind == "elfi" and self.sources != (self.target,):
            raise ValueError("elfi requires sources == (target,)")
        if self.kind == "ix" and (isinstance(self.sources, str) or len(self.sources) != 1):
            raise ValueError("ix requires exactly one pivot source language")

    def resolve_sources(self, languages: Sequence[str]) -> tuple[str, ...]:
        if self.sources == ALL_SOURCES:
            return tuple(sorted(set(languages) - {self.target}))
        return tuple(self.sources)


def scenario_from_dict(d: Mapping) -> ScenarioSpec:
    sources = d["sources"]
    if isinstance(sources, list):
        sources = tuple(sources)
    return ScenarioSpec(
        kind=d["kind"], sources=sources, target=d["target"],
        k=int(d.get("k", 0)), fold=int(d.get("fold", 0)), seed=int(d.get("seed", 0)),
    )


def load_scenario(path: str | Path) -> ScenarioSpec:
    return scenario_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class AssembledScenario:
    spec: ScenarioSpec
    train: tuple[Instance, ...]
    test: tuple[Instance, ...]
    skips: tuple[SkipRecord, ...] = ()


def assemble_scenario(
    spec: ScenarioSpec,
    gold_by_lang: Mapping[str, Sequence[Instance]],
    translator: TranslationProvider | None = None,
    split: SplitSpec | None = None,
) -> AssembledScenario:
    """Build the train and test sets for one transfer scenario."""
    if spec.target not in gold_by_lang:
        raise ScenarioError(f"no gold dataset for target language {spec.target!r}")
    sources = spec.resolve_sources(sorted(gold_by_lang))
    for lang in sources:
        if lang not in gold_by_lang:
            raise ScenarioError(f"no gold dataset for source language {lang!r}")
    if spec.kind in ("mtx", "ix") and translator is None:
        raise ScenarioError(f"scenario kind {spec.kind!r} requires a translator")
    if spec.kind in ("lmx", "mtx") and spec.target in sources:
        raise ScenarioError(f"{spec.kind} sources must not include the target language")

    split = split or SplitSpec(seed=spec.seed)
    folds = split_gold(list(gold_by_lang[spec.target]), split)
    if not 0 <= spec.fold < len(folds):
        raise ScenarioError(f"fold {spec.fold} out of range for {len(folds)} folds")
    fold = folds[spec.fold]
    skips: tuple[SkipRecord, ...] = ()

    if spec.kind == "elfi":
        train: list[Instance] = list(fold.train)
        test: list[Instance] = list(fold.test)
    elif spec.kind == "lmx":
        train = [i for lang in sources for i in sorted(gold_by_lang[lang], key=lambda x: x.id)]
        train += few_shot_sample(fold.train, spec.k, spec.seed)
        test = list(fold.test)
    elif spec.kind == "mtx":
        source_gold = [
            i for lang in sources for i in sorted(gold_by_lang[lang], key=lambda x: x.id)
        ]
        silver, sk = batch_silver(source_gold, translator, spec.target)
        train = silver + few_shot_sample(fold.train, spec.k, spec.seed)
        test = list(fold.test)
        skips = tuple(sk)
    else:  # ix
        pivot = sources[0]
        shots = few_shot_sample(fold.train, spec.k, spec.seed)
        shots_tr, sk1 = batch_silver(shots, translator, pivot)
        train = sorted(gold_by_lang[pivot], key=lambda x: x.id) + shots_tr
        test, sk2 = batch_silver(list(fold.test), translator, pivot)
        skips = tuple(sk1 + sk2)

    return AssembledScenario(spec=spec, train=tuple(train), test=tuple(test), skips=skips)
