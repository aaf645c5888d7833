"""Embedding-similarity filtering of distant-supervised candidates.

A candidate sentence is kept when the cosine similarity between its context
embedding (sentence with both entity spans removed) and its relation's
embedding (mean over description + alias tokens) clears a threshold tau.
Also houses the entity-type tagging hook applied after retention.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .model import ENTITY_TYPES, EntityMention, Instance, RelationLabel
from .providers import EmbeddingProvider

DEFAULT_TAU = 0.3
DEFAULT_TAU_GRID = tuple(round(0.10 + 0.05 * i, 2) for i in range(17))  # 0.10 .. 0.90

_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class FilterConfig:
    tau: float = DEFAULT_TAU
    tau_grid: tuple[float, ...] = DEFAULT_TAU_GRID
    tau_by_lang: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0,1], got {self.tau}")
        grid = tuple(self.tau_grid)
        if list(grid) != sorted(grid):
            raise ValueError("tau_grid must be sorted ascending")
        object.__setattr__(self, "tau_grid", grid)
        for lang, tau in self.tau_by_lang.items():
            if not 0.0 <= tau <= 1.0:
                raise ValueError(f"tau for {lang!r} must be in [0,1], got {tau}")

    def tau_for(self, lang: str) -> float:
        return self.tau_by_lang.get(lang, self.tau)


def strip_entity_spans(inst: Instance) -> str:
    """Delete both entity spans from the text and collapse whitespace runs."""
    spans = sorted([inst.e1.span, inst.e2.span])
    text = inst.text
    kept = text[:spans[0][0]] + " " + text[spans[0][1]:spans[1][0]] + " " + text[spans[1][1]:]
    return _WS_RE.sub(" ", kept).strip()


def embed_sentence_context(inst: Instance, provider: EmbeddingProvider) -> np.ndarray:
    """Sentence embedding of the instance text with entity mentions removed."""
    return provider.embed_sentences([strip_entity_spans(inst)])[0]


def embed_relation(rel: RelationLabel, provider: EmbeddingProvider) -> np.ndarray:
    """Mean of token embeddings over the relation description plus aliases."""
    if not rel.description:
        raise ValueError(f"relation {rel.id} has an empty description")
    text = " ".join([rel.description, *rel.aliases])
    tokens = provider.embed_tokens([text])[0]
    if not len(tokens):
        raise ValueError(f"relation {rel.id} yielded no tokens")
    return tokens.mean(axis=0)


def relation_embeddings(
    catalog: Sequence[RelationLabel], provider: EmbeddingProvider
) -> dict[str, np.ndarray]:
    return {rel.id: embed_relation(rel, provider) for rel in catalog}


def cosine(a: np.ndarray, b: np.ndarray) -> float | None:
    """Cosine similarity, or None when either vector has zero norm."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return None
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class FilterOutcome:
    retained: tuple[Instance, ...]
    discarded: tuple[tuple[Instance, float | None], ...]

    @property
    def retained_ids(self) -> set[str]:
        return {i.id for i in self.retained}


def filter_candidates(
    instances: Sequence[Instance],
    rel_embeddings: Mapping[str, np.ndarray],
    cfg: FilterConfig,
    provider: EmbeddingProvider,
) -> FilterOutcome:
    """Partition candidates into retained (cos >= tau) and discarded-with-score.

    Zero-norm embeddings score None and are discarded (below any tau) rather
    than aborting the batch.
    """
    missing = {i.relation for i in instances} - set(rel_embeddings)
    if missing:
        raise ValueError(f"no relation embedding for: {sorted(missing)}")
    retained: list[Instance] = []
    discarded: list[tuple[Instance, float | None]] = []
    for inst in instances:
        emb_s = embed_sentence_context(inst, provider)
        score = cosine(emb_s, np.asarray(rel_embeddings[inst.relation]))
        if score is not None and score >= cfg.tau_for(inst.lang):
            retained.append(inst)
        else:
            discarded.append((inst, score))
    return FilterOutcome(tuple(retained), tuple(discarded))


@dataclass(frozen=True)
class TauPoint:
    tau: float
    precision: float
    recall: float
    f1: float


def sweep_tau(
    labeled: Sequence[tuple[Instance, bool]],
    rel_embeddings: Mapping[str, np.ndarray],
    grid: Sequence[float],
    provider: EmbeddingProvider,
) -> tuple[float, list[TauPoint]]:
    """Pick the grid tau maximizing F1 of the keep decision on a labeled dev set.

    Ties break toward the smaller tau (higher recall).
    """
    if not labeled:
        raise ValueError("empty dev set")
    scores = []
    for inst, keep in labeled:
        emb_s = embed_sentence_context(inst, provider)
        scores.append((cosine(emb_s, np.asarray(rel_embeddings[inst.relation])), keep))

    points: list[TauPoint] = []
    best: TauPoint | None = None
    for tau in grid:
        tp = sum(1 for s, keep in scores if s is not None and s >= tau and keep)
        fp = sum(1 for s, keep in scores if s is not None and s >= tau and not keep)
        fn = sum(1 for s, keep in scores if (s is None or s < tau) and keep)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        point = TauPoint(tau=tau, precision=precision, recall=recall, f1=f1)
        points.append(point)
        if best is None or point.f1 > best.f1:
            best = point
    return best.tau, points


# ---------------------------------------------------------------------------
# Entity typing (off-the-shelf tagger abstracted as a surface -> type lookup)

TypeTagger = Callable[[str], "str | None"]


class LookupTypeTagger:
    """Surface-string type lookup with an optional default."""

    def __init__(self, mapping: Mapping[str, str], default: str | None = None):
        for etype in mapping.values():
            if etype not in ENTITY_TYPES:
                raise ValueError(f"unknown entity type {etype!r}")
        if default is not None and default not in ENTITY_TYPES:
            raise ValueError(f"unknown entity type {default!r}")
        self._mapping = dict(mapping)
        self._default = default

    def __call__(self, surface: str) -> str | None:
        return self._mapping.get(surface, self._default)


def tag_entity_types(instances: Sequence[Instance], tagger: TypeTagger) -> list[Instance]:
    """Fill in missing entity types via the tagger; existing types are kept."""
    out = []
    for inst in instances:
        def retag(m: EntityMention) -> EntityMention:
            if m.etype is not None:
                return m
            etype = tagger(m.surface)
            return EntityMention(m.surface, m.start, m.end, etype=etype) if etype else m

        out.append(Instance(
            id=inst.id, lang=inst.lang, text=inst.text, relation=inst.relation,
            e1=retag(inst.e1), e2=retag(inst.e2),
            grade=inst.grade, source=inst.source, provenance=inst.provenance,
        ))
    return out
