"""Relation selection, corpus indexing, and distant-supervised retrieval.

Candidate evidence is any sentence that mentions both entity surfaces of a
knowledge-base pair; such sentences are harvested from a keyword index with a
per-pair result cap and become grade=candidate instances for downstream
filtering and human review.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Iterable, Sequence

from .model import EntityMention, Instance, RelationLabel, validate_instance

# Sentence terminators: Latin, Devanagari danda/double danda, Arabic-script marks.
_TERMINATORS = ".?!।॥؟۔"
_TOKEN_RE = re.compile(r"\S+")
_EDGE_PUNCT = "\"'“”‘’().,;:!?।॥؟۔[]{}«»"


class HarvestError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Relation selection


@dataclass(frozen=True)
class RelationCatalog:
    entries: tuple[RelationLabel, ...]

    def __post_init__(self):
        ids = [r.id for r in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("catalog ids must be unique")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, relation_id: str) -> RelationLabel:
        for r in self.entries:
            if r.id == relation_id:
                return r
        raise KeyError(relation_id)


def load_catalog(path: str | Path) -> RelationCatalog:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            entries.append(RelationLabel(
                id=d["id"], name=d.get("name", d["id"]),
                description=d.get("description", ""),
                aliases=tuple(d.get("aliases", ())),
                triple_count=int(d.get("triple_count", 0)),
            ))
    return RelationCatalog(tuple(entries))


def _largest_remainder(weights: Sequence[int], total: int) -> list[int]:
    """Apportion `total` seats proportionally to weights (largest remainder)."""
    mass = sum(weights)
    quotas = [total * w / mass for w in weights]
    floors = [int(q) for q in quotas]
    short = total - sum(floors)
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:short]:
        floors[i] += 1
    return floors


def select_relations(
    catalog: RelationCatalog, budget: int, n_strata: int = 5
) -> list[RelationLabel]:
    """Pick `budget` relations, stratified proportionally to triple counts.

    The catalog is ranked by descending triple count and cut into up to
    `n_strata` contiguous equal-size strata; the budget is apportioned across
    strata by largest remainder over each stratum's total triple count (capped
    by stratum size, overflow respilled), and the top relations of each
    stratum fill its quota. Pure function: identical inputs, identical output.
    """
    if budget < 1:
        raise HarvestError("budget must be >= 1")
    if budget > len(catalog):
        raise HarvestError(f"budget {budget} exceeds catalog size {len(catalog)}")
    ranked = sorted(catalog.entries, key=lambda r: (-r.triple_count, r.id))
    if all(r.triple_count == 0 for r in ranked):
        raise HarvestError("all triple counts are zero")

    k = min(n_strata, len(ranked))
    bounds = [round(i * len(ranked) / k) for i in range(k + 1)]
    strata = [ranked[bounds[i]:bounds[i + 1]] for i in range(k)]
    strata = [s for s in strata if s]
    masses = [max(sum(r.triple_count for r in s), 1) for s in strata]

    quotas = _largest_remainder(masses, budget)
    # cap by stratum size, respill overflow toward the heaviest strata
    for _ in range(len(strata)):
        overflow = 0
        for i, s in enumerate(strata):
            if quotas[i] > len(s):
                overflow += quotas[i] - len(s)
                quotas[i] = len(s)
        if not overflow:
            break
        room = [i for i in range(len(strata)) if quotas[i] < len(strata[i])]
        for i in sorted(room, key=lambda i: -masses[i]):
            take = min(overflow, len(strata[i]) - quotas[i])
            quotas[i] += take
            overflow -= take
            if not overflow:
                break

    chosen: list[RelationLabel] = []
    for s, q in zip(strata, quotas):
        chosen.extend(s[:q])
    return sorted(chosen, key=lambda r: (-r.triple_count, r.id))


# ---------------------------------------------------------------------------
# Entity-pair sampling


@dataclass
class PairFrequencyTable:
    """Per relation, entity pairs with their corpus sentence counts."""

    by_relation: dict[str, list[tuple[tuple[str, str], int]]] = field(default_factory=dict)

    def add(self, relation: str, e1: str, e2: str, count: int) -> None:
        if count < 1:
            raise ValueError("pair sentence count must be >= 1")
        self.by_relation.setdefault(relation, []).append(((e1, e2), count))

    def pairs(self, relation: str) -> list[tuple[tuple[str, str], int]]:
        if relation not in self.by_relation:
            raise KeyError(relation)
        return list(self.by_relation[relation])


def load_pair_table(path: str | Path) -> PairFrequencyTable:
    table = PairFrequencyTable()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            table.add(d["relation"], d["e1"], d["e2"], int(d["count"]))
    return table


def sample_entity_pairs(
    relation: str, table: PairFrequencyTable, budget: int, seed: int
) -> list[tuple[str, str]]:
    """Seeded weighted sample of entity pairs without replacement.

    Weights are the per-pair sentence counts; at most `budget` pairs come
    back (all of them when the relation has fewer).
    """
    if relation not in table.by_relation:
        raise HarvestError(f"unknown relation {relation!r}")
    pool = sorted(table.pairs(relation))
    rng = Random(f"{seed}:{relation}")
    chosen: list[tuple[str, str]] = []
    for _ in range(min(budget, len(pool))):
        total = sum(c for _, c in pool)
        pick = rng.random() * total
        acc = 0.0
        for idx, (pair, count) in enumerate(pool):
            acc += count
            if pick < acc:
                chosen.append(pair)
                del pool[idx]
                break
    return chosen


# ---------------------------------------------------------------------------
# Sentence index


@dataclass(frozen=True)
class IndexedSentence:
    sid: str
    text: str
    lang: str
    doc_id: str


class SentenceIndex:
    """Inverted keyword index over sentences split from raw documents."""

    def __init__(self):
        self._sentences: dict[str, IndexedSentence] = {}
        self._postings: dict[str, set[str]] = defaultdict(set)

    def __len__(self) -> int:
        return len(self._sentences)

    def add(self, sentence: IndexedSentence) -> None:
        self._sentences[sentence.sid] = sentence
        for token in sentence.text.split():
            self._postings[token].add(sentence.sid)
            bare = token.strip(_EDGE_PUNCT)
            if bare and bare != token:
                self._postings[bare].add(sentence.sid)

    def sentence(self, sid: str) -> IndexedSentence:
        return self._sentences[sid]

    def lookup(self, token: str) -> set[str]:
        return set(self._postings.get(token, ()))

    def sentences(self) -> Iterable[IndexedSentence]:
        return self._sentences.values()


def split_sentences(text: str) -> list[str]:
    """Split on terminal punctuation (., ?, !, danda and script equivalents)."""
    out: list[str] = []
    buf: list[str] = []
    for ch in text:
        buf.append(ch)
        if ch in _TERMINATORS:
            sent = "".join(buf).strip()
            if sent.strip(_TERMINATORS).strip():
                out.append(sent)
            buf = []
    tail = "".join(buf).strip()
    if tail.strip(_TERMINATORS).strip():
        out.append(tail)
    return out


def ingest_corpus(documents: Iterable[tuple[str, str, str]]) -> SentenceIndex:
    """Index (doc_id, lang, text) documents sentence by sentence."""
    index = SentenceIndex()
    for doc_id, lang, text in documents:
        for i, sent in enumerate(split_sentences(text)):
            index.add(IndexedSentence(sid=f"{doc_id}:{i}", text=sent, lang=lang, doc_id=doc_id))
    return index


def load_corpus_dir(corpus_dir: str | Path) -> list[tuple[str, str, str]]:
    """Read documents from every *.jsonl file under a corpus directory."""
    docs = []
    for path in sorted(Path(corpus_dir).glob("*.jsonl")):
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                docs.append((d["doc_id"], d["lang"], d["text"]))
    return docs


# ---------------------------------------------------------------------------
# Evidence retrieval


def _candidate_id(sid: str, relation: str, e1: str, e2: str) -> str:
    digest = hashlib.sha1(f"{sid}\t{relation}\t{e1}\t{e2}".encode()).hexdigest()
    return f"cand-{digest[:12]}"


def _first_spans(text: str, e1: str, e2: str) -> tuple[tuple[int, int], tuple[int, int]] | None:
    """First occurrence of e1; first occurrence of e2 that does not overlap it."""
    s1 = text.find(e1)
    if s1 < 0:
        return None
    span1 = (s1, s1 + len(e1))
    pos = 0
    while True:
        s2 = text.find(e2, pos)
        if s2 < 0:
            return None
        span2 = (s2, s2 + len(e2))
        if span2[1] <= span1[0] or span2[0] >= span1[1]:
            return span1, span2
        pos = s2 + 1


def retrieve_evidence(
    index: SentenceIndex, e1: str, e2: str, relation: str, k: int = 1000,
    source: str = "wiki",
) -> list[Instance]:
    """Distant supervision for one entity pair: keyword-ranked candidate instances.

    The query is the whitespace tokens of both surfaces; the top-k sentences
    by term-frequency score are kept and only those containing both surfaces
    verbatim become candidates, with spans on the first (non-overlapping)
    occurrences. Entity types are left unset for later tagging.
    """
    if not e1 or not e2:
        raise HarvestError("entity strings must be nonempty")
    if k < 1:
        raise HarvestError("k must be >= 1")
    query = e1.split() + e2.split()
    scores: dict[str, int] = defaultdict(int)
    for token in query:
        for sid in index.lookup(token):
            sent_tokens = index.sentence(sid).text.split()
            scores[sid] += sum(1 for t in sent_tokens if t == token or t.strip(_EDGE_PUNCT) == token)
    ranked = sorted(scores, key=lambda sid: (-scores[sid], sid))[:k]

    out: list[Instance] = []
    for sid in ranked:
        sent = index.sentence(sid)
        if e1 not in sent.text or e2 not in sent.text:
            continue
        spans = _first_spans(sent.text, e1, e2)
        if spans is None:
            continue
        (s1, t1), (s2, t2) = spans
        inst = Instance(
            id=_candidate_id(sid, relation, e1, e2),
            lang=sent.lang,
            text=sent.text,
            relation=relation,
            e1=EntityMention(surface=e1, start=s1, end=t1),
            e2=EntityMention(surface=e2, start=s2, end=t2),
            grade="candidate",
            source=source,
        )
        if not validate_instance(inst):
            out.append(inst)
    return out
