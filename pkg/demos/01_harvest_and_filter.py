#!/usr/bin/env python3
"""Distant supervision walkthrough: index a corpus, retrieve evidence for an
entity pair, and filter the candidates by embedding similarity."""

import tempfile
from pathlib import Path

from relbootstrap.filtering import FilterConfig, filter_candidates, relation_embeddings
from relbootstrap.harvest import (
    ingest_corpus,
    load_catalog,
    load_corpus_dir,
    load_pair_table,
    retrieve_evidence,
    sample_entity_pairs,
    select_relations,
)
from relbootstrap.minicorpus import build_mini_corpus
from relbootstrap.providers import HashEmbeddingStub

workdir = Path(tempfile.mkdtemp(prefix="harvest-demo-"))
build_mini_corpus(workdir)
print(f"mini corpus written to {workdir}")

catalog = load_catalog(workdir / "catalog.jsonl")
selected = select_relations(catalog, budget=4)
print("\nselected relations (stratified by triple count):")
for rel in selected:
    print(f"  {rel.id:6s} {rel.name:24s} triples={rel.triple_count}")

index = ingest_corpus(load_corpus_dir(workdir / "corpus"))
print(f"\nindexed {len(index)} sentences across 4 languages")

table = load_pair_table(workdir / "pairs.jsonl")
pairs = sample_entity_pairs("P26", table, budget=3, seed=1)
print(f"\nsampled entity pairs for P26 (weighted by sentence count): {pairs}")

candidates = []
for e1, e2 in pairs:
    candidates.extend(retrieve_evidence(index, e1, e2, "P26", k=1000))
print(f"retrieved {len(candidates)} candidate sentences mentioning both surfaces")

provider = HashEmbeddingStub(dimension=32)
rel_embs = relation_embeddings(catalog.entries, provider)
outcome = filter_candidates(candidates, rel_embs, FilterConfig(tau=0.3), provider)
print(f"\ncosine filter at tau=0.3: retained {len(outcome.retained)}, "
      f"discarded {len(outcome.discarded)}")
for inst, score in outcome.discarded[:3]:
    print(f"  discarded (score={score if score is None else round(score, 3)}): {inst.text}")
