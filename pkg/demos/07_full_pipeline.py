#!/usr/bin/env python3
"""End to end: bundled mini corpus -> candidates -> gold -> scenarios ->
probe models -> transfer matrix, all with deterministic stub providers.

Equivalent CLI:  relbootstrap demo-data --out DIR
                 relbootstrap all --config DIR/config.json
"""

import tempfile
import time
from pathlib import Path

from relbootstrap.minicorpus import build_mini_corpus
from relbootstrap.pipeline import PipelineConfig, run

workdir = Path(tempfile.mkdtemp(prefix="pipeline-demo-"))
summary = build_mini_corpus(workdir)
print(f"fixture: {summary['sentences']} sentences, "
      f"{len(summary['relations'])} relations, languages {summary['languages']}")

cfg = PipelineConfig.from_file(workdir / "config.json")
t0 = time.perf_counter()
manifests = run(cfg, "all")
print(f"\nall stages finished in {time.perf_counter() - t0:.1f}s:")
for m in manifests:
    print(f"  {m.parent.name:10s} -> {m}")

print("\ntransfer matrix (macro F1 x 100; dashes where source = target):\n")
print((cfg.workdir / "report" / "transfer_matrix.md").read_text())
print("per-scenario metrics: ", cfg.workdir / "report" / "results.csv")
print("lexical profile:      ", cfg.workdir / "report" / "lexical_profile.csv")
