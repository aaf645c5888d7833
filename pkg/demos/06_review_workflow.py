#!/usr/bin/env python3
"""Annotation cleanup: pilot agreement, production decisions, replayable log.

To drive the same workflow over HTTP (with the browser UI if frontend/dist is
built):  relbootstrap serve-review --queue candidates.jsonl \
             --decisions decisions.log --mode production --port 8000
"""

import tempfile
from pathlib import Path

from relbootstrap.model import EntityMention, Instance
from relbootstrap.review import AnnotationDecision, ReviewStore

candidates = []
for k in range(12):
    e1, e2 = f"alpha{k}", f"beta{k}"
    text = f"{e1} works with {e2} ."
    candidates.append(Instance(
        id=f"c{k}", lang="hi", text=text, relation="P69",
        e1=EntityMention(e1, 0, len(e1)),
        e2=EntityMention(e2, text.index(e2), text.index(e2) + len(e2)),
        grade="candidate", source="wiki",
    ))

# pilot: two annotators see every instance; measure their agreement
pilot = ReviewStore(candidates, mode="pilot")
for annotator, flip in (("annot-a", ()), ("annot-b", (2, 7))):
    for k in range(12):
        task = pilot.next_task(annotator)
        action = "discard" if k in flip else "accept"
        pilot.submit_decision(AnnotationDecision(task["instance"]["id"], annotator, action))
ratio, n = pilot.agreement()
print(f"pilot: two annotators, {n} instances, keep/discard agreement {ratio:.2f}")

# production: one annotator per instance, decisions logged durably
log = Path(tempfile.mkdtemp(prefix="review-demo-")) / "decisions.log"
store = ReviewStore(candidates, mode="production", decisions_path=log)
while (task := store.next_task("annot-a")) is not None:
    iid = task["instance"]["id"]
    if iid == "c3":
        store.submit_decision(AnnotationDecision(iid, "annot-a", "discard"))
    elif iid == "c5":
        text = task["instance"]["text"]
        start = text.index("works")
        store.submit_decision(AnnotationDecision(
            iid, "annot-a", "correct",
            corrected_e1=(start, start + 5), corrected_e1_type="ORG",
        ))
    else:
        store.submit_decision(AnnotationDecision(iid, "annot-a", "accept"))

export = store.export_gold()
print(f"\nproduction export: {len(export.instances)} gold instances "
      f"({len(export.undecided)} undecided)")
print(f"per-language stats: {dict(export.stats)}")
corrected = next(i for i in export.instances if i.id == "c5")
print(f"corrected instance c5: e1={corrected.e1.surface!r} type={corrected.e1.etype}")

# the decision log alone reconstructs the same state
replayed = ReviewStore.replay(candidates, log)
assert replayed.state_digest() == store.state_digest()
print(f"\nreplaying {log.name} reproduces the live queue state exactly")
