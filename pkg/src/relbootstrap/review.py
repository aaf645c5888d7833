"""Human annotation cleanup service.

Candidate instances are queued and served to annotators, who accept, discard,
or correct them (spans and/or entity types). Decisions go to an append-only
line-delimited log; replaying the log from an empty store reconstructs the
decision state exactly (leases are deliberately volatile and never logged).
Accepted or corrected candidates become gold on export; discarded ones drop
out of the dataset.

Two modes: a pilot serves every instance to exactly two annotators so
inter-annotator agreement can be measured; production serves one annotator
per instance.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from pydantic import BaseModel

from .metrics import pairwise_agreement
from .model import (
    ENTITY_TYPES,
    EntityMention,
    Instance,
    RelationLabel,
    instance_to_dict,
    validate_instance,
)

ACTIONS = ("accept", "discard", "correct")
DEFAULT_LEASE_TIMEOUT = 30 * 60.0  # seconds


class DecisionBody(BaseModel):
    instance_id: str
    annotator: str
    action: str
    corrected_e1: tuple[int, int] | None = None
    corrected_e2: tuple[int, int] | None = None
    corrected_e1_type: str | None = None
    corrected_e2_type: str | None = None


class ReviewError(ValueError):
    pass


class NotLeased(ReviewError):
    """Submission for an instance the annotator does not (any longer) hold."""


@dataclass(frozen=True)
class AnnotationDecision:
    instance_id: str
    annotator: str
    action: str
    corrected_e1: tuple[int, int] | None = None
    corrected_e2: tuple[int, int] | None = None
    corrected_e1_type: str | None = None
    corrected_e2_type: str | None = None
    timestamp: float = 0.0

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"action must be one of {ACTIONS}")
        if self.action == "correct" and not self.has_corrections():
            raise ValueError("a correct decision needs at least one correction")

    def has_corrections(self) -> bool:
        return any(
            c is not None
            for c in (self.corrected_e1, self.corrected_e2,
                      self.corrected_e1_type, self.corrected_e2_type)
        )

    def to_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "annotator": self.annotator,
            "action": self.action,
            "corrected_e1": list(self.corrected_e1) if self.corrected_e1 else None,
            "corrected_e2": list(self.corrected_e2) if self.corrected_e2 else None,
            "corrected_e1_type": self.corrected_e1_type,
            "corrected_e2_type": self.corrected_e2_type,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnnotationDecision":
        def span(v):
            return tuple(v) if v else None

        return cls(
            instance_id=d["instance_id"], annotator=d["annotator"], action=d["action"],
            corrected_e1=span(d.get("corrected_e1")), corrected_e2=span(d.get("corrected_e2")),
            corrected_e1_type=d.get("corrected_e1_type"),
            corrected_e2_type=d.get("corrected_e2_type"),
            timestamp=float(d.get("timestamp", 0.0)),
        )


@dataclass
class _Lease:
    annotator: str
    deadline: float


def apply_corrections(inst: Instance, decision: AnnotationDecision) -> Instance:
    """Return the corrected instance; raises ReviewError when invalid."""

    def corrected(m: EntityMention, span, etype) -> EntityMention:
        start, end = span if span is not None else (m.start, m.end)
        new_type = etype if etype is not None else m.etype
        if not 0 <= start < end <= len(inst.text):
            raise ReviewError(f"corrected span [{start},{end}) out of bounds")
        if etype is not None and etype not in ENTITY_TYPES:
            raise ReviewError(f"unknown entity type {etype!r}")
        return EntityMention(inst.text[start:end], start, end, etype=new_type)

    e1 = corrected(inst.e1, decision.corrected_e1, decision.corrected_e1_type)
    e2 = corrected(inst.e2, decision.corrected_e2, decision.corrected_e2_type)
    if e1.start < e2.end and e2.start < e1.end:
        raise ReviewError("corrected spans overlap")
    return Instance(
        id=inst.id, lang=inst.lang, text=inst.text, relation=inst.relation,
        e1=e1, e2=e2, grade=inst.grade, source=inst.source, provenance=inst.provenance,
    )


@dataclass(frozen=True)
class GoldExport:
    instances: tuple[Instance, ...]
    stats: Mapping[str, Mapping[str, int]]  # lang -> {sentences, distinct_entity_pairs}
    undecided: tuple[str, ...]


class ReviewStore:
    """Queue + decision log for the annotation cleanup workflow.

    Lease state (who currently holds what) is volatile; only decisions are
    durable. Decision writes are idempotent per (instance, annotator): a
    resubmission replaces the earlier decision.
    """

    def __init__(
        self,
        instances: Iterable[Instance],
        mode: str = "production",
        annotators_per_instance: int = 2,
        n_per_language: int | None = None,
        lease_timeout: float = DEFAULT_LEASE_TIMEOUT,
        decisions_path: str | Path | None = None,
        catalog: Mapping[str, RelationLabel] | None = None,
        clock: Callable[[], float] = time.time,
    ):
        if mode not in ("pilot", "production"):
            raise ReviewError(f"mode must be pilot or production, got {mode!r}")
        self.mode = mode
        self.annotators_per_instance = annotators_per_instance if mode == "pilot" else 1
        self.lease_timeout = lease_timeout
        self.decisions_path = Path(decisions_path) if decisions_path else None
        self.catalog = dict(catalog or {})
        self._clock = clock

        self._instances: dict[str, Instance] = {}
        per_lang: dict[str, int] = {}
        for inst in instances:
            if inst.grade != "candidate":
                raise ReviewError(f"queue accepts candidates only, got grade={inst.grade!r}")
            if n_per_language is not None:
                if per_lang.get(inst.lang, 0) >= n_per_language:
                    continue
                per_lang[inst.lang] = per_lang.get(inst.lang, 0) + 1
            self._instances[inst.id] = inst

        self._order = list(self._instances)
        self._leases: dict[str, list[_Lease]] = {}
        self._served: set[tuple[str, str]] = set()
        self._decisions: dict[str, dict[str, AnnotationDecision]] = {}
        self._history: list[AnnotationDecision] = []

    # -- internal helpers ---------------------------------------------------

    def _active_leases(self, iid: str) -> list[_Lease]:
        now = self._clock()
        live = [l for l in self._leases.get(iid, []) if l.deadline > now]
        self._leases[iid] = live
        return live

    def _deciders(self, iid: str) -> set[str]:
        return set(self._decisions.get(iid, ()))

    def _decided(self, iid: str) -> bool:
        need = self.annotators_per_instance
        return len(self._deciders(iid)) >= need

    # -- queue --------------------------------------------------------------

    def next_task(self, annotator: str) -> dict | None:
        """Lease the next eligible instance to the annotator, or None."""
        for iid in self._order:
            if (iid, annotator) in self._served:
                continue
            if self._decided(iid):
                continue
            engaged = {l.annotator for l in self._active_leases(iid)} | self._deciders(iid)
            if annotator in engaged or len(engaged) >= self.annotators_per_instance:
                continue
            deadline = self._clock() + self.lease_timeout
            self._leases.setdefault(iid, []).append(_Lease(annotator, deadline))
            self._served.add((iid, annotator))
            return self._payload(iid, deadline)
        return None

    def _payload(self, iid: str, deadline: float) -> dict:
        inst = self._instances[iid]
        rel = self.catalog.get(inst.relation)
        relation_info = {
            "id": inst.relation,
            "name": rel.name if rel else inst.relation,
            "description": rel.description if rel else "",
            "link": f"https://www.wikidata.org/wiki/Property:{inst.relation}",
        }
        return {
            "instance": instance_to_dict(inst),
            "relation": relation_info,
            "entity_types": list(ENTITY_TYPES),
            "lease_deadline": deadline,
        }

    # -- decisions ----------------------------------------------------------

    def submit_decision(self, decision: AnnotationDecision) -> dict:
        iid, annotator = decision.instance_id, decision.annotator
        inst = self._instances.get(iid)
        if inst is None:
            raise ReviewError(f"unknown instance {iid!r}")
        if decision.action == "correct":
            apply_corrections(inst, decision)  # validate, result discarded here

        own_lease = any(l.annotator == annotator for l in self._active_leases(iid))
        resubmission = annotator in self._deciders(iid)
        if not own_lease and not resubmission:
            others = self._active_leases(iid)
            if others:
                raise NotLeased(f"instance {iid!r} is leased to another annotator")
            other_deciders = self._deciders(iid) - {annotator}
            if len(other_deciders) >= self.annotators_per_instance:
                raise NotLeased(f"instance {iid!r} is already decided")

        if decision.timestamp == 0.0:
            decision = dataclasses.replace(decision, timestamp=self._clock())
        self._apply(decision)
        if self.decisions_path is not None:
            with open(self.decisions_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(decision.to_dict(), ensure_ascii=False) + "\n")
        return {
            "status": "ok",
            "instance_id": iid,
            "annotator": annotator,
            "action": decision.action,
        }

    def _apply(self, decision: AnnotationDecision) -> None:
        iid, annotator = decision.instance_id, decision.annotator
        self._decisions.setdefault(iid, {})[annotator] = decision
        self._history.append(decision)
        self._leases[iid] = [l for l in self._leases.get(iid, []) if l.annotator != annotator]

    # -- export and stats ---------------------------------------------------

    def _effective(self, iid: str) -> list[AnnotationDecision]:
        return [self._decisions[iid][a] for a in sorted(self._decisions.get(iid, ()))]

    def export_gold(self, lang: str | None = None) -> GoldExport:
        """Upgrade kept candidates to gold; report stats and undecided ids."""
        gold: list[Instance] = []
        undecided: list[str] = []
        for iid in self._order:
            inst = self._instances[iid]
            if lang is not None and inst.lang != lang:
                continue
            decisions = self._effective(iid)
            if len(decisions) < self.annotators_per_instance:
                undecided.append(iid)
                continue
            if any(d.action == "discard" for d in decisions):
                continue
            corrected = inst
            for d in decisions:
                if d.action == "correct":
                    corrected = apply_corrections(corrected, d)
                    break
            upgraded = Instance(
                id=corrected.id, lang=corrected.lang, text=corrected.text,
                relation=corrected.relation, e1=corrected.e1, e2=corrected.e2,
                grade="gold", source=corrected.source, provenance=corrected.provenance,
            )
            problems = validate_instance(upgraded)
            if problems:
                raise ReviewError(f"exported instance {iid!r} invalid: {problems}")
            gold.append(upgraded)

        sentences: dict[str, int] = {}
        pairs: dict[str, set[tuple[str, str]]] = {}
        for inst in gold:
            sentences[inst.lang] = sentences.get(inst.lang, 0) + 1
            pairs.setdefault(inst.lang, set()).add((inst.e1.surface, inst.e2.surface))
        table = {
            lg: {"sentences": sentences[lg], "distinct_entity_pairs": len(pairs[lg])}
            for lg in sorted(sentences)
        }
        return GoldExport(tuple(gold), table, tuple(undecided))

    def agreement(self, lang: str | None = None) -> tuple[float, int]:
        """Keep/discard agreement over instances decided by two annotators."""
        a_map: dict[str, str] = {}
        b_map: dict[str, str] = {}
        for iid, by_annotator in self._decisions.items():
            inst = self._instances[iid]
            if lang is not None and inst.lang != lang:
                continue
            if len(by_annotator) != 2:
                continue
            first, second = sorted(by_annotator)
            a_map[iid] = by_annotator[first].action
            b_map[iid] = by_annotator[second].action
        if not a_map:
            return 0.0, 0
        return pairwise_agreement(a_map, b_map), len(a_map)

    def stats(self) -> dict:
        decided = sum(1 for iid in self._order if self._decided(iid))
        return {
            "mode": self.mode,
            "instances": len(self._order),
            "decided": decided,
            "undecided": len(self._order) - decided,
            "decisions_logged": len(self._history),
        }

    # -- event sourcing -----------------------------------------------------

    def state_digest(self) -> dict:
        """Canonical decision-derived state (leases excluded by design)."""
        return {
            "mode": self.mode,
            "decisions": {
                iid: {a: d.to_dict() for a, d in sorted(by.items())}
                for iid, by in sorted(self._decisions.items())
            },
            "decided": sorted(iid for iid in self._order if self._decided(iid)),
        }

    @classmethod
    def replay(
        cls,
        instances: Iterable[Instance],
        log: Iterable[AnnotationDecision] | str | Path,
        **kwargs,
    ) -> "ReviewStore":
        """Reconstruct a store from the decision log alone."""
        store = cls(instances, **kwargs)
        if isinstance(log, (str, Path)):
            records = read_decision_log(log)
        else:
            records = list(log)
        for decision in records:
            if decision.instance_id not in store._instances:
                raise ReviewError(f"log references unknown instance {decision.instance_id!r}")
            store._apply(decision)
        return store


def read_decision_log(path: str | Path) -> list[AnnotationDecision]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(AnnotationDecision.from_dict(json.loads(line)))
    return out


# ---------------------------------------------------------------------------
# HTTP API


def create_app(store: ReviewStore, ui_dir: str | Path | None = None):
    """FastAPI app exposing the review workflow; static UI served at /."""
    from fastapi import FastAPI, HTTPException
    from fastapi.responses import HTMLResponse, JSONResponse

    app = FastAPI(title="annotation review service")

    @app.get("/api/tasks/next")
    def tasks_next(annotator: str):
        task = store.next_task(annotator)
        if task is None:
            return JSONResponse({"task": None}, status_code=200)
        return {"task": task}

    @app.post("/api/decisions")
    def decisions(body: DecisionBody):
        try:
            decision = AnnotationDecision(
                instance_id=body.instance_id, annotator=body.annotator, action=body.action,
                corrected_e1=body.corrected_e1, corrected_e2=body.corrected_e2,
                corrected_e1_type=body.corrected_e1_type,
                corrected_e2_type=body.corrected_e2_type,
            )
            return store.submit_decision(decision)
        except NotLeased as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except (ReviewError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/api/agreement")
    def agreement(lang: str | None = None):
        ratio, n = store.agreement(lang)
        return {"agreement": ratio, "n": n}

    @app.get("/api/export")
    def export(lang: str | None = None):
        result = store.export_gold(lang)
        return {
            "instances": [instance_to_dict(i) for i in result.instances],
            "stats": result.stats,
            "undecided": list(result.undecided),
        }

    @app.get("/api/stats")
    def stats():
        return store.stats()

    index_html = None
    if ui_dir is not None:
        candidate = Path(ui_dir) / "index.html"
        if candidate.exists():
            from fastapi.staticfiles import StaticFiles

            app.mount("/ui", StaticFiles(directory=str(ui_dir)), name="ui")
            index_html = candidate.read_text(encoding="utf-8")

    @app.get("/", response_class=HTMLResponse)
    def root():
        if index_html is not None:
            return index_html
        return "<html><body><h1>annotation review service</h1><p>API at /api/*</p></body></html>"

    return app
