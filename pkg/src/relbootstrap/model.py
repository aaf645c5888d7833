"""Shared domain types, validation, and the canonical on-disk instance format.

An Instance is one sentence with two entity mentions and a relation label.
Records are stored as line-delimited JSON (one object per line, UTF-8, LF),
with a fixed field order so that re-writing a dataset is byte-stable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

# Fixed entity-type inventory (18-label NER tag set).
ENTITY_TYPES = (
    "PERSON", "ORG", "GPE", "LOC", "DATE", "TIME", "NORP", "FAC", "PRODUCT",
    "EVENT", "WORK_OF_ART", "LAW", "LANGUAGE", "PERCENT", "MONEY",
    "QUANTITY", "ORDINAL", "CARDINAL",
)

GRADES = ("gold", "silver", "candidate")
SOURCES = ("wiki", "web", "translated")

# Language codes are two- or three-letter lowercase (ISO 639 shape).
_LANG_RE = re.compile(r"^[a-z]{2,3}$")


class RecordError(ValueError):
    """A record file could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RelationLabel:
    """A knowledge-base relation with its catalog metadata."""

    id: str
    name: str
    description: str = ""
    aliases: tuple[str, ...] = ()
    triple_count: int = 0

    def __post_init__(self):
        if not self.id:
            raise ValueError("relation id must be nonempty")
        if self.triple_count < 0:
            raise ValueError(f"triple_count must be >= 0, got {self.triple_count}")
        object.__setattr__(self, "aliases", tuple(self.aliases))


@dataclass(frozen=True)
class EntityMention:
    """An entity occurrence: surface string plus half-open character span.

    Offsets count Unicode scalar values (Python string indices), not bytes.
    """

    surface: str
    start: int
    end: int
    etype: str | None = None

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class Provenance:
    """Where a derived instance came from: source instance id and provider."""

    source_id: str
    provider: str


@dataclass(frozen=True)
class Instance:
    """One sentence with two entity mentions and a relation label."""

    id: str
    lang: str
    text: str
    relation: str
    e1: EntityMention
    e2: EntityMention
    grade: str
    source: str
    provenance: Provenance | None = None


def is_known_lang(code: str) -> bool:
    return bool(_LANG_RE.match(code))


def _check_mention(m: EntityMention, text: str, which: str, problems: list[str]) -> None:
    if not (0 <= m.start < m.end <= len(text)):
        problems.append(f"{which}: span out of bounds")
        return
    if text[m.start:m.end] != m.surface:
        problems.append(f"{which}: surface mismatch")
    if m.etype is not None and m.etype not in ENTITY_TYPES:
        problems.append(f"{which}: unknown entity type {m.etype!r}")


def validate_instance(inst: Instance) -> list[str]:
    """Check all instance invariants; returns [] when the instance is valid.

    Violations are returned (not raised) so callers can audit whole batches.
    """
    problems: list[str] = []
    if not inst.id:
        problems.append("id: empty")
    if not is_known_lang(inst.lang):
        problems.append(f"lang: unknown code {inst.lang!r}")
    if inst.grade not in GRADES:
        problems.append(f"grade: must be one of {GRADES}")
    if inst.source not in SOURCES:
        problems.append(f"source: must be one of {SOURCES}")
    if not inst.relation:
        problems.append("relation: empty")
    _check_mention(inst.e1, inst.text, "e1", problems)
    _check_mention(inst.e2, inst.text, "e2", problems)
    # overlap (including nesting) is forbidden
    if not problems or all("span out of bounds" not in p for p in problems):
        if inst.e1.start < inst.e2.end and inst.e2.start < inst.e1.end:
            problems.append("e1/e2: spans overlap")
    if inst.grade == "silver" and inst.provenance is None:
        problems.append("provenance: required for silver instances")
    return problems


def require_valid(inst: Instance) -> Instance:
    """Raise ValueError when the instance violates an invariant."""
    problems = validate_instance(inst)
    if problems:
        raise ValueError(f"invalid instance {inst.id!r}: " + "; ".join(problems))
    return inst


# ---------------------------------------------------------------------------
# Record I/O


def _mention_to_dict(m: EntityMention) -> dict:
    return {"surface": m.surface, "start": m.start, "end": m.end, "etype": m.etype}


def instance_to_dict(inst: Instance) -> dict:
    d = {
        "id": inst.id,
        "lang": inst.lang,
        "text": inst.text,
        "relation": inst.relation,
        "e1": _mention_to_dict(inst.e1),
        "e2": _mention_to_dict(inst.e2),
        "grade": inst.grade,
        "source": inst.source,
    }
    if inst.provenance is not None:
        d["provenance"] = {
            "source_id": inst.provenance.source_id,
            "provider": inst.provenance.provider,
        }
    return d


def _mention_from_dict(d: dict, which: str) -> EntityMention:
    try:
        return EntityMention(
            surface=d["surface"], start=int(d["start"]), end=int(d["end"]),
            etype=d.get("etype"),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{which}: bad mention object ({exc})") from exc


def instance_from_dict(d: dict) -> Instance:
    for field in ("id", "lang", "text", "relation", "e1", "e2", "grade", "source"):
        if field not in d:
            raise ValueError(f"missing field {field!r}")
    prov = None
    if d.get("provenance") is not None:
        p = d["provenance"]
        if not isinstance(p, dict) or "source_id" not in p or "provider" not in p:
            raise ValueError("provenance: must carry source_id and provider")
        prov = Provenance(source_id=p["source_id"], provider=p["provider"])
    inst = Instance(
        id=d["id"], lang=d["lang"], text=d["text"], relation=d["relation"],
        e1=_mention_from_dict(d["e1"], "e1"), e2=_mention_from_dict(d["e2"], "e2"),
        grade=d["grade"], source=d["source"], provenance=prov,
    )
    problems = validate_instance(inst)
    if problems:
        raise ValueError("; ".join(problems))
    return inst


def read_records(path: str | Path) -> list[Instance]:
    """Read a line-delimited instance file; raises RecordError with line number."""
    out: list[Instance] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(f"not valid JSON ({exc.msg})", lineno) from exc
            if not isinstance(obj, dict):
                raise RecordError("record is not a JSON object", lineno)
            try:
                out.append(instance_from_dict(obj))
            except ValueError as exc:
                raise RecordError(str(exc), lineno) from exc
    return out


def write_records(instances: Iterable[Instance], path: str | Path) -> int:
    """Write instances as line-delimited JSON with stable field order."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            require_valid(inst)
            fh.write(json.dumps(instance_to_dict(inst), ensure_ascii=False))
            fh.write("\n")
            n += 1
    return n


def group_by_lang(instances: Sequence[Instance]) -> dict[str, list[Instance]]:
    by_lang: dict[str, list[Instance]] = {}
    for inst in instances:
        by_lang.setdefault(inst.lang, []).append(inst)
    return by_lang


def group_by_relation(instances: Sequence[Instance]) -> dict[str, list[Instance]]:
    by_rel: dict[str, list[Instance]] = {}
    for inst in instances:
        by_rel.setdefault(inst.relation, []).append(inst)
    return by_rel
