"""Marker-annotated model-input strings: rendering, parsing, lexical distance.

Three marker schemes are supported. With entity surfaces ``x`` and ``y``:

    es:  [CLS] ... [E1] x [/E1] ... [E2] y [/E2] ... [SEP]
    et:  [CLS] ... [ET1=PERSON] x [/ET1=PERSON] ... [SEP]
    est: [CLS] ... [E1] [ET1=PERSON] x [/ET1=PERSON] [/E1] ... [SEP]

An optional language token ``[L=hi]`` sits directly after ``[CLS]``. Markers
are whitespace-delimited tokens carrying role (1/2) and, for typed schemes,
the entity type inline, so a rendered string parses back without any side
channel. Markers are inserted at the exact span offsets surrounded by spaces;
parsing reconstructs the text in space-normalized form.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import ENTITY_TYPES, EntityMention, Instance

SCHEME_KINDS = ("es", "et", "est")

_TOKEN_RE = re.compile(r"\S+")
# [E1] [/E2] [ET1=PERSON] [/ET2=GPE] [L=hi] [CLS] [SEP]
_MARKER_RE = re.compile(
    r"^\[(?P<close>/?)(?:(?P<kind>E|ET)(?P<role>[12])(?:=(?P<etype>[A-Z_]+))?|L=(?P<lang>[a-z]{2,3})|(?P<special>CLS|SEP))\]$"
)


class MarkupError(ValueError):
    """Raised for malformed markup; ``position`` is the offending token index."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        suffix = f" (token {position})" if position is not None else ""
        super().__init__(message + suffix)


@dataclass(frozen=True)
class MarkupScheme:
    kind: str = "es"
    language_flag: bool = False

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"scheme kind must be one of {SCHEME_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class ParsedMarkup:
    """Result of parsing a rendered string back into plain text and spans."""

    kind: str
    text: str
    e1: tuple[int, int]
    e2: tuple[int, int]
    e1_type: str | None = None
    e2_type: str | None = None
    lang: str | None = None


def _marker_pair(role: int, etype: str | None, scheme: MarkupScheme) -> tuple[str, str]:
    if scheme.kind == "es":
        return f"[E{role}]", f"[/E{role}]"
    if etype is None:
        raise ValueError(f"scheme {scheme.kind!r} requires etype on both mentions")
    typed = (f"[ET{role}={etype}]", f"[/ET{role}={etype}]")
    if scheme.kind == "et":
        return typed
    return f"[E{role}] {typed[0]}", f"{typed[1]} [/E{role}]"


def render_markup(inst: Instance, scheme: MarkupScheme) -> str:
    """Serialize an instance into a marker-annotated input string."""
    e1, e2 = inst.e1, inst.e2
    if e1.start < e2.end and e2.start < e1.end:
        raise MarkupError("entity spans overlap")
    open1, close1 = _marker_pair(1, e1.etype, scheme)
    open2, close2 = _marker_pair(2, e2.etype, scheme)
    # cut points in text order
    cuts = sorted(
        [(e1.start, open1), (e1.end, close1), (e2.start, open2), (e2.end, close2)],
        key=lambda c: c[0],
    )
    parts = ["[CLS]"]
    if scheme.language_flag:
        parts.append(f"[L={inst.lang}]")
    pos = 0
    for offset, marker in cuts:
        seg = inst.text[pos:offset]
        if seg.strip():
            parts.append(seg.strip())
        parts.append(marker)
        pos = offset
    tail = inst.text[pos:]
    if tail.strip():
        parts.append(tail.strip())
    parts.append("[SEP]")
    return " ".join(parts)


def parse_markup(s: str) -> ParsedMarkup:
    """Invert :func:`render_markup`: recover plain text, spans, types, language.

    The plain text comes back space-normalized (tokens joined by single
    spaces); on instances whose text is already normalized and whose spans sit
    on token boundaries this is an exact round trip.
    """
    tokens = s.split()
    if not tokens or tokens[0] != "[CLS]":
        raise MarkupError("input must start with [CLS]", 0)
    if tokens[-1] != "[SEP]":
        raise MarkupError("input must end with [SEP]", len(tokens) - 1)

    lang: str | None = None
    body_start = 1
    m = _MARKER_RE.match(tokens[1]) if len(tokens) > 1 else None
    if m and m.group("lang") and not m.group("close"):
        lang = m.group("lang")
        body_start = 2

    plain_parts: list[str] = []
    plain_len = 0
    stack: list[str] = []                  # open marker keys, e.g. "E1", "ET2"
    spans: dict[str, tuple[int, int]] = {}  # key -> [start, end)
    types: dict[int, str] = {}
    pending_start: dict[str, int | None] = {}
    seen: set[str] = set()

    def key_of(kind: str, role: str) -> str:
        return f"{kind}{role}"

    for idx in range(body_start, len(tokens) - 1):
        tok = tokens[idx]
        m = _MARKER_RE.match(tok)
        if m is None:
            # plain token
            if plain_parts:
                plain_len += 1
            plain_parts.append(tok)
            start = plain_len
            plain_len += len(tok)
            for k, v in pending_start.items():
                if v is None:
                    pending_start[k] = start
            continue
        if m.group("special") or m.group("lang"):
            raise MarkupError(f"unexpected token {tok}", idx)
        kind, role = m.group("kind"), m.group("role")
        key = key_of(kind, role)
        if not m.group("close"):
            if key in seen:
                raise MarkupError(f"duplicate {tok}", idx)
            if any(k.endswith(other_role(role)) for k in stack):
                raise MarkupError(f"interleaved markers at {tok}", idx)
            if kind == "ET" and m.group("etype") is None:
                raise MarkupError(f"type marker without type: {tok}", idx)
            stack.append(key)
            seen.add(key)
            pending_start[key] = None
            if kind == "ET":
                types[int(role)] = m.group("etype")
        else:
            if not stack or stack[-1] != key:
                raise MarkupError(f"unbalanced or interleaved marker {tok}", idx)
            stack.pop()
            start = pending_start.pop(key)
            if start is None:
                raise MarkupError(f"empty span at {tok}", idx)
            spans[key] = (start, plain_len)

    if stack:
        raise MarkupError(f"unclosed marker [{stack[-1]}]", len(tokens) - 1)

    has_e = "E1" in spans or "E2" in spans
    has_et = "ET1" in spans or "ET2" in spans
    if has_e and has_et:
        kind_out = "est"
    elif has_et:
        kind_out = "et"
    elif has_e:
        kind_out = "es"
    else:
        raise MarkupError("no entity markers found")

    outer = "E" if has_e else "ET"
    for role in ("1", "2"):
        if f"{outer}{role}" not in spans:
            raise MarkupError(f"missing entity {role} markers")
    if kind_out == "est":
        # inner type span must match the outer span exactly
        for role in ("1", "2"):
            if f"ET{role}" not in spans:
                raise MarkupError(f"est markup missing type markers for entity {role}")
            if spans[f"ET{role}"] != spans[f"E{role}"]:
                raise MarkupError(f"type markers do not wrap entity {role} exactly")

    return ParsedMarkup(
        kind=kind_out,
        text=" ".join(plain_parts),
        e1=spans[f"{outer}1"],
        e2=spans[f"{outer}2"],
        e1_type=types.get(1),
        e2_type=types.get(2),
        lang=lang,
    )


def other_role(role: str) -> str:
    return "2" if role == "1" else "1"


def parsed_to_mentions(parsed: ParsedMarkup) -> tuple[EntityMention, EntityMention]:
    """Build mentions from a parse result (surfaces sliced from the plain text)."""
    for etype in (parsed.e1_type, parsed.e2_type):
        if etype is not None and etype not in ENTITY_TYPES:
            raise MarkupError(f"unknown entity type {etype!r}")
    t = parsed.text
    e1 = EntityMention(t[parsed.e1[0]:parsed.e1[1]], *parsed.e1, etype=parsed.e1_type)
    e2 = EntityMention(t[parsed.e2[0]:parsed.e2[1]], *parsed.e2, etype=parsed.e2_type)
    return e1, e2


def lexical_distance(inst: Instance) -> int:
    """Number of whitespace tokens lying strictly between the two entity spans.

    A token counts only when it is entirely inside the gap; tokens overlapping
    either span are excluded.
    """
    first, second = sorted((inst.e1, inst.e2), key=lambda m: m.start)
    gap_start, gap_end = first.end, second.start
    count = 0
    for m in _TOKEN_RE.finditer(inst.text):
        if m.start() >= gap_start and m.end() <= gap_end:
            count += 1
    return count
