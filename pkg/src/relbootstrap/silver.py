"""Silver instance generation: translate gold instances and re-annotate spans.

The sentence and both entity surfaces are translated independently; each
translated entity is then located in the translated sentence by scanning all
contiguous word windows of the entity's word count and keeping the window
with minimum character-level Levenshtein distance (leftmost on ties). Entity
types are carried over from the source instance; the result is graded silver
and linked to its source via provenance.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .model import EntityMention, Instance, Provenance, validate_instance
from .providers import TranslationProvider

_WORD_RE = re.compile(r"\S+")


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionResult:
    """Best-matching word window for a translated entity."""

    window: tuple[int, int]      # word-index interval [i, i + l)
    char_span: tuple[int, int]   # character span of the window in the sentence
    levenshtein: int
    n_windows_examined: int


@dataclass(frozen=True)
class SkipRecord:
    instance_id: str
    reason: str


def levenshtein_distance(a: str, b: str) -> int:
    """Unit-cost edit distance, two-row dynamic program."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        append = cur.append
        diag = prev[0]
        for j, cb in enumerate(b, 1):
            sub = diag if ca == cb else diag + 1
            diag = prev[j]
            d = cur[j - 1] + 1
            if diag + 1 < d:
                d = diag + 1
            if sub < d:
                d = sub
            append(d)
        prev = cur
    return prev[-1]


def _bounded_distance(a: str, b: str, cutoff: int) -> int:
    """Edit distance if <= cutoff, else any value > cutoff (early abandon)."""
    if abs(len(a) - len(b)) > cutoff:
        return cutoff + 1
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        append = cur.append
        diag = prev[0]
        rowmin = i
        for j, cb in enumerate(b, 1):
            sub = diag if ca == cb else diag + 1
            diag = prev[j]
            d = cur[j - 1] + 1
            if diag + 1 < d:
                d = diag + 1
            if sub < d:
                d = sub
            append(d)
            if d < rowmin:
                rowmin = d
        if rowmin > cutoff:
            return cutoff + 1
        prev = cur
    return prev[-1]


def project_spans(translated_sentence: str, translated_entity: str) -> ProjectionResult:
    """Locate a translated entity inside a translated sentence.

    Scans the n - l + 1 contiguous l-word windows of the sentence (l = word
    count of the entity) and returns the window whose single-space-joined text
    has minimum Levenshtein distance to the entity; ties go to the leftmost
    window. The character span covers the window's exact characters in the
    original sentence.
    """
    entity_words = translated_entity.split()
    if not entity_words:
        raise ProjectionError("empty entity")
    words = list(_WORD_RE.finditer(translated_sentence))
    n, l = len(words), len(entity_words)
    if l > n:
        raise ProjectionError(f"entity has {l} words but sentence only {n}")

    entity_text = " ".join(entity_words)
    best_d: int | None = None
    best_i = 0
    for i in range(n - l + 1):
        window_text = " ".join(m.group() for m in words[i:i + l])
        if best_d is None:
            d = levenshtein_distance(window_text, entity_text)
        else:
            d = _bounded_distance(window_text, entity_text, best_d - 1)
        if best_d is None or d < best_d:
            best_d, best_i = d, i
            if best_d == 0:
                break

    start = words[best_i].start()
    end = words[best_i + l - 1].end()
    return ProjectionResult(
        window=(best_i, best_i + l),
        char_span=(start, end),
        levenshtein=best_d,
        n_windows_examined=n - l + 1,
    )


class SilverSkip(Exception):
    """An instance that cannot be projected; recorded in the skip log."""


def make_silver(
    src: Instance,
    translator: TranslationProvider,
    target_lang: str,
    provider_name: str = "translator",
) -> Instance:
    """Translate a gold instance and project its entity spans."""
    if src.grade != "gold":
        raise ValueError(f"make_silver requires a gold instance, got grade={src.grade!r}")
    if not translator.supports(src.lang, target_lang):
        raise ValueError(f"translator does not support {src.lang}->{target_lang}")

    sent_t, e1_t, e2_t = translator.translate(
        [src.text, src.e1.surface, src.e2.surface], src.lang, target_lang
    )
    try:
        p1 = project_spans(sent_t, e1_t)
        p2 = project_spans(sent_t, e2_t)
    except ProjectionError as exc:
        raise SilverSkip(str(exc)) from exc
    if p1.char_span[0] < p2.char_span[1] and p2.char_span[0] < p1.char_span[1]:
        raise SilverSkip("projected spans overlap")

    def mention(p: ProjectionResult, etype) -> EntityMention:
        s, e = p.char_span
        return EntityMention(surface=sent_t[s:e], start=s, end=e, etype=etype)

    silver = Instance(
        id=f"{src.id}::sv-{target_lang}",
        lang=target_lang,
        text=sent_t,
        relation=src.relation,
        e1=mention(p1, src.e1.etype),
        e2=mention(p2, src.e2.etype),
        grade="silver",
        source="translated",
        provenance=Provenance(source_id=src.id, provider=provider_name),
    )
    problems = validate_instance(silver)
    if problems:
        raise SilverSkip("; ".join(problems))
    return silver


def batch_silver(
    dataset: Sequence[Instance],
    translator: TranslationProvider,
    target_lang: str,
    provider_name: str = "translator",
) -> tuple[list[Instance], list[SkipRecord]]:
    """Apply make_silver over a dataset in order; per-instance failures are logged."""
    out: list[Instance] = []
    skips: list[SkipRecord] = []
    for inst in dataset:
        try:
            out.append(make_silver(inst, translator, target_lang, provider_name))
        except SilverSkip as exc:
            skips.append(SkipRecord(instance_id=inst.id, reason=str(exc)))
    return out, skips
