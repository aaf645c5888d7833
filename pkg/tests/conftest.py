"""Shared fixtures: valid instances, paper-sample sentences, fake providers."""

from __future__ import annotations

import random

import numpy as np
import pytest

from relbootstrap.model import EntityMention, Instance, Provenance

# Hindi sample sentences used across markup/metrics tests.
SPOUSE_SENTENCE = "विराट कोहली और अनुष्का शर्मा ने 2017 में इटली में शादी कर ली थी"
SPOUSE_E1 = "विराट कोहली"
SPOUSE_E2 = "अनुष्का शर्मा"

AWARD_SENTENCE = (
    "बृहत-पिंगला गुजराती भाषा के विख्यात साहित्यकार रामनारायण पाठक द्वारा रचित एक छंद शास्त्र है "
    "जिसके लिये उन्हें सन् 1956 में गुजराती भाषा के लिए मरणो-परांत साहित्य अकादमी पुरस्कार से "
    "सम्मानित किया गया ."
)
AWARD_E1 = "बृहत-पिंगल"
AWARD_E2 = "साहित्य अकादमी पुरस्कार"

ANNOT_SENTENCE = (
    "मिशेल ओबामा अमेरिका की पूर्व राष्ट्रपति बराक ओबामा की पत्नी हैं, "
    "एवं अमेरिका की प्रथम महिला रह चुकी हैं"
)
ANNOT_E1 = "मिशेल ओबामा"
ANNOT_E2 = "बराक ओबामा"


def mention_at(text: str, surface: str, etype: str | None = None, start_from: int = 0) -> EntityMention:
    start = text.index(surface, start_from)
    return EntityMention(surface=surface, start=start, end=start + len(surface), etype=etype)


def make_instance(
    text: str = "Rina Velan married wed Mira Limar .",
    e1: str = "Rina Velan",
    e2: str = "Mira Limar",
    relation: str = "P26",
    lang: str = "en",
    iid: str = "inst-1",
    grade: str = "gold",
    source: str = "wiki",
    e1_type: str | None = None,
    e2_type: str | None = None,
    provenance: Provenance | None = None,
) -> Instance:
    m1 = mention_at(text, e1, e1_type)
    m2 = mention_at(text, e2, e2_type, start_from=m1.end if e1 == e2 else 0)
    return Instance(
        id=iid, lang=lang, text=text, relation=relation,
        e1=m1, e2=m2, grade=grade, source=source, provenance=provenance,
    )


@pytest.fixture
def spouse_instance() -> Instance:
    return make_instance(
        text=SPOUSE_SENTENCE, e1=SPOUSE_E1, e2=SPOUSE_E2,
        relation="P26", lang="hi", iid="hi-spouse-1",
    )


@pytest.fixture
def award_instance() -> Instance:
    return make_instance(
        text=AWARD_SENTENCE, e1=AWARD_E1, e2=AWARD_E2,
        relation="P166", lang="hi", iid="hi-award-1",
    )


@pytest.fixture
def annot_instance() -> Instance:
    return make_instance(
        text=ANNOT_SENTENCE, e1=ANNOT_E1, e2=ANNOT_E2,
        relation="P26", lang="hi", iid="hi-annot-1",
        e1_type="PERSON", e2_type="PERSON",
    )


class FixedTokenProvider:
    """Embedding provider with hand-set token vectors (defaults to zero)."""

    def __init__(self, vectors: dict[str, list[float]], dimension: int):
        self._vectors = {t: np.asarray(v, dtype=float) for t, v in vectors.items()}
        self._dim = dimension

    @property
    def dimension(self) -> int:
        return self._dim

    def embed_tokens(self, texts):
        out = []
        for text in texts:
            toks = text.split()
            if toks:
                out.append(np.stack([
                    self._vectors.get(t, np.zeros(self._dim)) for t in toks
                ]))
            else:
                out.append(np.zeros((0, self._dim)))
        return out

    def embed_sentences(self, texts):
        rows = []
        for mat in self.embed_tokens(texts):
            rows.append(mat.mean(axis=0) if len(mat) else np.zeros(self._dim))
        return np.stack(rows) if rows else np.zeros((0, self._dim))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240811)


def random_tokens(rng: random.Random, n: int, alphabet: str = "abcdefgh") -> list[str]:
    return ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 6))) for _ in range(n)]


def random_aligned_instance(rng: random.Random, iid: str, with_types: bool = True) -> Instance:
    """Instance with space-normalized text and token-aligned entity spans."""
    n = rng.randint(4, 14)
    tokens = random_tokens(rng, n)
    # two disjoint token ranges
    starts = sorted(rng.sample(range(n), 4))
    a0, a1, b0, b1 = starts[0], starts[1], starts[2], starts[3]
    a1 = max(a0 + 1, a1)
    b0 = max(a1, b0)
    b1 = max(b0 + 1, b1)
    if b1 > n:
        tokens += random_tokens(rng, b1 - n)
    text = " ".join(tokens)

    def span_of(t0: int, t1: int) -> tuple[int, int]:
        start = len(" ".join(tokens[:t0])) + (1 if t0 else 0)
        end = start + len(" ".join(tokens[t0:t1]))
        return start, end

    sa, ea = span_of(a0, a1)
    sb, eb = span_of(b0, b1)
    etypes = ("PERSON", "ORG") if with_types else (None, None)
    swap = rng.random() < 0.5  # let e2 precede e1 half the time
    m_a = EntityMention(text[sa:ea], sa, ea, etype=etypes[0])
    m_b = EntityMention(text[sb:eb], sb, eb, etype=etypes[1])
    e1, e2 = (m_b, m_a) if swap else (m_a, m_b)
    return Instance(
        id=iid, lang=rng.choice(["en", "bn", "hi", "te"]), text=text, relation="P26",
        e1=e1, e2=e2, grade="gold", source="wiki",
    )
