"""Deterministic 200-sentence multilingual mini corpus for demos and tests.

Four languages (en, bn, hi, te), six relations, four entity pairs per
relation per language with two evidence sentences each, plus one off-topic
noise sentence and one single-entity distractor per language. Sentences are
synthetic: per-language word forms derive from shared concept keywords so the
bundled dictionary translator can map English sentences onto each target
language's vocabulary. Also writes the relation catalog, pair-frequency
table, entity-type map, translation lexicon, and a ready-to-run pipeline
configuration.
"""

from __future__ import annotations

import json
from pathlib import Path

LANGS = ("en", "bn", "hi", "te")
SUFFIX = {"en": "", "bn": "বি", "hi": "ही", "te": "తె"}
TERMINATOR = {"en": ".", "bn": "।", "hi": "।", "te": "."}

# (id, name, keywords, (etype1, etype2), triple_count)
RELATIONS = (
    ("P26", "spouse", ("married", "wed", "wife", "husband"), ("PERSON", "PERSON"), 500),
    ("P166", "award_received", ("received", "award", "honoured", "prize"), ("PERSON", "WORK_OF_ART"), 320),
    ("P50", "author", ("wrote", "novel", "penned", "verses"), ("WORK_OF_ART", "PERSON"), 210),
    ("P36", "capital", ("capital", "governs", "administers", "seat"), ("GPE", "GPE"), 130),
    ("P54", "member_of_sports_team", ("plays", "team", "signed", "squad"), ("PERSON", "ORG"), 90),
    ("P69", "educated_at", ("studied", "graduated", "enrolled", "degree"), ("PERSON", "ORG"), 60),
)

_FIRST = ("Rina", "Tavo", "Mira", "Kale", "Soren", "Pia", "Dalt", "Nuri",
          "Vesa", "Ormo", "Lani", "Teyo", "Brin", "Sulo", "Mave", "Kiri")
_LAST = ("Velan", "Torma", "Sadiq", "Breno", "Kovan", "Limar",
         "Oston", "Perel", "Qadir", "Jutan", "Moss", "Arbel")
_PLACES = ("Haranta", "Quvelle", "Dorstan", "Milpora", "Ostrev", "Tanveri",
           "Belqua", "Sirmano", "Ferrodel", "Ghantor", "Ulvera", "Campes",
           "Norvik", "Zentala", "Ipswan", "Roquel")
_ORGS = ("Kavan United", "Mirth College", "Delta Rovers", "Astor Institute",
         "Quill Academy", "Vortex Club", "Helix University", "Orion Stars",
         "Pexal School", "Numa Rangers", "Civet Labs", "Tarn Athletic",
         "Weld Polytechnic", "Sova Lyceum", "Rix City", "Bandol FC")
_WORKS = ("Songs of Dawn", "The Silver Gate", "River Elegy", "Glass Meridian",
          "Maps of Ash", "The Last Orchard", "Winter Ledger", "Salt and Stone",
          "Iron Lullaby", "The Quiet Reef", "Ochre Skies", "Ninth Lantern",
          "Paper Harbor", "The Long Thaw", "Ember Atlas", "Violet Standard")

_NOISE_WORDS = ("yesterday", "suddenly", "somewhere", "afterwards")


def word_form(word: str, lang: str) -> str:
    """Per-language surface form of a shared concept word."""
    return word + SUFFIX[lang]


def _entity_stock(etype: str) -> tuple[str, ...]:
    if etype == "PERSON":
        return tuple(f"{_FIRST[i]} {_LAST[(i * 7 + 3) % len(_LAST)]}" for i in range(16))
    if etype == "GPE":
        return _PLACES
    if etype == "ORG":
        return _ORGS
    return _WORKS


def _entity_surface(etype: str, slot: int, lang: str) -> str:
    base = _entity_stock(etype)[slot]
    return " ".join(word_form(w, lang) for w in base.split())


def _pair_slots(lang: str) -> range:
    # disjoint name slots per language so no pair is shared across corpora
    offset = 4 * LANGS.index(lang)
    return range(offset, offset + 4)


def _sentences_for(lang: str) -> tuple[list[str], list[dict]]:
    """All corpus sentences for one language plus its pair-table rows."""
    term = TERMINATOR[lang]
    sentences: list[str] = []
    pair_rows: list[dict] = []
    for rel_index, (rel_id, _name, keywords, (t1, t2), _count) in enumerate(RELATIONS):
        kw = [word_form(k, lang) for k in keywords]
        # per-relation offset so no two relations share an entity pair
        shift = 5 + rel_index
        for slot in _pair_slots(lang):
            e1 = _entity_surface(t1, slot, lang)
            e2 = _entity_surface(t2, (slot + shift) % 16, lang)
            sentences.append(f"{e1} {kw[0]} {kw[1]} {e2} {kw[2]} {kw[3]} {term}")
            sentences.append(f"{e2} {kw[2]} {kw[3]} {e1} {kw[0]} {kw[1]} {term}")
            count = 2
            if rel_id == "P26" and slot == _pair_slots(lang)[0]:
                # off-topic noise evidence for the first spouse pair
                noise = " ".join(word_form(w, lang) for w in _NOISE_WORDS)
                sentences.append(f"{e1} {noise} {e2} {term}")
                count = 3
            pair_rows.append({"relation": rel_id, "e1": e1, "e2": e2, "count": count})
    # single-entity distractor: mentions only one entity of a known pair
    lone = _entity_surface("PERSON", _pair_slots(lang)[0], lang)
    kw0 = word_form(RELATIONS[0][2][0], lang)
    noise = " ".join(word_form(w, lang) for w in _NOISE_WORDS)
    sentences.append(f"{lone} {kw0} {noise} {term}")
    return sentences, pair_rows


def _type_map() -> dict[str, str]:
    mapping: dict[str, str] = {}
    for _rel_id, _name, _kw, (t1, t2), _count in RELATIONS:
        for etype in (t1, t2):
            for slot in range(16):
                for lang in LANGS:
                    mapping[_entity_surface(etype, slot, lang)] = etype
    return mapping


def _lexicon() -> dict[str, dict[str, str]]:
    """English -> target word tables covering the whole English corpus."""
    en_words: set[str] = set()
    for _rel_id, _name, keywords, _types, _count in RELATIONS:
        en_words.update(keywords)
    en_words.update(_NOISE_WORDS)
    for stock in (_entity_stock("PERSON"), _PLACES, _ORGS, _WORKS):
        for surface in stock:
            en_words.update(surface.split())
    tables: dict[str, dict[str, str]] = {}
    for lang in LANGS:
        if lang == "en":
            continue
        table = {w: word_form(w, lang) for w in sorted(en_words)}
        table["."] = TERMINATOR[lang]
        tables[f"en>{lang}"] = table
    return tables


def _default_scenarios(seed: int) -> list[dict]:
    scenarios: list[dict] = []
    targets = ("bn", "hi")
    for target in targets:
        scenarios.append({"kind": "elfi", "sources": [target], "target": target,
                          "k": 0, "fold": 0, "seed": seed})
        for source in LANGS:
            if source == target:
                continue
            scenarios.append({"kind": "lmx", "sources": [source], "target": target,
                              "k": 0, "fold": 0, "seed": seed})
        scenarios.append({"kind": "lmx", "sources": "all", "target": target,
                          "k": 0, "fold": 0, "seed": seed})
        scenarios.append({"kind": "mtx", "sources": ["en"], "target": target,
                          "k": 10, "fold": 0, "seed": seed})
    return scenarios


def build_mini_corpus(dest: str | Path, seed: int = 7) -> dict:
    """Write the bundled fixture into `dest`; returns a summary dict."""
    dest = Path(dest)
    corpus_dir = dest / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)

    total = 0
    for lang in LANGS:
        sentences, _rows = _sentences_for(lang)
        total += len(sentences)
        docs = []
        for i in range(0, len(sentences), 5):
            docs.append({
                "doc_id": f"{lang}-doc{i // 5:02d}",
                "lang": lang,
                "text": " ".join(sentences[i:i + 5]),
            })
        with open(corpus_dir / f"docs_{lang}.jsonl", "w", encoding="utf-8") as fh:
            for doc in docs:
                fh.write(json.dumps(doc, ensure_ascii=False) + "\n")

    with open(dest / "catalog.jsonl", "w", encoding="utf-8") as fh:
        for rel_id, name, keywords, _types, count in RELATIONS:
            aliases = [" ".join(word_form(k, lang) for k in keywords)
                       for lang in LANGS if lang != "en"]
            fh.write(json.dumps({
                "id": rel_id, "name": name,
                "description": " ".join(keywords),
                "aliases": aliases, "triple_count": count,
            }, ensure_ascii=False) + "\n")

    with open(dest / "pairs.jsonl", "w", encoding="utf-8") as fh:
        for lang in LANGS:
            _sentences, rows = _sentences_for(lang)
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    (dest / "type_map.json").write_text(
        json.dumps(_type_map(), ensure_ascii=False, indent=1, sort_keys=True),
        encoding="utf-8",
    )
    (dest / "lexicon.json").write_text(
        json.dumps(_lexicon(), ensure_ascii=False, indent=1, sort_keys=True),
        encoding="utf-8",
    )

    config = {
        "workdir": "run",
        "catalog": "catalog.jsonl",
        "pairs": "pairs.jsonl",
        "corpus_dir": "corpus",
        "type_map": "type_map.json",
        "translation_lexicon": "lexicon.json",
        "languages": list(LANGS),
        "relation_budget": len(RELATIONS),
        "retrieval_k": 1000,
        "pairs_per_relation": 16,
        "seed": seed,
        "embedder": "stub:32",
        "translator": "stub",
        "tau": 0.3,
        "tau_by_lang": {},
        "markup_scheme": "es",
        "language_flag": False,
        "pooling": "cls_en",
        "learning_rate": 0.1,
        "epochs": 500,
        "l2": 1e-4,
        "report_baseline": "elfi",
        "auto_review": True,
        "scenarios": _default_scenarios(seed),
    }
    (dest / "config.json").write_text(
        json.dumps(config, ensure_ascii=False, indent=1), encoding="utf-8"
    )
    return {"sentences": total, "languages": list(LANGS),
            "relations": [r[0] for r in RELATIONS], "dest": str(dest)}
