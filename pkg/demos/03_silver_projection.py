#!/usr/bin/env python3
"""Silver data generation: translate a gold sentence and re-locate the entity
spans inside the translation by windowed edit distance."""

from relbootstrap.model import EntityMention, Instance
from relbootstrap.providers import DictionaryTranslationStub
from relbootstrap.silver import batch_silver, make_silver, project_spans

print("windowed projection on its own:")
sentence = "virat kohli weds anushka sharrma in italy"
for entity in ("virat kohli", "anushka sharma"):
    r = project_spans(sentence, entity)
    s, e = r.char_span
    print(f"  {entity!r:20s} -> window {r.window}, distance {r.levenshtein}, "
          f"text {sentence[s:e]!r} ({r.n_windows_examined} windows examined)")

text = "Virat Kohli and Anushka Sharma got married in Italy in 2017."
lexicon = {("en", "hi"): {
    "Virat": "विराट", "Kohli": "कोहली", "and": "और", "Anushka": "अनुष्का",
    "Sharma": "शर्मा", "got": "ने", "married": "शादी", "in": "में",
    "Italy": "इटली", "2017.": "2017",
}}
gold = Instance(
    id="en-1", lang="en", text=text, relation="P26",
    e1=EntityMention("Virat Kohli", 0, 11, etype="PERSON"),
    e2=EntityMention("Anushka Sharma", 16, 30, etype="PERSON"),
    grade="gold", source="wiki",
)

silver = make_silver(gold, DictionaryTranslationStub(lexicon), "hi")
print("\nEnglish gold -> Hindi silver:")
print(f"  source: {gold.text}")
print(f"  silver: {silver.text}")
print(f"  e1: {silver.e1.surface!r} ({silver.e1.etype})  "
      f"e2: {silver.e2.surface!r} ({silver.e2.etype})")
print(f"  grade={silver.grade} provenance={silver.provenance}")

# batch mode logs unprojectable instances instead of failing
out, skips = batch_silver([gold], DictionaryTranslationStub(lexicon), "hi")
print(f"\nbatch: {len(out)} projected, {len(skips)} skipped")
