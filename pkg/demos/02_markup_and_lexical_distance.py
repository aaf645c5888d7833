#!/usr/bin/env python3
"""Marker schemes and the lexical-distance relation-complexity proxy."""

from relbootstrap.markup import MarkupScheme, lexical_distance, parse_markup, render_markup
from relbootstrap.model import EntityMention, Instance


def instance(text, e1, e2, lang="hi", types=("PERSON", "PERSON")):
    s1, s2 = text.index(e1), text.index(e2)
    return Instance(
        id="demo", lang=lang, text=text, relation="P26",
        e1=EntityMention(e1, s1, s1 + len(e1), etype=types[0]),
        e2=EntityMention(e2, s2, s2 + len(e2), etype=types[1]),
        grade="gold", source="wiki",
    )


simple = instance(
    "विराट कोहली और अनुष्का शर्मा ने 2017 में इटली में शादी कर ली थी",
    "विराट कोहली", "अनुष्का शर्मा",
)
complex_ = instance(
    "बृहत-पिंगला गुजराती भाषा के विख्यात साहित्यकार रामनारायण पाठक द्वारा रचित एक छंद शास्त्र है "
    "जिसके लिये उन्हें सन् 1956 में गुजराती भाषा के लिए मरणो-परांत साहित्य अकादमी पुरस्कार से "
    "सम्मानित किया गया .",
    "बृहत-पिंगल", "साहित्य अकादमी पुरस्कार",
    types=("WORK_OF_ART", "WORK_OF_ART"),
)

print("a 'simple' relation needs few tokens between its entities,")
print("a 'complex' one needs many:\n")
for name, inst in (("spouse", simple), ("award_received", complex_)):
    print(f"  {name:16s} lexical distance = {lexical_distance(inst)}")

print("\nmarker schemes over the spouse sentence:")
for kind in ("es", "et", "est"):
    rendered = render_markup(simple, MarkupScheme(kind))
    print(f"\n[{kind}] {rendered}")

rendered = render_markup(simple, MarkupScheme("es", language_flag=True))
print(f"\n[es + language flag] {rendered}")

parsed = parse_markup(rendered)
print("\nparsing recovers everything:")
print(f"  lang={parsed.lang} e1={parsed.e1} e2={parsed.e2}")
print(f"  e1 surface: {parsed.text[parsed.e1[0]:parsed.e1[1]]}")
