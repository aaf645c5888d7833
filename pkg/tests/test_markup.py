import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relbootstrap.markup import (
    MarkupError,
    MarkupScheme,
    lexical_distance,
    parse_markup,
    parsed_to_mentions,
    render_markup,
)
from relbootstrap.model import EntityMention, Instance

from conftest import (
    ANNOT_E1,
    ANNOT_E2,
    ANNOT_SENTENCE,
    make_instance,
    random_aligned_instance,
)

ES = MarkupScheme("es")
ET = MarkupScheme("et")
EST = MarkupScheme("est")


def test_render_annotation_sample(annot_instance):
    rendered = render_markup(annot_instance, ES)
    assert rendered.startswith(f"[CLS] [E1] {ANNOT_E1} [/E1] ")
    assert f"[E2] {ANNOT_E2} [/E2]" in rendered
    assert rendered.endswith("[SEP]")
    # marked entities removed, the sentence text is intact in order
    plain = " ".join(t for t in rendered.split() if not t.startswith("["))
    assert plain == ANNOT_SENTENCE


def test_language_flag_is_second_token(annot_instance):
    rendered = render_markup(annot_instance, MarkupScheme("es", language_flag=True))
    assert rendered.split()[1] == "[L=hi]"
    parsed = parse_markup(rendered)
    assert parsed.lang == "hi"


def test_est_nesting_order(annot_instance):
    rendered = render_markup(annot_instance, EST)
    tokens = rendered.split()
    i = tokens.index("[E1]")
    assert tokens[i + 1] == "[ET1=PERSON]"
    j = tokens.index("[/E1]")
    assert tokens[j - 1] == "[/ET1=PERSON]"


def test_et_requires_types():
    inst = make_instance()  # untyped mentions
    with pytest.raises(ValueError, match="etype"):
        render_markup(inst, ET)
    with pytest.raises(ValueError, match="etype"):
        render_markup(inst, EST)


def test_render_rejects_overlap():
    text = "aaa bbb ccc"
    inst = Instance(
        id="x", lang="en", text=text, relation="r",
        e1=EntityMention("aaa bbb", 0, 7), e2=EntityMention("bbb ccc", 4, 11),
        grade="gold", source="wiki",
    )
    with pytest.raises(MarkupError, match="overlap"):
        render_markup(inst, ES)


@pytest.mark.parametrize("scheme", [ES, ET, EST])
@pytest.mark.parametrize("lang_flag", [False, True])
def test_roundtrip_all_schemes(rng, scheme, lang_flag):
    scheme = dataclasses.replace(scheme, language_flag=lang_flag)
    for k in range(60):
        inst = random_aligned_instance(rng, f"i{k}")
        parsed = parse_markup(render_markup(inst, scheme))
        assert parsed.text == inst.text
        assert parsed.e1 == inst.e1.span
        assert parsed.e2 == inst.e2.span
        if scheme.kind in ("et", "est"):
            assert parsed.e1_type == inst.e1.etype
            assert parsed.e2_type == inst.e2.etype
        assert parsed.lang == (inst.lang if lang_flag else None)


_word = st.text(alphabet="abcdefghकाल", min_size=1, max_size=6)


@given(
    words=st.lists(_word, min_size=4, max_size=12),
    cuts=st.sets(st.integers(min_value=0, max_value=11), min_size=4, max_size=4),
    kind=st.sampled_from(["es", "et", "est"]),
)
@settings(max_examples=200, deadline=None)
def test_roundtrip_property_generated_instances(words, cuts, kind):
    a0, a1, b0, b1 = sorted(cuts)
    a1 = max(a1, a0 + 1)
    b0 = max(b0, a1)
    b1 = max(b1, b0 + 1)
    while len(words) < b1:
        words = words + words
    text = " ".join(words)

    def span(t0, t1):
        start = len(" ".join(words[:t0])) + (1 if t0 else 0)
        return start, start + len(" ".join(words[t0:t1]))

    (sa, ea), (sb, eb) = span(a0, a1), span(b0, b1)
    inst = Instance(
        id="h", lang="hi", text=text, relation="r",
        e1=EntityMention(text[sa:ea], sa, ea, etype="PERSON"),
        e2=EntityMention(text[sb:eb], sb, eb, etype="GPE"),
        grade="gold", source="wiki",
    )
    parsed = parse_markup(render_markup(inst, MarkupScheme(kind)))
    assert parsed.text == text
    assert parsed.e1 == (sa, ea) and parsed.e2 == (sb, eb)


def test_roundtrip_recovers_mentions(rng):
    inst = random_aligned_instance(rng, "m1")
    parsed = parse_markup(render_markup(inst, EST))
    e1, e2 = parsed_to_mentions(parsed)
    assert (e1.surface, e1.etype) == (inst.e1.surface, inst.e1.etype)
    assert (e2.surface, e2.etype) == (inst.e2.surface, inst.e2.etype)


def test_interleaved_markers_error():
    with pytest.raises(MarkupError, match="interleav"):
        parse_markup("[CLS] [E1] a [E2] b [/E1] c [/E2] [SEP]")


def test_unbalanced_markers_error_position():
    with pytest.raises(MarkupError) as exc:
        parse_markup("[CLS] [E1] a [/E2] b [SEP]")
    assert exc.value.position is not None


@pytest.mark.parametrize("bad", [
    "[E1] a [/E1] [E2] b [/E2] [SEP]",       # no CLS
    "[CLS] [E1] a [/E1] [E2] b [/E2]",       # no SEP
    "[CLS] [E1] [/E1] [E2] b [/E2] [SEP]",   # empty span
    "[CLS] [E1] a [/E1] [SEP]",              # missing entity 2
    "[CLS] [E1] a [E1] b [/E1] [/E1] [E2] c [/E2] [SEP]",  # duplicate open
])
def test_malformed_inputs(bad):
    with pytest.raises(MarkupError):
        parse_markup(bad)


def test_midword_span_normalizes():
    # span cuts inside a token: rendering inserts spaces at the raw offsets
    inst = Instance(
        id="x", lang="en", text="abcd efgh", relation="r",
        e1=EntityMention("bc", 1, 3), e2=EntityMention("efgh", 5, 9),
        grade="gold", source="wiki",
    )
    rendered = render_markup(inst, ES)
    assert rendered == "[CLS] a [E1] bc [/E1] d [E2] efgh [/E2] [SEP]"
    parsed = parse_markup(rendered)
    assert parsed.text == "a bc d efgh"
    assert parsed.text[parsed.e1[0]:parsed.e1[1]] == "bc"
    # canonical strings re-render identically
    e1, e2 = parsed_to_mentions(parsed)
    again = render_markup(
        Instance(id="x", lang="en", text=parsed.text, relation="r",
                 e1=e1, e2=e2, grade="gold", source="wiki"),
        ES,
    )
    assert again == rendered


def test_render_injective_on_distinct_spans(rng):
    seen = {}
    for k in range(200):
        inst = random_aligned_instance(rng, f"i{k}")
        key = (inst.text, inst.e1.span, inst.e2.span)
        rendered = render_markup(inst, ES)
        if key in seen:
            assert seen[key] == rendered
        else:
            assert rendered not in seen.values()
            seen[key] = rendered


# ---------------------------------------------------------------------------
# Lexical distance


def test_lexical_distance_spouse(spouse_instance):
    assert lexical_distance(spouse_instance) == 1


def test_lexical_distance_award(award_instance):
    assert lexical_distance(award_instance) == 24


def test_lexical_distance_adjacent():
    inst = make_instance(text="aaa bbb", e1="aaa", e2="bbb")
    assert lexical_distance(inst) == 0


def test_lexical_distance_symmetric(rng):
    for k in range(50):
        inst = random_aligned_instance(rng, f"i{k}")
        swapped = dataclasses.replace(inst, e1=inst.e2, e2=inst.e1)
        assert lexical_distance(inst) == lexical_distance(swapped)
