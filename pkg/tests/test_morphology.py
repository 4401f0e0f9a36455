import pytest

from l1forge.morphology import default_verb_table, load_verb_table, third_person_singular, to_present_simple


@pytest.mark.parametrize(
    "verb,number,expected",
    [
        ("decreased", "singular", "decreases"),
        ("fell", "plural", "fall"),
        ("carried", "singular", "carries"),
        ("rose", "plural", "rise"),
        ("rose", "singular", "rises"),
        ("stopped", "singular", "stops"),
        ("went", "singular", "goes"),
        ("watched", "singular", "watches"),
        ("increased", "plural", "increase"),
        ("dropped", "singular", "drops"),
        ("was", "singular", "is"),
        ("were", "plural", "are"),
        ("was", "first", "am"),
        ("had", "singular", "has"),
        ("did", "singular", "does"),
        ("Decreased", "singular", "Decreases"),
        ("played", "singular", "plays"),
        ("studied", "plural", "study"),
        ("agreed", "singular", "agrees"),
        ("planned", "singular", "plans"),
    ],
)
def test_to_present_simple(verb, number, expected):
    assert to_present_simple(verb, number) == expected


@pytest.mark.parametrize("word", ["table", "decrease", "quickly", "hundred"])
def test_non_past_forms_are_rejected(word):
    with pytest.raises(ValueError):
        to_present_simple(word, "singular")


def test_bad_subject_number():
    with pytest.raises(ValueError):
        to_present_simple("fell", "dual")


@pytest.mark.parametrize(
    "base,expected",
    [("go", "goes"), ("watch", "watches"), ("fix", "fixes"), ("carry", "carries"), ("play", "plays"),
     ("decrease", "decreases"), ("buzz", "buzzes"), ("push", "pushes")],
)
def test_third_person_orthography(base, expected):
    assert third_person_singular(base) == expected


def test_irregular_table_override(tmp_path):
    path = tmp_path / "irr.tsv"
    path.write_text("# base\tpast\t3sg\nswim\tswam\tswims\n", encoding="utf-8")
    table = load_verb_table(path)
    assert to_present_simple("swam", "singular", table) == "swims"
    # Regular verbs still come from the bundled lexicon.
    assert to_present_simple("decreased", "plural", table) == "decrease"


def test_bundled_table_is_consistent():
    table = default_verb_table()
    for past, base in table.past_to_base.items():
        assert base in table.third_person, past
