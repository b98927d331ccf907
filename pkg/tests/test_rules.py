import pytest
from hypothesis import given, strategies as st

from rulefuse.errors import RegexSyntaxError, UnknownLabelError
from rulefuse.rules import (
    Alternation,
    AnyWord,
    Concat,
    Literal,
    Opt,
    Plus,
    Star,
    load_rules,
    parse_regex,
    unparse,
)


def test_parse_basic_sequence():
    ast = parse_regex("show me (.)* flights")
    assert ast == Concat(
        (Literal("show"), Literal("me"), Star(AnyWord()), Literal("flights"))
    )


def test_parse_alternation():
    assert parse_regex("a | b") == Alternation((Literal("a"), Literal("b")))


def test_precedence_concat_over_alternation():
    ast = parse_regex("a b | c")
    assert ast == Alternation((Concat((Literal("a"), Literal("b"))), Literal("c")))


def test_postfix_binds_tightest():
    assert parse_regex("a b*") == Concat((Literal("a"), Star(Literal("b"))))
    assert parse_regex("a+?") == Opt(Plus(Literal("a")))


def test_grouping():
    assert parse_regex("( a b )*") == Star(Concat((Literal("a"), Literal("b"))))
    assert parse_regex("( a | b ) | c") == Alternation(
        (Alternation((Literal("a"), Literal("b"))), Literal("c"))
    )


def test_unbalanced_paren_offset():
    with pytest.raises(RegexSyntaxError) as exc_info:
        parse_regex("( a")
    assert exc_info.value.offset == 0


def test_stray_close_paren():
    with pytest.raises(RegexSyntaxError) as exc_info:
        parse_regex("a ) b")
    assert exc_info.value.offset == 2


def test_dangling_operator():
    with pytest.raises(RegexSyntaxError) as exc_info:
        parse_regex("* a")
    assert exc_info.value.offset == 0


def test_empty_group():
    with pytest.raises(RegexSyntaxError):
        parse_regex("a ( ) b")


def test_empty_pattern():
    with pytest.raises(RegexSyntaxError):
        parse_regex("   ")


def test_empty_alternation_branch():
    with pytest.raises(RegexSyntaxError):
        parse_regex("a |")


def test_parser_deterministic():
    src = "from ( a | b )+ to .?"
    assert parse_regex(src) == parse_regex(src)


def test_literal_invariants():
    with pytest.raises(ValueError):
        Literal("")
    with pytest.raises(ValueError):
        Literal("two words")
    with pytest.raises(ValueError):
        Literal("par(en")


_words = st.sampled_from(["a", "b", "c", "flight", "from"])


def _ast_strategy():
    leaves = st.one_of(_words.map(Literal), st.just(AnyWord()))

    def extend(children):
        branch = st.lists(children, min_size=2, max_size=3).map(tuple)
        return st.one_of(
            branch.map(Concat),
            branch.map(Alternation),
            children.map(Star),
            children.map(Plus),
            children.map(Opt),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@given(_ast_strategy())
def test_unparse_parse_roundtrip(ast):
    assert parse_regex(unparse(ast)) == ast


def test_roundtrip_source_form():
    src = "show me ( a | b )* flights .?"
    assert parse_regex(unparse(parse_regex(src))) == parse_regex(src)


def test_load_rules(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text(
        "# comment line\n"
        "flight\tshow me (.)* flights\n"
        "\n"
        "airline\twhich airline .*\n"
        "FLIGHT\tlist ( all )? flights\n"
    )
    ruleset = load_rules(path, known_labels={"flight", "airline"})
    assert ruleset.p == 3
    assert [r.rule_id for r in ruleset.rules] == [1, 2, 3]
    assert ruleset.labels() == ["flight", "airline", "flight"]  # case folded


def test_load_rules_empty_file(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text("# nothing here\n\n")
    assert load_rules(path).p == 0


def test_load_rules_unknown_label(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text("fare\tshow fares\n")
    with pytest.raises(UnknownLabelError) as exc_info:
        load_rules(path, known_labels={"flight", "airline"})
    assert exc_info.value.label == "fare"


def test_load_rules_syntax_error_line(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text("flight\tok pattern\nflight\t( broken\n")
    with pytest.raises(RegexSyntaxError) as exc_info:
        load_rules(path)
    assert exc_info.value.line == 2


def test_load_rules_missing_tab(tmp_path):
    path = tmp_path / "rules.tsv"
    path.write_text("flight show me\n")
    with pytest.raises(RegexSyntaxError) as exc_info:
        load_rules(path)
    assert exc_info.value.line == 1


def test_load_rules_missing_file():
    with pytest.raises(OSError):
        load_rules("/nonexistent/rules.tsv")


def test_load_many_rules(tmp_path):
    labels = [f"intent{i}" for i in range(18)]
    lines = [f"{labels[i % 18]}\tword{i} (.)* tail{i}" for i in range(54)]
    path = tmp_path / "rules.tsv"
    path.write_text("\n".join(lines) + "\n")
    ruleset = load_rules(path, known_labels=set(labels))
    assert ruleset.p == 54
    assert [r.rule_id for r in ruleset.rules] == list(range(1, 55))
