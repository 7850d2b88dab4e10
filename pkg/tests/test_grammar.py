import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gggp.grammar import GrammarError, load_grammar, parse_grammar, validate_phenotype
from gggp.genotypes import Node, leaves, tree_depth

LATEX_LISTING = r"""
<start> ::= <expr> #(0)

<expr> ::= <expr> <op> <expr> #(0)
        | (<expr> <op> <expr>) #(1)
        | <var> #(2)
        | <const> #(3)

<op> ::= + #(0)
       | - #(1)
       | * #(2)
       | \eb_div_\eb #(3)

<var> ::= $x_0$ #(0)
       | $x_1$ #(1)
       | $x_2$ #(2)

<const> ::= 1.0 #(0)
         | 0.1 #(1)
         | 10 #(2)
"""


def counts(g):
    return [len(g.productions[nt]) for nt in g.nonterminals]


def test_base_grammar_shape(base):
    assert list(base.nonterminals) == ["start", "expr", "op", "var", "const"]
    assert counts(base) == [1, 4, 4, 3, 3]
    assert base.start == "start"
    assert [p.index for p in base.productions["expr"]] == [0, 1, 2, 3]


def test_latex_style_listing_parses():
    g = parse_grammar(LATEX_LISTING)
    assert counts(g) == [1, 4, 4, 3, 3]
    assert [str(p) for p in g.productions["var"]] == ["$x_0$", "$x_1$", "$x_2$"]
    assert str(g.productions["expr"][1]) == "( <expr> <op> <expr> )"


def test_nodiv_drops_division(nodiv):
    assert counts(nodiv) == [1, 4, 3, 3, 3]
    assert "/" not in nodiv.terminals()


def test_nobias_keeps_duplicates(nobias):
    alts = nobias.productions["expr"]
    assert [p.index for p in alts] == list(range(13))
    assert alts[7].symbols == alts[8].symbols == alts[9].symbols
    assert alts[10].symbols == alts[11].symbols == alts[12].symbols == alts[6].symbols
    assert alts[1].symbols == alts[2].symbols


def test_smallest_grammar():
    g = parse_grammar("<s> ::= a")
    assert g.nonterminals == ("s",)
    assert [str(p) for p in g.productions["s"]] == ["a"]
    assert g.min_depth == {"s": 1}


def test_min_depths_base(base):
    assert base.min_depth == {"start": 3, "expr": 2, "op": 1, "var": 1, "const": 1}
    assert base.recursive == {"start": False, "expr": True, "op": False, "var": False, "const": False}


def test_no_terminal_derivation_is_named():
    with pytest.raises(GrammarError, match="<a>"):
        parse_grammar("<a> ::= <a>")


@pytest.mark.parametrize("text, fragment", [
    ("<s> ::= <t>", "<t>"),
    ("<s> ::= a |", "empty alternative"),
    ("<s> ::= a | | b", "empty alternative"),
    ("x ::= a", "rule head"),
    ("<s> a", "::="),
    ("a b\n<s> ::= c", "rule head"),
    ("<s> ::= a\n<s> ::= b", "defined twice"),
    ("", "no rules"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(GrammarError, match=fragment):
        parse_grammar(text)


def test_syntax_error_position():
    with pytest.raises(GrammarError) as info:
        parse_grammar("<s> ::= a\n  | b\n  | | c")
    assert (info.value.line, info.value.column) == (3, 5)


@pytest.mark.parametrize("name", ["base.bnf", "nodiv.bnf", "nobias.bnf"])
def test_round_trip(name):
    g = load_grammar(name)
    again = parse_grammar(g.to_bnf())
    assert again == g
    assert again.to_bnf() == g.to_bnf()


_nt_names = st.sampled_from(["a", "b", "c", "d"])
_terms = st.sampled_from(["x", "y", "+", "(", ")", "1.0"])


@st.composite
def grammars(draw):
    names = draw(st.lists(_nt_names, min_size=1, max_size=4, unique=True))
    lines = []
    for i, nt in enumerate(names):
        alts = []
        # the last alternative is terminal-only so every rule can finish
        for _ in range(draw(st.integers(0, 3))):
            syms = draw(st.lists(st.one_of(_terms, st.sampled_from([f"<{n}>" for n in names])),
                                 min_size=1, max_size=4))
            alts.append(" ".join(syms))
        alts.append(" ".join(draw(st.lists(_terms, min_size=1, max_size=3))))
        lines.append(f"<{nt}> ::= " + " | ".join(alts))
    return "\n".join(lines)


@given(grammars())
@settings(max_examples=150, deadline=None)
def test_round_trip_random(text):
    g = parse_grammar(text)
    assert parse_grammar(g.to_bnf()) == g


def _min_tree(g, nt):
    alt = min(range(len(g.productions[nt])), key=lambda i: g.alt_depth[nt][i])
    node = Node(nt, alt)
    node.children = [_min_tree(g, s.text) if s.nonterminal else Node(s.text)
                     for s in g.productions[nt][alt].symbols]
    return node


@pytest.mark.parametrize("name", ["base.bnf", "nodiv.bnf", "nobias.bnf"])
def test_min_depth_choice_terminates(name):
    g = load_grammar(name)
    for nt in g.nonterminals:
        assert tree_depth(_min_tree(g, nt)) == g.min_depth[nt]


@given(grammars())
@settings(max_examples=100, deadline=None)
def test_min_depth_is_fixed_point(text):
    g = parse_grammar(text)
    for nt in g.nonterminals:
        best = min(1 + max([g.min_depth[s.text] for s in p.symbols if s.nonterminal], default=0)
                   for p in g.productions[nt])
        assert g.min_depth[nt] == best >= 1
        assert tree_depth(_min_tree(g, nt)) == g.min_depth[nt]


@pytest.mark.parametrize("tokens, expected", [
    ("x2 - 1.0", True),
    ("+ x0", False),
    ("( x0 * x1 )", True),
    ("x0", True),
    ("( x0 * x1 ) / 10 - ( 0.1 + x2 )", True),
    ("( x0 * x1", False),
    ("x0 x1", False),
    ("x7", False),
    ("", False),
])
def test_validate_examples(base, tokens, expected):
    assert validate_phenotype(base, tokens.split()) is expected


def _enumerate(g, nt, depth):
    """All token tuples derivable from ``nt`` within ``depth`` levels (brute force)."""
    if depth < 1:
        return set()
    out = set()
    for prod in g.productions[nt]:
        parts = [{(s.text,)} if not s.nonterminal else _enumerate(g, s.text, depth - 1)
                 for s in prod.symbols]
        for combo in itertools.product(*parts):
            out.add(sum(combo, ()))
    return out


@pytest.mark.parametrize("name", ["base.bnf", "nobias.bnf"])
def test_validate_against_enumeration(name):
    g = load_grammar(name)
    derivable = _enumerate(g, g.start, 4)
    short = {t for t in derivable if len(t) <= 3}
    vocab = g.terminals()
    for n in range(1, 4):
        for toks in itertools.product(vocab, repeat=n):
            assert validate_phenotype(g, toks) is (toks in short), toks
    for toks in derivable:
        assert validate_phenotype(g, toks)


def test_validate_rejects_mutated_strings(base):
    derivable = _enumerate(base, base.start, 5)
    rng = random.Random(0)
    vocab = base.terminals()
    pool = sorted(t for t in derivable if len(t) >= 5)
    for toks in rng.sample(pool, 300):
        i = rng.randrange(len(toks))
        bad = toks[:i] + (rng.choice(vocab),) + toks[i + 1:]
        # deeper derivations cannot produce strings this short with other tokens
        if bad not in derivable and len(bad) <= 5:
            assert not validate_phenotype(base, bad), bad


def test_with_terminals_injects_columns(base):
    g = base.with_terminals("var", ["BMXWT", "BMXHT", "RIAGENDR", "BMXHIP"])
    assert [str(p) for p in g.productions["var"]] == ["BMXWT", "BMXHT", "RIAGENDR", "BMXHIP"]
    assert g.productions["expr"] == base.productions["expr"]
    assert validate_phenotype(g, "BMXWT * RIAGENDR".split())
    assert not validate_phenotype(g, "x0 * RIAGENDR".split())


def test_leaves_of_minimal_tree(base):
    assert leaves(_min_tree(base, "start")) == ["x0"]
