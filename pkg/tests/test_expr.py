import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gggp import kernels
from gggp.expr import (
    BinOp, Const, ExprError, ParseError, Var, ast_from_tree, eval_row, evaluate,
    load_model, node_count, parse_text, simplify, to_text, variables,
)
from gggp.genotypes import Node, dsge_decode

MODEL_ROW = {"BMXHIP": 100, "BMXHT": 170, "BMXWAIST": 90, "BMXWT": 80, "RIAGENDR": 1, "BMXARML": 37}
# exact rational value of the stored model on MODEL_ROW, computed with fractions
MODEL_VALUE = Fraction(112234783, 4329000)


def model_path():
    from importlib import resources
    return resources.files("gggp") / "models" / "paper_dsge_depth12.expr"


def model_oracle(r):
    F = Fraction
    hip, ht, waist, wt, sex, arm = (F(r[k]) for k in
                                    ("BMXHIP", "BMXHT", "BMXWAIST", "BMXWT", "RIAGENDR", "BMXARML"))
    return (F(31, 100) * hip + F(9, 100000) * ht * waist - F(1387, 130) * ht / waist
            - waist * wt * wt * sex / 540000 + F(48, 5) * sex + ht * waist / (arm * wt))


# ---------------------------------------------------------------- construction

def test_minus_constant_tree_to_ast(base):
    genes = {"start": [0], "expr": [0, 2, 3], "op": [1], "var": [2], "const": [0]}
    tree = dsge_decode(base, genes, 17).tree
    assert ast_from_tree(tree) == BinOp("-", Var("x2"), Const(1.0))


def test_single_variable(base):
    tree = dsge_decode(base, {"start": [0], "expr": [2], "var": [0]}, 17).tree
    assert ast_from_tree(tree) == Var("x0")


def test_ast_follows_derivation_not_precedence(base):
    def leaf(t):
        return Node(t)

    def var(i):
        return Node("expr", 2, [Node("var", i, [leaf(f"x{i}")])])

    def op(i, t):
        return Node("op", i, [leaf(t)])

    inner = Node("expr", 0, [var(0), op(0, "+"), var(1)])
    root = Node("start", 0, [Node("expr", 0, [inner, op(2, "*"), var(2)])])
    assert ast_from_tree(root) == BinOp("*", BinOp("+", Var("x0"), Var("x1")), Var("x2"))


def test_parentheses_are_structural(base):
    genes = {"start": [0], "expr": [1, 2, 2], "op": [3], "var": [0, 1]}
    tree = dsge_decode(base, genes, 17).tree
    assert ast_from_tree(tree) == BinOp("/", Var("x0"), Var("x1"))


def test_unknown_token_rejected():
    tree = Node("s", 0, [Node("x0"), Node("^"), Node("x1")])
    with pytest.raises(ExprError):
        ast_from_tree(tree)


# ---------------------------------------------------------------- evaluation

def test_protected_division():
    assert eval_row(BinOp("/", Const(5.0), Const(0.0)), {}) == 1.0
    assert eval_row(BinOp("/", Const(5.0), Const(1e-10)), {}) == 1.0
    assert eval_row(BinOp("/", Const(5.0), Const(2.0)), {}) == 2.5


def test_var_lookup():
    assert eval_row(Var("x0"), {"x0": 3.5}) == 3.5
    with pytest.raises(ExprError, match="x1"):
        eval_row(Var("x1"), {"x0": 3.5})


def test_stored_model_value():
    e = load_model(model_path())
    assert model_oracle(MODEL_ROW) == MODEL_VALUE
    got = eval_row(e, MODEL_ROW)
    assert math.isclose(got, float(MODEL_VALUE), rel_tol=1e-9)
    X = np.array([[MODEL_ROW[c] for c in variables(e)]], dtype=float)
    assert math.isclose(evaluate(e, X, variables(e))[0], float(MODEL_VALUE), rel_tol=1e-9)


def test_stored_model_variables():
    e = load_model(model_path())
    assert sorted(variables(e)) == sorted(MODEL_ROW)


def test_stored_model_matches_oracle_on_random_rows():
    e = load_model(model_path())
    rng = random.Random(0)
    for _ in range(200):
        row = {"BMXHIP": rng.randint(70, 150), "BMXHT": rng.randint(140, 200),
               "BMXWAIST": rng.randint(60, 150), "BMXWT": rng.randint(40, 160),
               "RIAGENDR": rng.randint(0, 1), "BMXARML": rng.randint(28, 45)}
        assert math.isclose(eval_row(e, row), float(model_oracle(row)), rel_tol=1e-9)


def test_clamp():
    big = BinOp("*", Const(1e20), Const(1e20))
    assert eval_row(big, {}) == 1e30
    assert eval_row(BinOp("-", Const(0.0), big), {}) == -1e30


# ---------------------------------------------------------------- random ASTs

def random_ast(rng, depth, names=("x0", "x1", "x2")):
    if depth <= 1 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.5:
            return Var(rng.choice(names))
        return Const(rng.choice([0.0, 1.0, 0.1, 10.0, 2.5, -3.0]))
    if rng.random() < 0.15:
        # repeated operands exercise the x - x and x / x rules
        sub = random_ast(rng, depth - 1, names)
        return BinOp(rng.choice("-/"), sub, sub)
    return BinOp(rng.choice("+-*/"), random_ast(rng, depth - 1, names),
                 random_ast(rng, depth - 1, names))


def test_simplify_examples():
    assert simplify(BinOp("*", Var("x0"), Const(1.0))) == Var("x0")
    assert simplify(BinOp("+", Const(0.1), Const(10.0))) == Const(0.1 + 10.0)
    nested = BinOp("+", BinOp("*", BinOp("-", Var("x1"), Var("x1")), Var("x2")), Var("x0"))
    assert simplify(nested) == Var("x0")
    assert simplify(BinOp("/", Var("x2"), Var("x2"))) == Const(1.0)
    assert simplify(BinOp("/", Const(3.0), Const(0.0))) == Const(1.0)
    assert simplify(BinOp("*", Const(0.0), Var("x1"))) == Const(0.0)


def test_simplify_nested_example_evaluates_same():
    nested = BinOp("+", BinOp("*", BinOp("-", Var("x1"), Var("x1")), Var("x2")), Var("x0"))
    rng = np.random.default_rng(1)
    for row in rng.normal(0, 10, size=(100, 3)):
        r = dict(zip(("x0", "x1", "x2"), row))
        assert eval_row(simplify(nested), r) == eval_row(nested, r)


def test_simplify_preserves_semantics():
    rng = random.Random(7)
    nrng = np.random.default_rng(7)
    rows = nrng.normal(0, 5, size=(100, 3))
    names = ["x0", "x1", "x2"]
    for _ in range(1000):
        e = random_ast(rng, 6)
        s = simplify(e)
        assert node_count(s) <= node_count(e)
        assert simplify(s) == s
        a = evaluate(e, rows, names)
        b = evaluate(s, rows, names)
        np.testing.assert_allclose(b, a, rtol=1e-9, atol=0)


def test_roundtrip_text_examples():
    e = BinOp("-", Var("x2"), Const(1.0))
    assert to_text(e) == "(x2 - 1.0)"
    assert to_text(BinOp("*", BinOp("-", Var("x1"), Var("x0")), Const(10.0, "10"))) == "((x1 - x0) * 10)"
    assert parse_text("(x2 - 1.0)") == e
    assert parse_text(" ( ( x2 ) - (1.0) ) ") == e


def test_stored_model_roundtrip():
    e = load_model(model_path())
    assert parse_text(to_text(e)) == e
    body = [ln for ln in model_path().read_text().splitlines() if ln and not ln.startswith("#")]
    assert to_text(e) == body[0]


@pytest.mark.parametrize("text, offset", [
    ("(((x0))", 0),
    ("(x0 + x1", 0),
    ("x0 + x1", 3),
    ("(x0 + x1))", 9),
    ("(x0 ? x1)", 4),
    ("", 0),
    ("(x0 + )", 6),
])
def test_parse_error_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        parse_text(text)
    assert info.value.offset == offset


@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
@settings(max_examples=300, deadline=None)
def test_text_roundtrip_property(seed, depth):
    e = random_ast(random.Random(seed), depth)
    assert parse_text(to_text(e)) == e


def test_constant_text_survives_roundtrip():
    e = parse_text("(0.1 * 10)")
    assert to_text(e) == "(0.1 * 10)"
    assert e.right == Const(10.0)


@given(st.integers(0, 2**32 - 1),
       st.lists(st.floats(-1e300, 1e300, allow_nan=False), min_size=3, max_size=3))
@settings(max_examples=300, deadline=None)
def test_evaluation_total(seed, row):
    e = random_ast(random.Random(seed), 7)
    v = eval_row(e, dict(zip(("x0", "x1", "x2"), row)))
    assert math.isfinite(v)
    out = evaluate(e, np.array([row]), ["x0", "x1", "x2"])
    assert np.isfinite(out).all()
    assert out[0] == v


def test_backends_agree_bitwise():
    rng = random.Random(3)
    X = np.random.default_rng(3).normal(0, 50, size=(500, 3))
    X[::17, 1] = 0.0
    for _ in range(300):
        e = random_ast(rng, 7)
        a = evaluate(e, X, ["x0", "x1", "x2"], backend="numpy")
        if kernels.BACKEND == "numba":
            b = evaluate(e, X, ["x0", "x1", "x2"], backend="numba")
            assert np.array_equal(a, b)
        rows = [eval_row(e, dict(zip(("x0", "x1", "x2"), r))) for r in X[:20]]
        assert np.array_equal(a[:20], np.array(rows))


def test_evaluate_missing_column():
    with pytest.raises(ExprError, match="x3"):
        evaluate(Var("x3"), np.zeros((2, 3)), ["x0", "x1", "x2"])


def test_load_model_comments(tmp_path):
    p = tmp_path / "m.expr"
    p.write_text("# a comment\n(x0 + 1)  # trailing\n")
    assert load_model(p) == BinOp("+", Var("x0"), Const(1.0))
    (tmp_path / "empty.expr").write_text("# nothing\n")
    with pytest.raises(ExprError):
        load_model(tmp_path / "empty.expr")


def test_env_flag_selects_numpy():
    import os
    import subprocess
    import sys
    env = {**os.environ, "GGGP_DISABLE_NUMBA": "1"}
    out = subprocess.run([sys.executable, "-c", "from gggp import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, timeout=120)
    assert out.stdout.strip() == "numpy"
