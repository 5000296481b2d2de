import math

import numpy as np
import pytest

from nellsys import EvaluationError, ParseError, eval_expr, parse_expression, \
    parse_functional_expression, to_source, free_variables
from nellsys.expr import BinOp, Call, Integral, Neg, Num, PointEval, Var


def test_precedence_tree():
    tree = parse_expression("u1^2*sin(u2)")
    assert tree == BinOp("*", BinOp("^", Var("u1"), Num(2.0)),
                         Call("sin", (Var("u2"),)))


def test_basic_precedence_values():
    assert eval_expr(parse_expression("1+2*x1"), {"x1": 3.0}) == 7.0
    assert eval_expr(parse_expression("2^3^2"), {}) == 512.0
    assert eval_expr(parse_expression("2^-2"), {}) == 0.25
    assert eval_expr(parse_expression("-2^2"), {}) == -4.0
    assert eval_expr(parse_expression("6/3/2"), {}) == 1.0
    assert eval_expr(parse_expression("1-2-3"), {}) == -4.0
    assert eval_expr(parse_expression("(1+2)*3"), {}) == 9.0


def test_eval_examples():
    e = parse_expression("exp(max(u1,u2))")
    assert eval_expr(e, {"u1": 1.0, "u2": 1.0}) == pytest.approx(math.e)
    f = parse_expression("w*exp(max(u1,u2))")
    val = eval_expr(f, {"u1": 0.0, "u2": 0.0, "w": 1 / math.pi})
    assert val == pytest.approx(1 / math.pi)


def test_vectorized_eval():
    e = parse_expression("x1^2 + min(x1, x2)")
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, 0.5, 3.0])
    np.testing.assert_allclose(eval_expr(e, {"x1": x, "x2": y}),
                               [0.0, 1.5, 6.0])


def test_malformed_inputs_positioned():
    with pytest.raises(ParseError) as err:
        parse_expression("exp(")
    assert err.value.position == 4
    with pytest.raises(ParseError):
        parse_expression("(1+2")
    with pytest.raises(ParseError) as err:
        parse_expression("1+*2")
    assert err.value.position == 2
    with pytest.raises(ParseError):
        parse_expression("")
    with pytest.raises(ParseError) as err:
        parse_expression("foo")
    assert "unknown identifier" in str(err.value)
    with pytest.raises(ParseError):
        parse_expression("sin(1,2)")  # arity
    with pytest.raises(ParseError):
        parse_expression("max(1)")  # arity
    with pytest.raises(ParseError):
        parse_expression("1 @ 2")


def test_context_variable_rules():
    parse_expression("w*u1", context="pointwise")
    with pytest.raises(ParseError):
        parse_expression("w", context="integrand")
    with pytest.raises(ParseError):
        parse_expression("u1", context="spatial")
    parse_expression("x1*x2", context="spatial")


def test_domain_violations():
    with pytest.raises(EvaluationError):
        eval_expr(parse_expression("sqrt(x1)"), {"x1": -1.0})
    with pytest.raises(EvaluationError):
        eval_expr(parse_expression("1/x1"), {"x1": 0.0})
    with pytest.raises(EvaluationError):
        eval_expr(parse_expression("x1^(1/2)"), {"x1": -1.0})
    with pytest.raises(EvaluationError):
        eval_expr(parse_expression("0^-1"), {})
    # inf - inf produces NaN and must be reported, not returned
    with pytest.raises(EvaluationError):
        eval_expr(parse_expression("exp(x1)-exp(x1)"), {"x1": 1e6})


def test_roundoff_clamp_below_zero():
    assert eval_expr(parse_expression("sqrt(x1)"), {"x1": -1e-13}) == 0.0
    assert eval_expr(parse_expression("x1^0.5"), {"x1": -1e-13}) == 0.0
    assert eval_expr(parse_expression("x1^2"), {"x1": -3.0}) == 9.0


def test_unbound_variable():
    with pytest.raises(EvaluationError) as err:
        eval_expr(parse_expression("u1+u2"), {"u1": 1.0})
    assert "u2" in str(err.value)


def test_functional_grammar():
    tree = parse_functional_expression("inv(INT(exp(max(u1,u2))))")
    assert isinstance(tree, Call) and tree.func == "inv"
    assert isinstance(tree.args[0], Integral)

    tree = parse_functional_expression("EVAL(1,[0,0])^2 + EVAL(2,[0,0])^(1/2)")
    assert isinstance(tree, BinOp) and tree.op == "+"
    assert tree.left.left == PointEval(1, (0.0, 0.0))

    tree = parse_functional_expression("EVAL(2,[-0.5,0.25])")
    assert tree == PointEval(2, (-0.5, 0.25))

    with pytest.raises(ParseError):
        parse_functional_expression("u1")  # bare variable
    with pytest.raises(ParseError):
        parse_functional_expression("EVAL(0,[0,0])")  # bad index
    with pytest.raises(ParseError):
        parse_functional_expression("INT(w)")  # w not an integrand variable
    with pytest.raises(ParseError):
        parse_expression("inv(x1)")  # inv is functional-only
    with pytest.raises(ParseError):
        parse_functional_expression("sin(INT(u1))")  # sin is pointwise-only


def test_free_variables():
    assert free_variables(parse_expression("w*exp(max(u1,u3))+x2")) == \
        {"w", "u1", "u3", "x2"}
    assert free_variables(parse_functional_expression("INT(u2*x1)+EVAL(1,[0,0])")) == \
        {"u2", "x1"}


# ---------------------------------------------------------------------------
# Round-trip corpus
# ---------------------------------------------------------------------------

_VARS = ("x1", "x2", "u1", "u2", "u3", "w")
_UNARY_FUNCS = ("exp", "sin", "cos", "sqrt", "abs")


def _random_expr(rng, depth):
    if depth == 0:
        if rng.random() < 0.5:
            return Num(float(round(rng.uniform(0, 10), 3)))
        return Var(str(rng.choice(_VARS)))
    kind = rng.integers(0, 5)
    if kind == 0:
        return Num(float(round(rng.uniform(0, 10), 3)))
    if kind == 1:
        return Var(str(rng.choice(_VARS)))
    if kind == 2:
        op = str(rng.choice(["+", "-", "*", "/", "^"]))
        return BinOp(op, _random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if kind == 3:
        return Neg(_random_expr(rng, depth - 1))
    if rng.random() < 0.3:
        n_args = int(rng.integers(2, 4))
        name = str(rng.choice(["min", "max"]))
        return Call(name, tuple(_random_expr(rng, depth - 1) for _ in range(n_args)))
    return Call(str(rng.choice(_UNARY_FUNCS)), (_random_expr(rng, depth - 1),))


def test_roundtrip_corpus():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        tree = _random_expr(rng, int(rng.integers(1, 5)))
        text = to_source(tree)
        assert parse_expression(text) == tree, text


def test_roundtrip_functional():
    rng = np.random.default_rng(7)
    atoms = [
        Integral(parse_expression("exp(u1+u2)", context="integrand")),
        PointEval(1, (0.0, 0.0)),
        PointEval(2, (0.25, -0.5)),
        Num(3.5),
    ]
    for _ in range(200):
        a, b = rng.choice(len(atoms), 2)
        op = str(rng.choice(["+", "-", "*", "/", "^"]))
        tree = BinOp(op, atoms[a], atoms[b])
        if rng.random() < 0.5:
            tree = Call(str(rng.choice(["exp", "sqrt", "abs", "inv"])), (tree,))
        text = to_source(tree)
        assert parse_functional_expression(text) == tree, text
