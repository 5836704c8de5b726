import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opmeans import expr
from opmeans.expr import BinOp, Call, DomainError, Neg, Num, ParseError, Var
from opmeans.funcs import InvalidFunctionError, Verdict, builtin, classify

# Each entry pairs source text with an independent Python rendering of the
# same grammar (right-associative '^', unary minus binding to the base).
CORPUS = [
    ("x", lambda x: x),
    ("1", lambda x: 1.0),
    ("2.5e-1", lambda x: 0.25),
    (".5", lambda x: 0.5),
    ("x + 1", lambda x: x + 1),
    ("x - 1", lambda x: x - 1),
    ("x * 2", lambda x: x * 2),
    ("x / 2", lambda x: x / 2),
    ("x ^ 2", lambda x: x**2),
    ("2 ^ 3 ^ 2", lambda x: 2 ** (3**2)),
    ("-x ^ 2", lambda x: (-x) ** 2),
    ("-(x ^ 2)", lambda x: -(x**2)),
    ("1 - 2 - 3", lambda x: (1 - 2) - 3),
    ("8 / 4 / 2", lambda x: (8 / 4) / 2),
    ("1 + 2 * x", lambda x: 1 + 2 * x),
    ("(1 + 2) * x", lambda x: (1 + 2) * x),
    ("x ^ 0.5", lambda x: x**0.5),
    ("sqrt(x)", lambda x: math.sqrt(x)),
    ("log(x)", lambda x: math.log(x)),
    ("exp(x)", lambda x: math.exp(x)),
    ("exp(log(x))", lambda x: math.exp(math.log(x))),
    ("(x - 1) / log(x)", lambda x: (x - 1) / math.log(x)),
    ("(1 + x) / 2", lambda x: (1 + x) / 2),
    ("2 * x / (1 + x)", lambda x: 2 * x / (1 + x)),
    ("(x ^ 0.3 + x ^ 0.7) / 2", lambda x: (x**0.3 + x**0.7) / 2),
    ("((1 + x ^ 0.5) / 2) ^ 2", lambda x: ((1 + x**0.5) / 2) ** 2),
    ("x ^ (1 / 3)", lambda x: x ** (1 / 3)),
    ("x ^ -1", lambda x: x**-1),
    ("2 ^ -x", lambda x: 2**-x),
    ("--x", None),  # not in the grammar; checked separately
    ("-(-x)", lambda x: -(-x)),
    ("-1 + x", lambda x: -1 + x),
    ("x * -1", lambda x: x * -1),
    ("exp((x - 1) / 2)", lambda x: math.exp((x - 1) / 2)),
    ("log(1 + x) - log(2)", lambda x: math.log(1 + x) - math.log(2)),
    ("sqrt(x * (1 + x) / 2)", lambda x: math.sqrt(x * (1 + x) / 2)),
    ("x ^ x", lambda x: x**x),
    ("exp(x * log(x) / (x - 1) - 1)", lambda x: math.exp(x * math.log(x) / (x - 1) - 1)),
    ("1 / (0.5 / x + 0.5)", lambda x: 1 / (0.5 / x + 0.5)),
    ("(((x)))", lambda x: x),
    ("3 * (x - 1) ^ 2 / (x + 1)", lambda x: 3 * (x - 1) ** 2 / (x + 1)),
    ("x^2^0.5", lambda x: x ** (2**0.5)),
    ("1e3 * x", lambda x: 1e3 * x),
    ("1E-3 + x", lambda x: 1e-3 + x),
    ("sqrt(sqrt(x))", lambda x: math.sqrt(math.sqrt(x))),
    ("x/x/x", lambda x: (x / x) / x),
    ("x-x-x", lambda x: (x - x) - x),
    ("2*x^2*3", lambda x: 2 * x**2 * 3),
    ("-x*x", lambda x: (-x) * x),
    ("(x+1)^(x-1)", lambda x: (x + 1) ** (x - 1)),
    ("log(exp(x) + 1)", lambda x: math.log(math.exp(x) + 1)),
]
CORPUS_CASES = [(t, f) for t, f in CORPUS if f is not None]


def test_corpus_size():
    assert len(CORPUS_CASES) == 50


@pytest.mark.parametrize("text, oracle", CORPUS_CASES, ids=[t for t, _ in CORPUS_CASES])
def test_corpus_matches_python(text, oracle):
    tree = expr.parse(text)
    for x in (0.3, 1.7, 4.0):
        assert expr.evaluate(tree, x) == pytest.approx(oracle(x), rel=1e-15)


@pytest.mark.parametrize("text", [t for t, _ in CORPUS_CASES])
def test_corpus_round_trip(text):
    tree = expr.parse(text)
    again = expr.parse(expr.pretty(tree))
    assert again == tree
    assert expr.pretty(again) == expr.pretty(tree)


def test_precedence_examples():
    assert expr.evaluate(expr.parse("2^3^2"), 1.0) == 512.0
    assert expr.parse("-x^2") == BinOp("^", Neg(Var()), Num(2.0))
    assert expr.parse("1 + 2 * 3") == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))


@pytest.mark.parametrize(
    "text, offset",
    [
        ("", 0),
        ("x +", 3),
        ("(x", 2),
        ("x)", 1),
        ("foo(x)", 0),
        ("y", 0),
        ("x $ 1", 2),
        ("log x", 4),
        ("--x", 1),
        ("1e999", 0),
        ("x 1", 2),
    ],
)
def test_parse_errors_carry_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        expr.parse(text)
    assert info.value.offset == offset


def test_nesting_limits():
    expr.parse("(" * 100 + "x" + ")" * 100)
    with pytest.raises(ParseError):
        expr.parse("(" * 101 + "x" + ")" * 101)
    with pytest.raises(ParseError):
        expr.parse("+".join(["x"] * 500))
    with pytest.raises(ParseError):
        expr.parse("x" + " " * 5000)


def test_domain_errors():
    with pytest.raises(DomainError):
        expr.evaluate(expr.parse("log(x - 2)"), 1.0)
    with pytest.raises(DomainError):
        expr.evaluate(expr.parse("1 / (x - 1)"), 1.0)
    with pytest.raises(DomainError):
        expr.evaluate(expr.parse("sqrt(-x)"), 1.0)
    with pytest.raises(DomainError):
        expr.evaluate(expr.parse("exp(x)"), 1000.0)
    with pytest.raises(DomainError):
        expr.evaluate(expr.parse("(-x) ^ 0.5"), 2.0)


def test_removable_singularity_is_bridged():
    tree = expr.parse("(x - 1) / log(x)")
    assert expr.eval_guarded(tree, 1.0) == pytest.approx(1.0, abs=1e-12)


def test_log_mean_expression_matches_builtin():
    f = expr.parse_function("(x-1)/log(x)")
    assert f.weight == pytest.approx(0.5, abs=1e-9)
    assert classify(f).verdict is classify(builtin("log")).verdict is Verdict.PMI


def test_admission_rules():
    with pytest.raises(InvalidFunctionError) as info:
        expr.parse_function("x^2")
    assert info.value.rule == "weight"
    with pytest.raises(InvalidFunctionError) as info:
        expr.parse_function("x + 1")
    assert info.value.rule == "normalization"
    with pytest.raises(InvalidFunctionError) as info:
        expr.parse_function("2 - x^0.5")
    assert info.value.rule in ("weight", "monotonicity", "positivity")


def test_fuzz_totality():
    rng = random.Random(20261019)
    outcomes = {"ok": 0, "error": 0}
    for _ in range(10_000):
        data = bytes(rng.randrange(256) for _ in range(rng.randrange(257)))
        text = data.decode("latin-1")
        try:
            expr.parse(text)
            outcomes["ok"] += 1
        except ParseError:
            outcomes["error"] += 1
    assert sum(outcomes.values()) == 10_000


def test_fuzz_grammar_shaped_strings():
    rng = random.Random(7)
    alphabet = ["x", "1", "2.5", "+", "-", "*", "/", "^", "(", ")", "log(", "exp(", "sqrt(", " ", "e", "."]
    parsed = 0
    for _ in range(10_000):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 12)))
        try:
            tree = expr.parse(text)
        except ParseError:
            continue
        parsed += 1
        assert expr.parse(expr.pretty(tree)) == tree
        try:
            expr.evaluate(tree, 1.5)
        except DomainError:
            pass
    assert parsed > 50


def trees():
    leaves = st.one_of(
        st.just(Var()),
        st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
    )

    def extend(children):
        return st.one_of(
            children.map(Neg),
            st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
            st.tuples(st.sampled_from(sorted(expr.FUNCTIONS)), children).map(lambda t: Call(*t)),
        )

    return st.recursive(leaves, extend, max_leaves=25)


@settings(max_examples=300, deadline=None)
@given(trees())
def test_pretty_parse_round_trip(tree):
    assert expr.parse(expr.pretty(tree)) == tree
