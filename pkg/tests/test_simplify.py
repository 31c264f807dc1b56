import itertools
import random

from hypothesis import given, settings, strategies as st

from gpsignal.gp.explain import dominates, nonnegative, simplify, terminal_frequencies
from gpsignal.gp.tree import Terminal, eval_tree, parse_sexp, size, to_sexp

from strategies import EVOLVED, trees


def test_idempotent_min():
    assert to_sexp(simplify(parse_sexp("(min x0 x0)"))) == "x0"


def test_max_absorbs_smaller_operand():
    assert to_sexp(simplify(parse_sexp("(max x3 (+ x3 x5))"))) == "(+ x3 x5)"


def test_min_absorbs_larger_operand():
    assert to_sexp(simplify(parse_sexp("(min x2 (+ x2 (* x4 x4)))"))) == "x2"


def test_subtraction_blocks_absorption():
    t = parse_sexp("(min x0 (+ x0 (- x1 x2)))")
    assert simplify(t) == t


def test_irreducible_tree_is_returned_as_is():
    t = parse_sexp("(+ (min x0 x1) (/ x2 x3))")
    assert simplify(t) is t


def test_evolved_tree_loses_redundant_branch():
    t = parse_sexp(EVOLVED)
    s = simplify(t)
    assert to_sexp(s) == "(+ (+ (+ x9 (min x0 x12)) x1) (+ x0 x1))"
    assert size(s) == 11 < size(t) == 15


def test_evolved_tree_exhaustive_grid():
    t, s = parse_sexp(EVOLVED), simplify(parse_sexp(EVOLVED))
    x = [0.0] * 16
    for v in itertools.product(range(7), repeat=4):
        x[0], x[1], x[9], x[12] = v
        assert eval_tree(s, x) == eval_tree(t, x)


def test_evolved_tree_random_samples():
    t, s = parse_sexp(EVOLVED), simplify(parse_sexp(EVOLVED))
    rng = random.Random(7)
    for _ in range(10_000):
        x = [rng.uniform(0, 200) for _ in range(16)]
        assert eval_tree(s, x) == eval_tree(t, x)


def test_nonnegative_and_dominates():
    assert nonnegative(parse_sexp("(/ (* x0 x1) (max x2 x3))"))
    assert not nonnegative(parse_sexp("(+ x0 (- x1 x2))"))
    assert dominates(parse_sexp("(+ x0 x1)"), Terminal(0))
    assert not dominates(Terminal(0), parse_sexp("(+ x0 x1)"))


counts = st.lists(st.integers(0, 30).map(float), min_size=16, max_size=16)


@settings(max_examples=300, deadline=None)
@given(trees(max_leaves=16), st.lists(counts, min_size=1, max_size=5))
def test_simplify_preserves_values_on_counts(tree, inputs):
    s = simplify(tree, check_samples=200)
    assert size(s) <= size(tree)
    for x in inputs:
        assert eval_tree(s, x) == eval_tree(tree, x)


def test_terminal_frequencies():
    freq = terminal_frequencies([parse_sexp("(+ x0 x1)"), Terminal(0)])
    assert freq[0] == 1.0 and freq[1] == 0.5 and sum(freq) == 1.5
    assert terminal_frequencies([]) == [0.0] * 16


def test_terminal_frequencies_of_evolved_tree():
    freq = terminal_frequencies([parse_sexp(EVOLVED)])
    assert {i: f for i, f in enumerate(freq) if f} == {0: 3, 1: 3, 9: 1, 12: 1}
