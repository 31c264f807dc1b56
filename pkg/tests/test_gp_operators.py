import random

import pytest

from gpsignal.gp.evolve import EvolutionConfig
from gpsignal.gp.operators import (full, grow, ramped_half_and_half, subtree_crossover, subtree_mutation,
                                   tournament_index, tournament_select)
from gpsignal.gp.tree import Function, Terminal, depth, nodes, parse_sexp, replace, to_sexp


class ScriptedRng:
    """Stand-in for random.Random that replays fixed randrange results."""

    def __init__(self, draws):
        self.draws = list(draws)

    def randrange(self, n):
        return self.draws.pop(0)


def leaf_depths(tree, level=1):
    if isinstance(tree, Terminal):
        return [level]
    return leaf_depths(tree.left, level + 1) + leaf_depths(tree.right, level + 1)


def all_binary(tree):
    return all(isinstance(n, Terminal) or (n.left is not None and n.right is not None) for _, n in nodes(tree))


def test_ramped_population_depths():
    pop = ramped_half_and_half(EvolutionConfig(population_size=100), random.Random(0))
    assert len(pop) == 100
    assert all(3 <= depth(t) <= 8 for t in pop)
    assert {depth(t) for t in pop} == set(range(3, 9))
    assert all(all_binary(t) for t in pop)


def test_ramped_population_is_seeded():
    cfg = EvolutionConfig(population_size=40)
    a = [to_sexp(t) for t in ramped_half_and_half(cfg, random.Random(5))]
    b = [to_sexp(t) for t in ramped_half_and_half(cfg, random.Random(5))]
    assert a == b


@pytest.mark.parametrize("d", range(1, 9))
def test_full_leaves_at_exact_depth(d):
    rng = random.Random(d)
    for _ in range(5):
        assert set(leaf_depths(full(rng, d))) == {d}


def test_grow_respects_bounds():
    rng = random.Random(2)
    for _ in range(300):
        t = grow(rng, 6, 3)
        assert 3 <= depth(t) <= 6


def test_ramped_half_are_full_half_grow():
    cfg = EvolutionConfig(population_size=12)
    pop = ramped_half_and_half(cfg, random.Random(1))
    # first ramp pass is full: leaves at exactly the target depth
    for i, t in enumerate(pop[:6]):
        assert set(leaf_depths(t)) == {3 + i}


def test_tournament_degenerate_cases():
    assert tournament_select(["only"], [4.0], 3, random.Random(0)) == "only"
    assert tournament_index([5, 1, 9], 3, ScriptedRng([2, 2, 2])) == 2


def test_tournament_scripted_draw():
    # A:10, B:20, C:30 and draws B, C, B
    assert tournament_select(["A", "B", "C"], [10, 20, 30], 3, ScriptedRng([1, 2, 1])) == "B"


def test_tournament_ties_prefer_lowest_index():
    assert tournament_index([7, 3, 3], 3, ScriptedRng([2, 1, 2])) == 1


def test_tournament_worst_probability():
    n, k, trials = 10, 3, 100_000
    rng = random.Random(1234)
    fits = list(range(n))
    worst = sum(tournament_index(fits, k, rng) == n - 1 for _ in range(trials))
    p = (1 / n) ** k
    sigma = (trials * p * (1 - p)) ** 0.5
    assert abs(worst - trials * p) <= 3 * sigma


def test_crossover_of_terminals():
    a, b = Terminal(3), Terminal(8)
    for seed in range(20):
        assert subtree_crossover(a, b, random.Random(seed)) in (a, b)


def test_crossover_golden():
    p1 = parse_sexp("(+ (min x0 x12) (* x1 x9))")
    p2 = parse_sexp("(- (max x3 x4) (/ x5 x0))")
    # preorder node lists written out by hand
    sites = [(), (0,), (0, 0), (0, 1), (1,), (1, 0), (1, 1)]
    donors = ["(- (max x3 x4) (/ x5 x0))", "(max x3 x4)", "x3", "x4", "(/ x5 x0)", "x5", "x0"]
    probe = random.Random(11)
    site, donor = sites[probe.randrange(7)], donors[probe.randrange(7)]
    expected = to_sexp(replace(p1, site, parse_sexp(donor)))
    assert to_sexp(subtree_crossover(p1, p2, random.Random(11))) == expected == "(+ (min x0 x0) (* x1 x9))"


def test_crossover_depth_guard():
    deep = full(random.Random(0), 8)
    donor = full(random.Random(1), 7)
    for seed in range(50):
        assert depth(subtree_crossover(deep, donor, random.Random(seed))) <= 8
    rng = ScriptedRng([3, 0])  # a depth-4 site of p1, the whole depth-7 donor
    assert subtree_crossover(deep, donor, rng) is deep


def test_mutation_golden():
    p = parse_sexp("(+ (min x0 x12) (* x1 x9))")
    a = subtree_mutation(p, random.Random(11))
    b = subtree_mutation(p, random.Random(11))
    assert a == b
    assert to_sexp(a) == "(+ (min x0 (/ x6 x15)) (* x1 x9))"


def test_mutation_bounds():
    rng = random.Random(3)
    for _ in range(200):
        root_only = subtree_mutation(Terminal(2), rng)
        assert depth(root_only) <= 4
    deep = full(random.Random(0), 8)
    for seed in range(100):
        assert depth(subtree_mutation(deep, random.Random(seed))) <= 8


def test_mutation_of_terminal_can_yield_terminal():
    outcomes = {type(subtree_mutation(Terminal(0), random.Random(s))) for s in range(200)}
    assert outcomes == {Terminal, Function}
