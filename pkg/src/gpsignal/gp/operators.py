"""Initialisation, selection and variation operators.

All randomness comes from the ``random.Random`` passed in, so a seeded
generator reproduces every decision.
"""

from __future__ import annotations

import random

from .tree import N_TERMINALS, OPS, Function, Terminal, Tree, depth, nodes, replace

MAX_DEPTH = 8
MUTATION_DEPTH = 4
_TERMINAL_SHARE = N_TERMINALS / (N_TERMINALS + len(OPS))


def random_terminal(rng: random.Random) -> Terminal:
    return Terminal(rng.randrange(N_TERMINALS))


def full(rng: random.Random, target: int) -> Tree:
    """Tree whose leaves all sit at depth ``target``."""
    if target <= 1:
        return random_terminal(rng)
    op = rng.choice(OPS)
    return Function(op, full(rng, target - 1), full(rng, target - 1))


def grow(rng: random.Random, max_depth: int, min_depth: int = 1, _level: int = 1) -> Tree:
    """Tree of depth in ``[min_depth, max_depth]``.

    Below ``min_depth`` only functions are drawn; from there on a node is a
    terminal with probability proportional to the terminal set's share of
    all primitives, and always a terminal at ``max_depth``.
    """
    if _level >= max_depth or (_level >= min_depth and rng.random() < _TERMINAL_SHARE):
        return random_terminal(rng)
    op = rng.choice(OPS)
    return Function(op, grow(rng, max_depth, min_depth, _level + 1),
                    grow(rng, max_depth, min_depth, _level + 1))


def ramped_half_and_half(config, rng: random.Random) -> list[Tree]:
    """``config.population_size`` trees with target depths cycling over the ramp.

    Trees alternate between the full and grow methods within each ramp depth.
    """
    ramp = list(range(config.init_min_depth, config.max_depth + 1))
    population = []
    for i in range(config.population_size):
        target = ramp[i % len(ramp)]
        if (i // len(ramp)) % 2 == 0:
            population.append(full(rng, target))
        else:
            population.append(grow(rng, target, min(config.init_min_depth, target)))
    return population


def tournament_index(fitnesses, k: int, rng: random.Random) -> int:
    draws = [rng.randrange(len(fitnesses)) for _ in range(k)]
    return min(draws, key=lambda i: (fitnesses[i], i))


def tournament_select(population, fitnesses, k: int, rng: random.Random) -> Tree:
    """Best (lowest fitness) of ``k`` uniform draws with replacement; ties go to the lowest index."""
    return population[tournament_index(fitnesses, k, rng)]


def subtree_crossover(p1: Tree, p2: Tree, rng: random.Random, max_depth: int = MAX_DEPTH) -> Tree:
    """Replace a uniformly chosen node of ``p1`` by a uniformly chosen subtree of ``p2``.

    Returns ``p1`` itself when the offspring would exceed ``max_depth``.
    """
    sites = list(nodes(p1))
    donors = list(nodes(p2))
    path, _ = sites[rng.randrange(len(sites))]
    _, donor = donors[rng.randrange(len(donors))]
    child = replace(p1, path, donor)
    return child if depth(child) <= max_depth else p1


def subtree_mutation(p: Tree, rng: random.Random, max_depth: int = MAX_DEPTH,
                     subtree_depth: int = MUTATION_DEPTH) -> Tree:
    """Replace a uniformly chosen node by a fresh grow-method subtree of depth ``<= subtree_depth``."""
    sites = list(nodes(p))
    path, _ = sites[rng.randrange(len(sites))]
    child = replace(p, path, grow(rng, subtree_depth))
    return child if depth(child) <= max_depth else p
