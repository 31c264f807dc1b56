"""Interpretation aids: sound simplification and terminal usage statistics."""

from __future__ import annotations

import random

from .tree import N_TERMINALS, Function, Op, Terminal, Tree, eval_tree, size, terminal_counts


def nonnegative(t: Tree) -> bool:
    """Provably ``>= 0`` whenever every feature is ``>= 0``."""
    if isinstance(t, Terminal):
        return True
    if t.op is Op.SUB:
        return False
    if t.op is Op.MAX:
        return nonnegative(t.left) or nonnegative(t.right)
    return nonnegative(t.left) and nonnegative(t.right)


def dominates(b: Tree, a: Tree) -> bool:
    """Provably ``b >= a`` on the non-negative feature domain (incomplete but sound)."""
    if b == a:
        return True
    if isinstance(b, Function):
        if b.op is Op.ADD and ((dominates(b.left, a) and nonnegative(b.right))
                               or (dominates(b.right, a) and nonnegative(b.left))):
            return True
        if b.op is Op.MAX and (dominates(b.left, a) or dominates(b.right, a)):
            return True
        if b.op is Op.MIN and dominates(b.left, a) and dominates(b.right, a):
            return True
    if isinstance(a, Function):
        if a.op is Op.MIN and (dominates(b, a.left) or dominates(b, a.right)):
            return True
        if a.op is Op.MAX and dominates(b, a.left) and dominates(b, a.right):
            return True
        if a.op is Op.SUB and dominates(b, a.left) and nonnegative(a.right):
            return True
    return False


def _chain(t: Tree, op: Op) -> list[Tree]:
    if isinstance(t, Function) and t.op is op:
        return _chain(t.left, op) + _chain(t.right, op)
    return [t]


def _prune(operands: list[Tree], op: Op) -> list[Tree]:
    # for min an operand is redundant when it dominates a kept one; for max, when it is dominated
    def redundant(x, y):
        return dominates(x, y) if op is Op.MIN else dominates(y, x)

    kept: list[Tree] = []
    for o in operands:
        if any(redundant(o, k) for k in kept):
            continue
        kept = [k for k in kept if not redundant(k, o)]
        kept.append(o)
    return kept


def _rewrite(t: Tree) -> Tree:
    if isinstance(t, Terminal):
        return t
    left, right = _rewrite(t.left), _rewrite(t.right)
    if t.op in (Op.MIN, Op.MAX):
        kept = _prune(_chain(left, t.op) + _chain(right, t.op), t.op)
        out = kept[0]
        for o in kept[1:]:
            out = Function(t.op, out, o)
        return out
    return Function(t.op, left, right)


def _agree(a: Tree, b: Tree, samples: int, seed: int) -> bool:
    rng = random.Random(seed)
    for k in range(samples):
        if k % 2:
            x = [float(rng.randrange(7)) for _ in range(N_TERMINALS)]
        else:
            x = [rng.uniform(0.0, 60.0) for _ in range(N_TERMINALS)]
        if eval_tree(a, x) != eval_tree(b, x):
            return False
    return True


def simplify(tree: Tree, check_samples: int = 2000, seed: int = 0) -> Tree:
    """Equivalent tree on non-negative inputs with redundant min/max operands removed.

    Handles idempotence (``min(a, a) -> a``) and absorption such as
    ``min(a, a + b) -> a`` and ``max(a, a + b) -> a + b`` for provably
    non-negative ``b``, across nested chains of the same operator. The
    result is cross-checked on random non-negative inputs and the input is
    returned unchanged if any sample disagrees.
    """
    out = _rewrite(tree)
    if out == tree or size(out) > size(tree):
        return tree
    return out if _agree(tree, out, check_samples, seed) else tree


def terminal_frequencies(trees) -> list[float]:
    """Mean number of occurrences of each terminal ``x0..x15`` per tree."""
    trees = list(trees)
    if not trees:
        return [0.0] * N_TERMINALS
    totals = [0] * N_TERMINALS
    for t in trees:
        for i, c in enumerate(terminal_counts(t)):
            totals[i] += c
    return [c / len(trees) for c in totals]
