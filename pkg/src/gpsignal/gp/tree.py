"""Expression trees over the 16 phase features.

Trees are immutable: a :class:`Terminal` reads one feature, a
:class:`Function` applies a binary operator to two subtrees. Every
intermediate result saturates to ``[-SATURATION, SATURATION]`` so that
evaluation stays finite and comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterator, Union

import numpy as np

from ..errors import ParseError

N_TERMINALS = 16
SATURATION = 1e12


class Op(str, Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    MIN = "min"
    MAX = "max"


OPS = tuple(Op)
_BY_SYMBOL = {op.value: op for op in Op}


@dataclass(frozen=True, slots=True)
class Terminal:
    index: int

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True, slots=True)
class Function:
    op: Op
    left: "Tree"
    right: "Tree"

    def __str__(self):
        return f"({self.op.value} {self.left} {self.right})"


Tree = Union[Terminal, Function]


def _sat(v: float) -> float:
    if v > SATURATION:
        return SATURATION
    if v < -SATURATION:
        return -SATURATION
    return v


def apply_op(op: Op, a: float, b: float) -> float:
    if op is Op.ADD:
        return _sat(a + b)
    if op is Op.SUB:
        return _sat(a - b)
    if op is Op.MUL:
        return _sat(a * b)
    if op is Op.DIV:
        return 1.0 if b == 0 else _sat(a / b)
    if op is Op.MIN:
        return a if a <= b else b
    return a if a >= b else b


def eval_tree(tree: Tree, x) -> float:
    """Reference interpreter: value of ``tree`` on one feature vector."""
    if isinstance(tree, Terminal):
        return float(x[tree.index])
    return apply_op(tree.op, eval_tree(tree.left, x), eval_tree(tree.right, x))


def depth(tree: Tree) -> int:
    """Number of levels; a lone terminal has depth 1."""
    if isinstance(tree, Terminal):
        return 1
    return 1 + max(depth(tree.left), depth(tree.right))


def size(tree: Tree) -> int:
    if isinstance(tree, Terminal):
        return 1
    return 1 + size(tree.left) + size(tree.right)


def nodes(tree: Tree, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Tree]]:
    """Preorder ``(path, subtree)`` pairs; a path is the sequence of child indices from the root."""
    yield path, tree
    if isinstance(tree, Function):
        yield from nodes(tree.left, path + (0,))
        yield from nodes(tree.right, path + (1,))


def replace(tree: Tree, path: tuple[int, ...], new: Tree) -> Tree:
    if not path:
        return new
    if not isinstance(tree, Function):
        raise IndexError("path descends below a terminal")
    if path[0] == 0:
        return Function(tree.op, replace(tree.left, path[1:], new), tree.right)
    return Function(tree.op, tree.left, replace(tree.right, path[1:], new))


def terminal_counts(tree: Tree) -> list[int]:
    counts = [0] * N_TERMINALS
    for _, node in nodes(tree):
        if isinstance(node, Terminal):
            counts[node.index] += 1
    return counts


# -- S-expressions -------------------------------------------------------------


def to_sexp(tree: Tree) -> str:
    return str(tree)


def _tokens(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _terminal(tok: str) -> Terminal:
    if tok[:1] == "x" and tok[1:].isdigit():
        k = int(tok[1:])
        if 0 <= k < N_TERMINALS and tok[1:] == str(k):
            return Terminal(k)
    raise ParseError(f"unknown terminal {tok!r}")


def parse_sexp(text: str) -> Tree:
    """Parse prefix notation such as ``(+ (min x0 x12) x1)``."""
    toks = _tokens(text)
    if not toks:
        raise ParseError("empty expression")
    pos = 0

    def read() -> Tree:
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of expression")
        tok = toks[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unbalanced ')'")
        if tok != "(":
            return _terminal(tok)
        if pos >= len(toks) or toks[pos] not in _BY_SYMBOL:
            raise ParseError(f"expected operator after '(' at token {pos}")
        op = _BY_SYMBOL[toks[pos]]
        pos += 1
        left, right = read(), read()
        if pos >= len(toks) or toks[pos] != ")":
            raise ParseError(f"operator {op.value!r} takes exactly two arguments")
        pos += 1
        return Function(op, left, right)

    tree = read()
    if pos != len(toks):
        raise ParseError(f"trailing tokens after expression: {' '.join(toks[pos:])}")
    return tree


def to_infix(tree: Tree) -> str:
    """Human-readable infix form, e.g. ``x9 + min(x0, x12)``."""
    if isinstance(tree, Terminal):
        return str(tree)
    a, b = to_infix(tree.left), to_infix(tree.right)
    if tree.op in (Op.MIN, Op.MAX):
        return f"{tree.op.value}({a}, {b})"
    return f"({a} {tree.op.value} {b})"


# -- vectorised evaluation -------------------------------------------------------


def _clip(v):
    return np.clip(v, -SATURATION, SATURATION, out=v)


def _pdiv(a, b):
    out = np.ones(np.broadcast(a, b).shape)
    np.divide(a, b, out=out, where=b != 0)
    return _clip(out)


_NP_TEMPLATES = {
    Op.ADD: "({} + {})",
    Op.SUB: "({} - {})",
    Op.MUL: "({} * {})",
    Op.DIV: "_pdiv({}, {})",
    Op.MIN: "_min({}, {})",
    Op.MAX: "_max({}, {})",
}

COUNT_BOUND = 1e6  # features are vehicle counts in [0, COUNT_BOUND]


def _np_source(tree: Tree, prune: bool) -> tuple[str, float, float, bool]:
    """Source text plus (lo, hi, integral) bounds of the subtree's value on count inputs.

    With ``prune`` a saturation is emitted only where the bounds show it can
    bite; the result then equals the fully saturated evaluation on any input
    of non-negative integers up to ``COUNT_BOUND``.
    """
    if isinstance(tree, Terminal):
        return f"c[{tree.index}]", 0.0, COUNT_BOUND, True
    a, alo, ahi, aint = _np_source(tree.left, prune)
    b, blo, bhi, bint = _np_source(tree.right, prune)
    op = tree.op
    integral = aint and bint
    if op is Op.ADD:
        lo, hi = alo + blo, ahi + bhi
    elif op is Op.SUB:
        lo, hi = alo - bhi, ahi - blo
    elif op is Op.MUL:
        corners = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
        lo, hi = min(corners), max(corners)
    elif op is Op.DIV:
        if bint:  # a non-zero integer divisor has magnitude >= 1
            m = max(abs(alo), abs(ahi))
            lo, hi = min(-m, 1.0), max(m, 1.0)
        else:
            lo, hi = -math.inf, math.inf
        integral = False
    elif op is Op.MIN:
        lo, hi = min(alo, blo), min(ahi, bhi)
    else:
        lo, hi = max(alo, blo), max(ahi, bhi)
    src = _NP_TEMPLATES[op].format(a, b)
    if op not in (Op.MIN, Op.MAX) and (not prune or lo < -SATURATION or hi > SATURATION):
        src = f"_clip({src})"
        lo, hi = max(lo, -SATURATION), min(hi, SATURATION)
    return src, lo, hi, integral


@lru_cache(maxsize=4096)
def _compile(sexp: str, prune: bool):
    tree = parse_sexp(sexp)
    namespace = {"_clip": _clip, "_pdiv": _pdiv, "_min": np.minimum, "_max": np.maximum}
    exec(f"def urgency(c):\n    return {_np_source(tree, prune)[0]}\n", namespace)
    return namespace["urgency"]


def _counts_only(cols: np.ndarray) -> bool:
    return cols.size == 0 or (cols.min() >= 0 and cols.max() <= COUNT_BOUND
                              and not np.any(np.mod(cols, 1.0)))


def compile_tree(tree: Tree, counts: bool = False):
    """Vectorised evaluator: maps a ``(rows, 16)`` feature matrix to a ``(rows,)`` value array.

    Produces exactly the values of :func:`eval_tree` row by row. Matrices of
    vehicle counts take a faster path that omits provably inactive
    saturations; pass ``counts=True`` to skip the check when the caller
    guarantees such input.
    """
    sexp = to_sexp(tree)
    fast, safe = _compile(sexp, True), _compile(sexp, False)

    def evaluate(features: np.ndarray) -> np.ndarray:
        cols = np.ascontiguousarray(np.asarray(features, dtype=float).T)
        fn = fast if counts or _counts_only(cols) else safe
        with np.errstate(over="ignore", divide="ignore"):
            out = fn(cols)
        return np.broadcast_to(out, (cols.shape[1],)).astype(float, copy=True)

    return evaluate
