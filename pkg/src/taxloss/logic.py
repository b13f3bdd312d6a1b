"""Propositional sentences over class-indicator variables.

Two sentence kinds exist.  :class:`ExactlyOne` is the taxonomy constraint:
exactly one variable of ``scope`` is true and every other variable of the
universe is false.  :class:`FormulaSentence` wraps an arbitrary and/or/not
expression for the generic compilation path.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable
from dataclasses import dataclass

from .taxonomy import Taxonomy

MAX_ENUM_VARS = 20


# --- expressions -------------------------------------------------------------


class Expr:
    def __and__(self, other):
        return And((self, other))

    def __or__(self, other):
        return Or((self, other))

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class Const(Expr):
    value: bool

    def __repr__(self):
        return "T" if self.value else "F"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Var(Expr):
    index: int

    def __repr__(self):
        return f"X{self.index}"


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr

    def __repr__(self):
        return f"~{self.arg!r}"


@dataclass(frozen=True)
class And(Expr):
    args: tuple[Expr, ...]

    def __repr__(self):
        return "(" + " & ".join(map(repr, self.args)) + ")"


@dataclass(frozen=True)
class Or(Expr):
    args: tuple[Expr, ...]

    def __repr__(self):
        return "(" + " | ".join(map(repr, self.args)) + ")"


def variables(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    if isinstance(e, Not):
        return variables(e.arg)
    if isinstance(e, (And, Or)):
        return set().union(*(variables(a) for a in e.args))
    return set()


def evaluate(e: Expr, x) -> bool:
    """Truth value under ``x``, a mapping (or sequence) from variable index to 0/1."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return bool(x[e.index])
    if isinstance(e, Not):
        return not evaluate(e.arg, x)
    if isinstance(e, And):
        return all(evaluate(a, x) for a in e.args)
    if isinstance(e, Or):
        return any(evaluate(a, x) for a in e.args)
    raise TypeError(f"not an expression: {e!r}")


def simplify(e: Expr) -> Expr:
    """Constant folding, flattening and duplicate removal.

    The result is a canonical-enough key for memoising compilation.
    """
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Not):
        a = simplify(e.arg)
        if isinstance(a, Const):
            return Const(not a.value)
        if isinstance(a, Not):
            return a.arg
        return Not(a)
    cls = type(e)
    absorbing = isinstance(e, Or)  # True absorbs Or, False absorbs And
    out: list[Expr] = []
    for a in e.args:
        a = simplify(a)
        if isinstance(a, Const):
            if a.value == absorbing:
                return a
            continue
        for b in a.args if isinstance(a, cls) else (a,):
            if b not in out:
                out.append(b)
    if not out:
        return Const(not absorbing)
    for b in out:
        if isinstance(b, Not) and b.arg in out:
            return Const(absorbing)
    return out[0] if len(out) == 1 else cls(tuple(out))


def restrict(e: Expr, var: int, value: bool) -> Expr:
    """Substitute ``var := value`` and simplify."""

    def sub(f):
        if isinstance(f, Var):
            return Const(value) if f.index == var else f
        if isinstance(f, Not):
            return Not(sub(f.arg))
        if isinstance(f, (And, Or)):
            return type(f)(tuple(sub(a) for a in f.args))
        return f

    return simplify(sub(e))


# --- sentences ---------------------------------------------------------------


@dataclass(frozen=True)
class ExactlyOne:
    scope: tuple[int, ...]
    universe: tuple[int, ...]

    def satisfied_by(self, x) -> bool:
        on = [v for v in self.universe if x[v]]
        return len(on) == 1 and on[0] in self.scope

    def dump(self) -> str:
        return f"EXACTLY_ONE scope=[{','.join(map(str, self.scope))}] universe_size={len(self.universe)}"


@dataclass(frozen=True)
class FormulaSentence:
    expr: Expr
    universe: tuple[int, ...]

    def __post_init__(self):
        extra = variables(self.expr) - set(self.universe)
        if extra:
            raise ValueError(f"formula mentions variables outside the universe: {sorted(extra)}")

    def satisfied_by(self, x) -> bool:
        return evaluate(self.expr, x)

    def dump(self) -> str:
        return f"FORMULA {self.expr!r} universe_size={len(self.universe)}"


Sentence = ExactlyOne | FormulaSentence


def _universe(u: Iterable[int]) -> tuple[int, ...]:
    u = tuple(sorted(set(int(v) for v in u)))
    if any(v < 0 for v in u):
        raise ValueError("variable indices must be non-negative")
    return u


def exactly_one(scope: Iterable[int], universe: Iterable[int]) -> ExactlyOne:
    s, u = _universe(scope), _universe(universe)
    if not s:
        raise ValueError("exactly-one scope must be non-empty")
    if not set(s) <= set(u):
        raise ValueError(f"scope {s} not contained in universe {u}")
    return ExactlyOne(s, u)


def formula(expr: Expr, universe: Iterable[int] | None = None) -> FormulaSentence:
    return FormulaSentence(expr, _universe(variables(expr) if universe is None else universe))


def node_sentence(tax: Taxonomy, node: int | str) -> ExactlyOne:
    n = tax.node(node)
    if n.is_leaf:
        raise ValueError(f"{n.name!r} is a leaf; node sentences exist for internal nodes and the root")
    return exactly_one(tax.leaves_under(n.id), range(tax.n_classes))


@dataclass(frozen=True)
class LevelSentences:
    level: int
    sentences: dict[int, ExactlyOne]


def level_sentences(tax: Taxonomy, j: int) -> LevelSentences:
    if not 0 <= j < tax.depth:
        raise IndexError(f"level {j} has no internal nodes (depth {tax.depth})")
    return LevelSentences(j, {nid: node_sentence(tax, nid) for nid in tax.level_nodes(j)})


@dataclass(frozen=True)
class AncestorAssignment:
    """Selected node per non-leaf level 1..L-1; ``None`` marks an unknown level."""

    selected: tuple[int | None, ...]

    @classmethod
    def for_node(cls, tax: Taxonomy, node: int) -> "AncestorAssignment":
        path = [v for v in tax.path(node) if not tax.nodes[v].is_leaf]
        return cls(tuple(path) + (None,) * (tax.depth - 1 - len(path)))

    @classmethod
    def for_class(cls, tax: Taxonomy, cls_index: int) -> "AncestorAssignment":
        return cls(tuple(tax.ancestor_chain(cls_index)))

    @property
    def complete(self) -> bool:
        return all(v is not None for v in self.selected)

    @property
    def deepest(self) -> int | None:
        known = [v for v in self.selected if v is not None]
        return known[-1] if known else None

    def validate(self, tax: Taxonomy) -> None:
        if len(self.selected) != tax.depth - 1:
            raise ValueError(f"need {tax.depth - 1} levels, got {len(self.selected)}")
        seen_gap = False
        parent = tax.root
        for j, v in enumerate(self.selected, 1):
            if v is None:
                seen_gap = True
                continue
            if seen_gap:
                raise ValueError("known levels must form a prefix from the top")
            n = tax.node(v)
            if n.level != j or n.parent != parent:
                raise ValueError(f"node {n.name!r} does not continue the ancestor path at level {j}")
            parent = v


def sentences_for_example(
    tax: Taxonomy, assignment: AncestorAssignment, supervised: bool | None = None
) -> list[ExactlyOne]:
    """Sentences selected for one example.

    Supervised examples (the whole chain is known, and by default any complete
    assignment) get one sentence per level.  Otherwise only the deepest known
    node's sentence applies, falling back to the flat one-hot at the root.
    """
    assignment.validate(tax)
    if supervised is None:
        supervised = assignment.complete
    if supervised:
        if not assignment.complete:
            raise ValueError("supervised selection needs every internal level")
        return [node_sentence(tax, v) for v in assignment.selected]
    deepest = assignment.deepest
    return [node_sentence(tax, tax.root if deepest is None else deepest)]


# --- enumeration oracle ------------------------------------------------------


def enumerate_models(s: Sentence) -> list[tuple[int, ...]]:
    """All satisfying assignments, as 0/1 tuples in universe order."""
    n = len(s.universe)
    if n > MAX_ENUM_VARS:
        raise ValueError(f"universe of {n} variables is too large to enumerate (max {MAX_ENUM_VARS})")
    models = []
    for bits in itertools.product((0, 1), repeat=n):
        x = dict(zip(s.universe, bits))
        if s.satisfied_by(x):
            models.append(bits)
    return models

