"""Smooth deterministic decomposable arithmetic circuits.

Sentences compile to circuits of literal, constant, sum and product nodes
stored in topological order (children before parents).  Under the
literal weights ``w(X_i) = p_i`` and ``w(~X_i) = 1 - p_i`` a circuit
evaluates to the weighted model count of its sentence; one reverse sweep
gives the gradient with respect to ``p``.

Exactly-one constraints use a closed-form block construction whose size is
linear in the universe.  Arbitrary formulas go through Shannon expansion in
ascending variable order with a sub-formula cache.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .logic import ExactlyOne, FormulaSentence, Sentence, enumerate_models, restrict, simplify
from .logic import FALSE as EXPR_FALSE
from .logic import TRUE as EXPR_TRUE

POS, NEG, CONST, SUM, PROD = range(5)
KIND_NAMES = ("pos", "neg", "const", "sum", "prod")

ENUM_CHECK_MAX_VARS = 12
DEFAULT_NODE_CAP = 200_000
EXACTLY_ONE_BLOCK = 4


class CircuitTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class Node:
    kind: int
    var: int = -1  # literal variable, or constant value for CONST
    children: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class Circuit:
    nodes: tuple[Node, ...]
    root: int
    n_vars: int

    def __len__(self) -> int:
        return len(self.nodes)

    def depth(self) -> int:
        d = [0] * len(self.nodes)
        for i, nd in enumerate(self.nodes):
            if nd.children:
                d[i] = 1 + max(d[c] for c in nd.children)
        return d[self.root]

    def kind_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(KIND_NAMES, 0)
        for nd in self.nodes:
            counts[KIND_NAMES[nd.kind]] += 1
        return counts

    def n_edges(self) -> int:
        return sum(len(nd.children) for nd in self.nodes)


@dataclass(frozen=True)
class WmcResult:
    value: float | np.ndarray
    gradient: np.ndarray


class _Builder:
    """Hash-consing node store.  ``None`` stands for the constant-true empty product."""

    def __init__(self, n_vars: int, cap: int = DEFAULT_NODE_CAP):
        self.n_vars = n_vars
        self.cap = cap
        self.nodes: list[Node] = []
        self.index: dict[Node, int] = {}

    def add(self, node: Node) -> int:
        i = self.index.get(node)
        if i is None:
            if len(self.nodes) >= self.cap:
                raise CircuitTooLarge(f"circuit exceeds {self.cap} nodes")
            i = self.index[node] = len(self.nodes)
            self.nodes.append(node)
        return i

    def pos(self, v):
        return self.add(Node(POS, v))

    def neg(self, v):
        return self.add(Node(NEG, v))

    def const(self, value: bool):
        return self.add(Node(CONST, int(value)))

    def prod(self, *kids):
        kids = tuple(k for k in kids if k is not None)
        if not kids:
            return None
        if len(kids) == 1:
            return kids[0]
        return self.add(Node(PROD, children=kids))

    def sum(self, *kids):
        if len(kids) == 1:
            return kids[0]
        return self.add(Node(SUM, children=tuple(kids)))

    def finish(self, root) -> Circuit:
        if root is None:
            root = self.const(True)
        keep = sorted(_reachable(self.nodes, root))
        remap = {old: new for new, old in enumerate(keep)}
        nodes = tuple(
            Node(self.nodes[i].kind, self.nodes[i].var, tuple(remap[c] for c in self.nodes[i].children))
            for i in keep
        )
        return Circuit(nodes, remap[root], self.n_vars)


def _reachable(nodes, root) -> set[int]:
    seen, stack = set(), [root]
    while stack:
        i = stack.pop()
        if i not in seen:
            seen.add(i)
            stack.extend(nodes[i].children)
    return seen


def _n_vars(universe) -> int:
    return max(universe) + 1 if universe else 0


def compile_exactly_one(s: ExactlyOne, block: int = EXACTLY_ONE_BLOCK) -> Circuit:
    """Block-factored exactly-one circuit.

    The scope is cut into blocks of ``block`` variables.  Walking the blocks
    back to front, ``E`` (exactly one true from here on) and ``Z`` (none
    true from here on) are

        E_b = sum_j [x_j, ~others in b, Z_next]  +  [~all in b, E_next]
        Z_b = [~all in b, Z_next]

    with ``Z`` after the last block being the product of negated out-of-scope
    literals.  Every sum decides on a variable of its block, so the circuit
    is deterministic; every sum child covers the same variables, so it is smooth.
    """
    b = _Builder(_n_vars(s.universe))
    scope = list(s.scope)
    inside = set(scope)
    tail_z = b.prod(*(b.neg(v) for v in s.universe if v not in inside))
    tail_e = None  # exactly-one over an empty suffix is false
    for start in reversed(range(0, len(scope), block)):
        blk = scope[start : start + block]
        negs = [b.neg(v) for v in blk]
        terms = [
            b.prod(b.pos(v), *(negs[:k] + negs[k + 1 :]), tail_z) for k, v in enumerate(blk)
        ]
        if tail_e is not None:
            terms.append(b.prod(*negs, tail_e))
        tail_e = b.sum(*terms)
        tail_z = b.prod(*negs, tail_z)
    return b.finish(tail_e)


def compile_formula(s: FormulaSentence, cap: int = DEFAULT_NODE_CAP) -> Circuit:
    """Shannon expansion in ascending universe order, memoised on (sub-formula, depth).

    Each sub-circuit at depth ``i`` mentions exactly ``order[i:]``: variables a
    branch does not depend on enter through ``x + ~x`` tautology nodes, which
    keeps the result smooth.
    """
    order = list(s.universe)
    b = _Builder(_n_vars(order), cap)
    taut_from: dict[int, int | None] = {len(order): None}

    def true_from(i):
        if i not in taut_from:
            v = order[i]
            taut_from[i] = b.prod(b.sum(b.pos(v), b.neg(v)), true_from(i + 1))
        return taut_from[i]

    memo: dict = {}
    FALSE = object()

    def rec(e, i):
        if e == EXPR_FALSE:
            return FALSE
        if e == EXPR_TRUE:
            return true_from(i)
        key = (e, i)
        if key in memo:
            return memo[key]
        v = order[i]
        hi = rec(restrict(e, v, True), i + 1)
        lo = rec(restrict(e, v, False), i + 1)
        if hi is FALSE and lo is FALSE:
            out = FALSE
        elif lo is FALSE:
            out = b.prod(b.pos(v), hi)
        elif hi is FALSE:
            out = b.prod(b.neg(v), lo)
        elif hi == lo:
            out = b.prod(b.sum(b.pos(v), b.neg(v)), hi)
        else:
            out = b.sum(b.prod(b.pos(v), hi), b.prod(b.neg(v), lo))
        memo[key] = out
        return out

    root = rec(simplify(s.expr), 0)
    if root is FALSE:
        return b.finish(b.const(False))
    return b.finish(root)


def compile(s: Sentence, **kw) -> Circuit:
    if isinstance(s, ExactlyOne):
        return compile_exactly_one(s, **kw)
    if isinstance(s, FormulaSentence):
        return compile_formula(s, **kw)
    raise TypeError(f"cannot compile {type(s).__name__}")


# --- evaluation --------------------------------------------------------------


def _as_batch(c: Circuit, p) -> tuple[np.ndarray, bool]:
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    p2 = p[None, :] if single else p
    if p2.ndim != 2 or p2.shape[1] != c.n_vars:
        raise ValueError(f"expected probabilities over {c.n_vars} variables, got shape {p.shape}")
    if np.any(p2 < 0.0) or np.any(p2 > 1.0) or np.any(np.isnan(p2)):
        raise ValueError("probabilities must lie in [0, 1]")
    return p2, single


def _forward(c: Circuit, p2: np.ndarray) -> list[np.ndarray]:
    vals: list[np.ndarray] = [None] * len(c.nodes)
    for i, nd in enumerate(c.nodes):
        k = nd.kind
        if k == POS:
            vals[i] = p2[:, nd.var]
        elif k == NEG:
            vals[i] = 1.0 - p2[:, nd.var]
        elif k == CONST:
            vals[i] = np.full(p2.shape[0], float(nd.var))
        elif k == SUM:
            acc = vals[nd.children[0]].copy()
            for ch in nd.children[1:]:
                acc += vals[ch]
            vals[i] = acc
        else:
            acc = vals[nd.children[0]].copy()
            for ch in nd.children[1:]:
                acc *= vals[ch]
            vals[i] = acc
    return vals


def wmc(c: Circuit, p):
    """Weighted model count; ``p`` may be one vector or a batch of rows."""
    p2, single = _as_batch(c, p)
    v = _forward(c, p2)[c.root]
    return float(v[0]) if single else v


def wmc_gradient(c: Circuit, p) -> WmcResult:
    """WMC and d WMC / d p_i by one reverse sweep.

    Product adjoints use prefix/suffix sibling products so exact 0/1
    probabilities are handled without division.
    """
    p2, single = _as_batch(c, p)
    vals = _forward(c, p2)
    B = p2.shape[0]
    adj: list[np.ndarray | None] = [None] * len(c.nodes)
    adj[c.root] = np.ones(B)
    grad = np.zeros((B, c.n_vars))

    def push(ch, g):
        if adj[ch] is None:
            adj[ch] = g.copy()
        else:
            adj[ch] += g

    for i in range(len(c.nodes) - 1, -1, -1):
        a = adj[i]
        if a is None:
            continue
        nd = c.nodes[i]
        if nd.kind == POS:
            grad[:, nd.var] += a
        elif nd.kind == NEG:
            grad[:, nd.var] -= a
        elif nd.kind == SUM:
            for ch in nd.children:
                push(ch, a)
        elif nd.kind == PROD:
            kids = nd.children
            m = len(kids)
            prefix = [np.ones(B)]
            for ch in kids[:-1]:
                prefix.append(prefix[-1] * vals[ch])
            suffix = np.ones(B)
            for k in range(m - 1, -1, -1):
                push(kids[k], a * prefix[k] * suffix)
                suffix = suffix * vals[kids[k]]
    value = vals[c.root]
    if single:
        return WmcResult(float(value[0]), grad[0])
    return WmcResult(value, grad)


def model_count(c: Circuit) -> float:
    """Unit-weight evaluation (both literal weights 1): models over the circuit's variables."""
    vals: list[float] = [0.0] * len(c.nodes)
    for i, nd in enumerate(c.nodes):
        if nd.kind in (POS, NEG):
            vals[i] = 1.0
        elif nd.kind == CONST:
            vals[i] = float(nd.var)
        elif nd.kind == SUM:
            vals[i] = sum(vals[ch] for ch in nd.children)
        else:
            vals[i] = float(np.prod([vals[ch] for ch in nd.children]))
    return vals[c.root]


def circuit_vars(c: Circuit) -> set[int]:
    return {nd.var for nd in c.nodes if nd.kind in (POS, NEG)}


def brute_force_wmc(s: Sentence, p) -> float:
    """Enumeration oracle: sum over models of the product of literal weights."""
    p = np.asarray(p, dtype=float)
    total = 0.0
    for bits in enumerate_models(s):
        w = 1.0
        for v, bit in zip(s.universe, bits):
            w *= p[v] if bit else 1.0 - p[v]
        total += w
    return total


# --- structure checks --------------------------------------------------------


@dataclass
class StructureReport:
    decomposable: bool = True
    smooth: bool = True
    deterministic: bool = True
    determinism_method: str = "enumeration"
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.decomposable and self.smooth and self.deterministic


def _varmasks(c: Circuit) -> list[int]:
    masks = [0] * len(c.nodes)
    for i, nd in enumerate(c.nodes):
        if nd.kind in (POS, NEG):
            masks[i] = 1 << nd.var
        else:
            for ch in nd.children:
                masks[i] |= masks[ch]
    return masks


def _literal_signature(c: Circuit, i: int) -> dict[int, int]:
    """Literals asserted by node ``i`` directly or through its product children."""
    nd = c.nodes[i]
    if nd.kind == POS:
        return {nd.var: 1}
    if nd.kind == NEG:
        return {nd.var: 0}
    if nd.kind == PROD:
        out = {}
        for ch in nd.children:
            if c.nodes[ch].kind in (POS, NEG):
                out[c.nodes[ch].var] = int(c.nodes[ch].kind == POS)
        return out
    return {}


def check_structure(c: Circuit, enum_max_vars: int = ENUM_CHECK_MAX_VARS) -> StructureReport:
    """Decomposability and smoothness exactly; determinism by enumeration.

    Above ``enum_max_vars`` variables determinism falls back to a syntactic
    certificate: every pair of sum children must assert opposite literals of
    some variable.
    """
    rep = StructureReport()
    masks = _varmasks(c)
    for i, nd in enumerate(c.nodes):
        if nd.kind == PROD:
            seen = 0
            for ch in nd.children:
                if seen & masks[ch]:
                    rep.decomposable = False
                    rep.violations.append(f"product {i}: children share variables")
                    break
                seen |= masks[ch]
        elif nd.kind == SUM:
            if len({masks[ch] for ch in nd.children}) > 1:
                rep.smooth = False
                rep.violations.append(f"sum {i}: children mention different variables")

    sums = [i for i, nd in enumerate(c.nodes) if nd.kind == SUM]
    if c.n_vars <= enum_max_vars:
        rep.determinism_method = "enumeration"
        X = np.array(list(itertools.product((0.0, 1.0), repeat=c.n_vars))) if c.n_vars else np.zeros((1, 0))
        truth = _forward(c, X)  # 0/1 inputs turn sums into counts and products into conjunctions
        for i in sums:
            covered = np.zeros(X.shape[0])
            for ch in c.nodes[i].children:
                covered += truth[ch] > 0
            if np.any(covered > 1):
                rep.deterministic = False
                rep.violations.append(f"sum {i}: children share a model")
    else:
        rep.determinism_method = "certificate"
        for i in sums:
            sigs = [_literal_signature(c, ch) for ch in c.nodes[i].children]
            for a, b in itertools.combinations(sigs, 2):
                if not any(v in b and b[v] != val for v, val in a.items()):
                    rep.deterministic = False
                    rep.violations.append(f"sum {i}: no conflicting literal certifies disjointness")
                    break
    return rep


def exactly_one_node_bound(universe_size: int) -> int:
    return 4 * universe_size + 6
