"""Taxonomy semantic losses on softmax outputs.

The supervised loss sums ``-log WMC`` over the node sentences of a leaf's
ancestor chain.  The semi-supervised loss uses the sentence of the deepest
node known for an unlabelled example (the root's sentence is the flat
one-hot constraint).  ``L1Only`` applies just that one-hot constraint.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, compile, wmc_gradient
from .logic import node_sentence
from .taxonomy import Taxonomy

DEFAULT_EPS = 1e-12


class Mode(str, enum.Enum):
    SUPERVISED = "supervised"
    SEMI = "semi"
    L1_ONLY = "l1only"


class SemiAggregation(str, enum.Enum):
    DEEPEST = "deepest"  # one term: the deepest known node
    SUM_LEVELS = "sum_levels"  # -log of the summed WMCs over every known level


@dataclass(eq=False)
class SemanticLossContext:
    tax: Taxonomy
    mode: Mode = Mode.SUPERVISED
    epsilon: float = DEFAULT_EPS
    aggregation: SemiAggregation = SemiAggregation.DEEPEST
    circuits: dict[int, Circuit] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.mode = Mode(self.mode)
        self.aggregation = SemiAggregation(self.aggregation)
        if not 0.0 < self.epsilon <= 1e-6:
            raise ValueError(f"epsilon must lie in (0, 1e-6], got {self.epsilon}")
        if not self.circuits:
            for nid in self.tax.internal_nodes():
                self.circuits[nid] = compile(node_sentence(self.tax, nid))

    def target_nodes(self, target: int | None) -> list[int]:
        """Nodes whose sentences apply to one example under the context's mode.

        ``target`` is a class index in supervised mode, a known node id in
        semi mode, and ignored for ``L1Only``.
        """
        tax = self.tax
        if self.mode is Mode.L1_ONLY:
            return [tax.root]
        if self.mode is Mode.SUPERVISED:
            return tax.ancestor_chain(target)
        node = tax.node(target)
        if node.is_leaf:
            raise ValueError(f"known node {node.name!r} is a leaf; labelled examples take cross-entropy")
        if self.aggregation is SemiAggregation.SUM_LEVELS and node.id != tax.root:
            return tax.path(node.id)
        return [node.id]


def _check_p(p: np.ndarray, n: int):
    if p.shape[-1] != n:
        raise ValueError(f"expected {n} class probabilities, got {p.shape[-1]}")


def cross_entropy(p, leaf: int, epsilon: float = DEFAULT_EPS) -> float:
    p = np.asarray(p, dtype=float)
    if not 0 <= leaf < p.shape[0]:
        raise ValueError(f"class {leaf} out of range for {p.shape[0]} outputs")
    return -math.log(max(p[leaf], epsilon))


def _loss_at(ctx: SemanticLossContext, p: np.ndarray, target) -> tuple[float, np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    _check_p(p, ctx.tax.n_classes)
    nodes = ctx.target_nodes(target)
    eps = ctx.epsilon
    results = [wmc_gradient(ctx.circuits[v], p) for v in nodes]
    sat = np.array([r.value for r in results])
    if ctx.mode is Mode.SEMI and ctx.aggregation is SemiAggregation.SUM_LEVELS:
        total = max(sat.sum(), eps)
        grad = -sum(r.gradient for r in results) / total
        return -math.log(total), sat, grad
    loss = float(sum(-math.log(max(v, eps)) for v in sat))
    grad = np.zeros_like(p)
    for r in results:
        grad -= r.gradient / max(r.value, eps)
    return loss, sat, grad


def semantic_loss_supervised(ctx: SemanticLossContext, p, leaf: int) -> tuple[float, np.ndarray]:
    if ctx.mode is not Mode.SUPERVISED:
        raise ValueError(f"context is in {ctx.mode.value} mode, not supervised")
    loss, sat, _ = _loss_at(ctx, p, leaf)
    return loss, sat


def semantic_loss_semi(ctx: SemanticLossContext, p, known_node: int) -> tuple[float, np.ndarray]:
    if ctx.mode is not Mode.SEMI:
        raise ValueError(f"context is in {ctx.mode.value} mode, not semi")
    loss, sat, _ = _loss_at(ctx, p, known_node)
    return loss, sat


def semantic_loss_l1(ctx: SemanticLossContext, p) -> tuple[float, np.ndarray]:
    if ctx.mode is not Mode.L1_ONLY:
        raise ValueError(f"context is in {ctx.mode.value} mode, not l1only")
    loss, sat, _ = _loss_at(ctx, p, None)
    return loss, sat


def semantic_loss_grad(ctx: SemanticLossContext, p, target=None) -> np.ndarray:
    """d loss / d p, i.e. ``-sum_j grad WMC_j / max(WMC_j, eps)``."""
    return _loss_at(ctx, p, target)[2]


def combine_loss(existing: float, semantic: float, w: float) -> float:
    if w < 0:
        raise ValueError(f"regularizer weight must be non-negative, got {w}")
    return existing + w * semantic


@dataclass
class BatchSemantic:
    losses: np.ndarray  # (B,)
    grads: np.ndarray  # (B, n) d loss_b / d p_b
    sat: list[float]  # every WMC evaluated, in (node, example) order


def batch_semantic(ctx: SemanticLossContext, P: np.ndarray, targets: Sequence) -> BatchSemantic:
    """Per-example losses and gradients for a batch, one circuit pass per node.

    Examples are grouped by the node sentences they need so each circuit is
    evaluated once over its rows; the reduction order is fixed by node id.
    """
    P = np.asarray(P, dtype=float)
    _check_p(P, ctx.tax.n_classes)
    B = P.shape[0]
    groups: dict[int, list[int]] = {}
    for b, t in enumerate(targets):
        for v in ctx.target_nodes(t):
            groups.setdefault(v, []).append(b)

    eps = ctx.epsilon
    summed = ctx.mode is Mode.SEMI and ctx.aggregation is SemiAggregation.SUM_LEVELS
    values = np.zeros(B)
    wgrad = np.zeros_like(P)
    losses = np.zeros(B)
    grads = np.zeros_like(P)
    sat: list[float] = []
    for v in sorted(groups):
        rows = np.array(groups[v])
        res = wmc_gradient(ctx.circuits[v], P[rows])
        sat.extend(res.value.tolist())
        if summed:
            np.add.at(values, rows, res.value)
            np.add.at(wgrad, rows, res.gradient)
        else:
            guarded = np.maximum(res.value, eps)
            np.add.at(losses, rows, -np.log(guarded))
            np.add.at(grads, rows, -res.gradient / guarded[:, None])
    if summed:
        has = np.zeros(B, dtype=bool)
        for rows in groups.values():
            has[rows] = True
        guarded = np.maximum(values, eps)
        losses = np.where(has, -np.log(guarded), 0.0)
        grads = np.where(has[:, None], -wgrad / guarded[:, None], 0.0)
    return BatchSemantic(losses, grads, sat)
