"""Batch backbone graph convolution as a taxonomy regularizer.

Each batch builds one graph: the taxonomy tree (nodes in level order) plus
one node per document, joined by a single edge to the document's known
node.  A graph convolution over that graph produces per-document class
distributions ``H`` and the regularizer is ``||P - H||^2`` against the
classifier's probabilities ``P``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .data import SupervisionRecord
from .taxonomy import Taxonomy


@dataclass(frozen=True, eq=False)
class BackboneGraph:
    order: tuple[int, ...]  # taxonomy node ids by row
    doc_ids: tuple[str, ...]
    adjacency: np.ndarray  # symmetric 0/1, zero diagonal
    propagation: np.ndarray  # D^-1/2 (A + I) D^-1/2

    @property
    def n_tax(self) -> int:
        return len(self.order)

    @property
    def doc_rows(self) -> slice:
        return slice(self.n_tax, self.n_tax + len(self.doc_ids))

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int)


def tax_row_order(tax: Taxonomy) -> list[int]:
    return [v for j in range(tax.depth + 1) for v in tax.level_nodes(j)]


def normalize(a_tilde: np.ndarray) -> np.ndarray:
    a_tilde = np.asarray(a_tilde, dtype=float)
    d = a_tilde.sum(axis=1)
    if np.any(d <= 0):
        raise ValueError("every node needs positive degree (self-loops included)")
    s = 1.0 / np.sqrt(d)
    return a_tilde * s[:, None] * s[None, :]


def build_backbone(tax: Taxonomy, batch: Sequence[SupervisionRecord]) -> BackboneGraph:
    order = tax_row_order(tax)
    row = {v: i for i, v in enumerate(order)}
    n_tax = len(order)
    n = n_tax + len(batch)
    A = np.zeros((n, n))
    for v in order:
        parent = tax.nodes[v].parent
        if parent is not None:
            A[row[v], row[parent]] = A[row[parent], row[v]] = 1.0
    for k, r in enumerate(batch):
        if r.known_node not in row:
            raise KeyError(f"document {r.id!r} references unknown node {r.known_node}")
        A[n_tax + k, row[r.known_node]] = A[row[r.known_node], n_tax + k] = 1.0
    return BackboneGraph(tuple(order), tuple(r.id for r in batch), A, normalize(A + np.eye(n)))


@dataclass
class GcnParams:
    """Layer weights plus one trainable feature row per taxonomy node."""

    weights: list[np.ndarray]
    node_features: np.ndarray  # (n_tax, d), rows follow tax_row_order

    @classmethod
    def init(cls, n_tax: int, dim: int, n_classes: int, rng: np.random.Generator,
             layers: int = 1, hidden: int | None = None, scale: float = 0.1) -> "GcnParams":
        if layers not in (1, 2):
            raise ValueError("only one- or two-layer graph convolutions are supported")
        sizes = [dim, n_classes] if layers == 1 else [dim, hidden or n_classes, n_classes]
        weights = [rng.normal(0.0, scale, (a, b)) for a, b in zip(sizes, sizes[1:])]
        # one-hot by node index, zero-padded when the taxonomy outgrows the feature dim
        feats = np.zeros((n_tax, dim))
        k = min(n_tax, dim)
        feats[np.arange(k), np.arange(k)] = 1.0
        if n_tax > dim:
            feats[dim:] = rng.normal(0.0, 1.0 / np.sqrt(dim), (n_tax - dim, dim))
        return cls(weights, feats)

    def copy(self) -> "GcnParams":
        return GcnParams([w.copy() for w in self.weights], self.node_features.copy())


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def node_inputs(g: BackboneGraph, params: GcnParams, doc_features: np.ndarray) -> np.ndarray:
    return np.vstack([params.node_features, np.asarray(doc_features, dtype=float)])


def gcn_forward(g: BackboneGraph, X: np.ndarray, params: GcnParams, return_hidden: bool = False):
    """Row-softmax of ``ReLU(A_hat X W0)`` (then ``A_hat H1 W1`` for two layers)."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] != g.n_nodes:
        raise ValueError(f"feature rows {X.shape[0]} != graph nodes {g.n_nodes}")
    if X.shape[1] != params.weights[0].shape[0]:
        raise ValueError(f"feature dim {X.shape[1]} != weight rows {params.weights[0].shape[0]}")
    A = g.propagation
    H1 = np.maximum(A @ X @ params.weights[0], 0.0)
    Z = H1 if len(params.weights) == 1 else A @ H1 @ params.weights[1]
    H = _softmax(Z)
    return (H, H1) if return_hidden else H


def l_reg(P: np.ndarray, H_docs: np.ndarray) -> float:
    P, H_docs = np.asarray(P, dtype=float), np.asarray(H_docs, dtype=float)
    if P.shape != H_docs.shape:
        raise ValueError(f"shape mismatch {P.shape} vs {H_docs.shape}")
    return float(np.sum((P - H_docs) ** 2))


def combined_loss(l0: float, lreg: float, w: float) -> float:
    if w < 0:
        raise ValueError(f"regularizer weight must be non-negative, got {w}")
    return l0 + w * lreg


@dataclass
class RegGradients:
    value: float
    dP: np.ndarray
    dW: list[np.ndarray]
    dX: np.ndarray  # gradient w.r.t. every node input row
    H_docs: np.ndarray


def reg_gradients(g: BackboneGraph, X: np.ndarray, params: GcnParams, P: np.ndarray) -> RegGradients:
    """Exact gradients of ``||P - H_docs||^2`` (ReLU subgradient 0 at 0)."""
    A = g.propagation
    W = params.weights
    AX = A @ X
    Z1 = AX @ W[0]
    H1 = np.maximum(Z1, 0.0)
    if len(W) == 1:
        Z = H1
    else:
        AH1 = A @ H1
        Z = AH1 @ W[1]
    H = _softmax(Z)
    docs = g.doc_rows
    Hd = H[docs]
    P = np.asarray(P, dtype=float)
    if P.shape != Hd.shape:
        raise ValueError(f"shape mismatch {P.shape} vs {Hd.shape}")
    diff = P - Hd
    value = float(np.sum(diff**2))

    dH = np.zeros_like(H)
    dH[docs] = -2.0 * diff
    dZ = H * (dH - np.sum(dH * H, axis=1, keepdims=True))
    if len(W) == 1:
        dH1 = dZ
        dWs = []
    else:
        dW1 = AH1.T @ dZ
        dH1 = A.T @ (dZ @ W[1].T)
        dWs = [dW1]
    dZ1 = dH1 * (Z1 > 0)
    dW0 = AX.T @ dZ1
    dX = A.T @ (dZ1 @ W[0].T)
    return RegGradients(value, 2.0 * diff, [dW0] + dWs, dX, Hd)
