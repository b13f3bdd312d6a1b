"""Datasets of feature vectors labelled against a taxonomy.

A record knows either its leaf class or only some ancestor of it (the
deepest node whose label survived masking).  The on-disk format is a
``dim=<d>`` header followed by ``id<TAB>node-name<TAB>f1,...,fd`` lines.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .taxonomy import Taxonomy


class DatasetError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class SupervisionRecord:
    id: str
    features: np.ndarray
    leaf_label: int | None
    known_node: int

    @property
    def labeled(self) -> bool:
        return self.leaf_label is not None

    def __eq__(self, other):
        if not isinstance(other, SupervisionRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.leaf_label == other.leaf_label
            and self.known_node == other.known_node
            and np.array_equal(self.features, other.features)
        )

    __hash__ = None


def make_record(tax: Taxonomy, rid: str, features, node: int | str) -> SupervisionRecord:
    n = tax.node(node)
    label = tax.class_of[n.id] if n.is_leaf else None
    return SupervisionRecord(rid, np.asarray(features, dtype=float), label, n.id)


def feature_matrix(records: Sequence[SupervisionRecord]) -> np.ndarray:
    return np.stack([r.features for r in records])


def load_dataset(text: str, tax: Taxonomy) -> list[SupervisionRecord]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("dim="):
        raise DatasetError("missing 'dim=<d>' header", 1)
    try:
        dim = int(lines[0][4:])
    except ValueError:
        raise DatasetError(f"bad header {lines[0]!r}", 1) from None
    if dim < 1:
        raise DatasetError("feature dimension must be positive", 1)

    records = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DatasetError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
        rid, name, feats = parts
        if not tax.has_name(name):
            raise DatasetError(f"unknown label {name!r}", lineno)
        try:
            x = np.array([float(v) for v in feats.split(",")])
        except ValueError:
            raise DatasetError("non-numeric feature value", lineno) from None
        if x.shape[0] != dim:
            raise DatasetError(f"expected {dim} features, got {x.shape[0]}", lineno)
        records.append(make_record(tax, rid, x, name))
    return records


def serialize_dataset(records: Sequence[SupervisionRecord], tax: Taxonomy) -> str:
    if not records:
        raise DatasetError("cannot serialize an empty dataset")
    dim = records[0].features.shape[0]
    out = [f"dim={dim}"]
    for r in records:
        if r.features.shape[0] != dim:
            raise DatasetError(f"record {r.id!r} has {r.features.shape[0]} features, expected {dim}")
        feats = ",".join(repr(float(v)) for v in r.features)
        out.append(f"{r.id}\t{tax.nodes[r.known_node].name}\t{feats}")
    return "\n".join(out) + "\n"


def load_dataset_file(path, tax: Taxonomy) -> list[SupervisionRecord]:
    with open(path, encoding="utf-8") as fh:
        return load_dataset(fh.read(), tax)


# --- masking -----------------------------------------------------------------


@dataclass(frozen=True)
class MaskingPolicy:
    """Per-level masking rates for levels 1..L, as fractions of all records.

    Rates must be non-decreasing with depth: hiding a node hides the levels
    below it too.
    """

    rates: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if any(not 0.0 <= r <= 1.0 for r in self.rates):
            raise ValueError(f"masking rates must lie in [0, 1]: {self.rates}")
        if any(a > b for a, b in zip(self.rates, self.rates[1:])):
            raise ValueError(f"masking rates must be non-decreasing with level: {self.rates}")


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def masked_counts(rates: Sequence[float], n: int) -> list[int]:
    """Number of records masked at each level (level j hides j and below)."""
    return [round_half_up(r * n) for r in rates]


def apply_masking(
    records: Sequence[SupervisionRecord], tax: Taxonomy, policy: MaskingPolicy
) -> list[SupervisionRecord]:
    if len(policy.rates) != tax.depth:
        raise ValueError(f"need {tax.depth} masking rates, got {len(policy.rates)}")
    if any(r.leaf_label is None for r in records):
        raise ValueError("apply_masking needs fully labelled records")

    n = len(records)
    counts = masked_counts(policy.rates, n)
    order = np.random.default_rng(policy.seed).permutation(n)
    # rank[i] < counts[j-1] <=> record i is masked at level j; prefixes nest
    rank = np.empty(n, dtype=int)
    rank[order] = np.arange(n)

    out = []
    for i, r in enumerate(records):
        keep = sum(1 for c in counts if rank[i] >= c)  # levels surviving, top-down
        chain = tax.path(tax.leaf_order[r.leaf_label])
        node = chain[keep - 1] if keep else tax.root
        if node == r.known_node:
            out.append(r)
        else:
            label = r.leaf_label if tax.nodes[node].is_leaf else None
            out.append(replace(r, leaf_label=label, known_node=node))
    return out


# --- synthetic data ----------------------------------------------------------


@dataclass
class SynthSpec:
    """Hierarchical Gaussian mixture with power-law leaf counts.

    ``counts`` (one per leaf, in class order) overrides the power law
    ``max(min_count, round(max_count * rank**-alpha))`` whose ranks are a
    seeded shuffle of the leaves.
    """

    dim: int = 16
    counts: list[int] | None = None
    max_count: int = 200
    alpha: float = 1.0
    min_count: int = 3
    spread: float = 1.0
    scales: list[float] = field(default_factory=lambda: [10.0, 2.0, 0.5])
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown synth spec keys: {sorted(extra)}")
        return cls(**d)

    def leaf_counts(self, tax: Taxonomy) -> list[int]:
        if self.counts is not None:
            if len(self.counts) != tax.n_classes:
                raise ValueError(f"need {tax.n_classes} counts, got {len(self.counts)}")
            return [int(c) for c in self.counts]
        rng = np.random.default_rng([self.seed, 1])
        ranks = rng.permutation(tax.n_classes) + 1
        return [max(self.min_count, round_half_up(self.max_count * float(k) ** -self.alpha)) for k in ranks]


def class_means(tax: Taxonomy, spec: SynthSpec) -> np.ndarray:
    """Leaf means: each node offsets its parent's mean at its level's scale."""
    if len(spec.scales) != tax.depth:
        raise ValueError(f"need {tax.depth} level scales, got {len(spec.scales)}")
    rng = np.random.default_rng([spec.seed, 0])
    means = np.zeros((len(tax), spec.dim))
    for n in tax.nodes[1:]:
        means[n.id] = means[n.parent] + rng.normal(0.0, spec.scales[n.level - 1], spec.dim)
    return means[list(tax.leaf_order)]


def synth_generate(
    tax: Taxonomy,
    spec: SynthSpec,
    counts: Sequence[int] | None = None,
    sample_seed: int | None = None,
    id_prefix: str = "d",
) -> list[SupervisionRecord]:
    """Draw fully labelled records.  Class means depend only on ``spec.seed``;
    ``sample_seed`` picks the draw so train and test share one mixture."""
    if spec.dim < 2:
        raise ValueError("synthetic feature dimension must be at least 2")
    counts = list(counts) if counts is not None else spec.leaf_counts(tax)
    if len(counts) != tax.n_classes or any(c <= 0 for c in counts):
        raise ValueError("need one positive count per leaf")
    means = class_means(tax, spec)
    rng = np.random.default_rng([spec.seed, 2, spec.seed if sample_seed is None else sample_seed])
    out = []
    for k, c in enumerate(counts):
        x = means[k] + rng.normal(0.0, spec.spread, (c, spec.dim))
        node = tax.leaf_order[k]
        out.extend(SupervisionRecord(f"{id_prefix}{len(out) + i}", x[i], k, node) for i in range(c))
    return out
