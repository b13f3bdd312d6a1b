"""Hierarchical label taxonomy: data model, parsing and structural queries.

Levels are numbered root-down: the root sits at level 0 and every leaf at
level ``depth``.  Leaves are the classifier's classes, indexed by their
depth-first left-to-right order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

MAX_DEPTH = 4


class TaxonomyError(ValueError):
    """Invalid taxonomy text or structure.  ``lineno`` is 1-based when known."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TaxNode:
    id: int
    name: str
    level: int
    parent: int | None
    children: tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True, eq=False)
class Taxonomy:
    nodes: tuple[TaxNode, ...]
    leaf_order: tuple[int, ...]
    depth: int
    _by_name: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not self._by_name:
            self._by_name.update({n.name: n.id for n in self.nodes})

    @property
    def root(self) -> int:
        return 0

    @property
    def n_classes(self) -> int:
        return len(self.leaf_order)

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, ref: int | str) -> TaxNode:
        if isinstance(ref, str):
            if ref not in self._by_name:
                raise KeyError(f"unknown taxonomy node {ref!r}")
            ref = self._by_name[ref]
        if not 0 <= ref < len(self.nodes):
            raise KeyError(f"unknown taxonomy node id {ref}")
        return self.nodes[ref]

    def node_id(self, name: str) -> int:
        return self.node(name).id

    def has_name(self, name: str) -> bool:
        return name in self._by_name

    @cached_property
    def class_of(self) -> dict[int, int]:
        """Leaf node id -> class index."""
        return {nid: k for k, nid in enumerate(self.leaf_order)}

    @cached_property
    def _leaf_sets(self) -> tuple[tuple[int, ...], ...]:
        out: list[tuple[int, ...]] = [()] * len(self.nodes)
        for n in reversed(self.nodes):  # preorder reversed: children first
            if n.is_leaf:
                out[n.id] = (self.class_of[n.id],)
            else:
                out[n.id] = tuple(k for c in n.children for k in out[c])
        return tuple(out)

    def leaves_under(self, node: int | str) -> tuple[int, ...]:
        """Class indices of the leaf descendants of ``node``, in class order."""
        return self._leaf_sets[self.node(node).id]

    def leaf_node(self, cls: int) -> int:
        if not 0 <= cls < self.n_classes:
            raise IndexError(f"class index {cls} out of range [0, {self.n_classes})")
        return self.leaf_order[cls]

    def path(self, node: int | str) -> list[int]:
        """Node ids from level 1 down to ``node`` (root excluded)."""
        n = self.node(node)
        out = []
        while n.parent is not None:
            out.append(n.id)
            n = self.nodes[n.parent]
        return out[::-1]

    def ancestor_chain(self, cls: int) -> list[int]:
        """Ancestors of class ``cls`` at levels 1..depth-1, top-down."""
        return self.path(self.leaf_node(cls))[:-1]

    def is_ancestor_or_self(self, anc: int, node: int) -> bool:
        return anc == self.root or anc in self.path(node)

    def level_nodes(self, j: int) -> list[int]:
        if not 0 <= j <= self.depth:
            raise IndexError(f"level {j} out of range [0, {self.depth}]")
        return [n.id for n in self.nodes if n.level == j]

    def internal_nodes(self) -> list[int]:
        """Root plus every non-leaf node, in node-id order."""
        return [n.id for n in self.nodes if not n.is_leaf]

    def serialize(self) -> str:
        """Canonical indented text form."""
        return "".join("  " * n.level + n.name + "\n" for n in self.nodes)

    def to_dict(self, node: int = 0) -> dict:
        n = self.nodes[node]
        return {"name": n.name, "children": [self.to_dict(c) for c in n.children]}

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def __repr__(self) -> str:
        return f"Taxonomy({self.n_classes} leaves, depth {self.depth}, {len(self.nodes)} nodes)"


def from_tree(tree: tuple[str, list]) -> Taxonomy:
    """Build from a nested ``(name, [children...])`` tuple."""
    nodes: list[TaxNode] = []

    def visit(item, level, parent):
        name, kids = item
        nid = len(nodes)
        nodes.append(None)  # placeholder, children filled after recursion
        child_ids = tuple(visit(k, level + 1, nid) for k in kids)
        nodes[nid] = TaxNode(nid, name, level, parent, child_ids)
        return nid

    visit(tree, 0, None)
    return _validated(nodes)


def _validated(nodes: list[TaxNode], lines: dict[str, int] | None = None) -> Taxonomy:
    lines = lines or {}
    seen: set[str] = set()
    for n in nodes:
        if not n.name:
            raise TaxonomyError("empty node name", lines.get(n.name))
        if n.name in seen:
            raise TaxonomyError(f"duplicate node name {n.name!r}", lines.get(n.name))
        seen.add(n.name)
    leaves = [n for n in nodes if n.is_leaf and n.parent is not None]
    if not leaves:
        raise TaxonomyError("taxonomy has no leaves below the root")
    depths = {n.level for n in leaves}
    if len(depths) != 1:
        bad = next(n for n in leaves if n.level != leaves[0].level)
        raise TaxonomyError(
            f"non-uniform leaf depth: leaves at levels {sorted(depths)}", lines.get(bad.name)
        )
    depth = depths.pop()
    if depth > MAX_DEPTH:
        raise TaxonomyError(f"depth {depth} exceeds the supported maximum {MAX_DEPTH}")
    return Taxonomy(tuple(nodes), tuple(n.id for n in leaves), depth)


def _parse_indented(text: str) -> Taxonomy:
    entries: list[tuple[int, str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" in line[: len(line) - len(line.lstrip())]:
            raise TaxonomyError("tab in indentation; use two spaces per level", lineno)
        indent = len(line) - len(line.lstrip(" "))
        if indent % 2:
            raise TaxonomyError(f"odd indentation ({indent} spaces)", lineno)
        entries.append((indent // 2, line.strip(), lineno))
    if not entries:
        raise TaxonomyError("empty taxonomy")

    nodes: list[dict] = []
    stack: list[int] = []
    lines: dict[str, int] = {}
    for level, name, lineno in entries:
        if level == 0 and nodes:
            raise TaxonomyError(f"multiple roots: {nodes[0]['name']!r} and {name!r}", lineno)
        if level > len(stack):
            raise TaxonomyError(f"indentation jumps more than one level at {name!r}", lineno)
        if name in lines:
            raise TaxonomyError(f"duplicate node name {name!r}", lineno)
        lines[name] = lineno
        del stack[level:]
        parent = stack[-1] if stack else None
        nid = len(nodes)
        nodes.append({"name": name, "level": level, "parent": parent, "children": []})
        if parent is not None:
            nodes[parent]["children"].append(nid)
        stack.append(nid)
    built = [
        TaxNode(i, d["name"], d["level"], d["parent"], tuple(d["children"]))
        for i, d in enumerate(nodes)
    ]
    return _validated(built, lines)


def _tree_from_json(obj, path="$"):
    if not isinstance(obj, dict) or not isinstance(obj.get("name"), str):
        raise TaxonomyError(f"{path}: expected an object with a string 'name'")
    kids = obj.get("children", [])
    if not isinstance(kids, list):
        raise TaxonomyError(f"{path}.children: expected a list")
    return obj["name"], [_tree_from_json(k, f"{path}.children[{i}]") for i, k in enumerate(kids)]


def parse_taxonomy(text: str) -> Taxonomy:
    """Parse the indented text format, or the JSON ``{"name", "children"}`` form."""
    if text.lstrip().startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise TaxonomyError(f"invalid JSON: {e.msg}", e.lineno) from None
        return from_tree(_tree_from_json(obj))
    return _parse_indented(text)


def load_taxonomy(path) -> Taxonomy:
    with open(path, encoding="utf-8") as fh:
        return parse_taxonomy(fh.read())


def six_leaf_taxonomy() -> Taxonomy:
    """The six-leaf, two-level example tree used throughout the docs and tests."""
    return from_tree(
        ("root", [
            ("a1", [("X1", []), ("X2", [])]),
            ("a2", [("X3", []), ("X4", []), ("X5", [])]),
            ("a3", [("X6", [])]),
        ])
    )


def balanced_taxonomy(fanouts: list[list[int]] | list[int], prefix: str = "n") -> Taxonomy:
    """Tree with explicit per-node fanouts level by level.

    ``fanouts[j]`` lists the child count of each level-j node in order (or a
    single int applied to all of them).
    """
    fanouts = list(fanouts)
    level_counts = [1]
    for j, f in enumerate(fanouts):
        f = [f] * level_counts[-1] if isinstance(f, int) else list(f)
        if len(f) != level_counts[-1]:
            raise ValueError(f"level {j} needs {level_counts[-1]} fanouts, got {len(f)}")
        fanouts[j] = f
        level_counts.append(sum(f))

    counters = [0] * (len(fanouts) + 1)

    def make(level):
        idx = counters[level]
        counters[level] += 1
        name = "root" if level == 0 else f"{prefix}{level}_{idx}"
        if level == len(fanouts):
            return name, []
        return name, [make(level + 1) for _ in range(fanouts[level][idx])]

    return from_tree(make(0))
