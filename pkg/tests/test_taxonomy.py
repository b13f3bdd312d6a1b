import json

import pytest
from hypothesis import given

from taxloss.taxonomy import TaxonomyError, balanced_taxonomy, parse_taxonomy

from .conftest import SIX_LEAF_TEXT, taxonomies


def names(tax, ids):
    return [tax.nodes[i].name for i in ids]


class TestParse:
    def test_six_leaf(self):
        tax = parse_taxonomy(SIX_LEAF_TEXT)
        assert tax.n_classes == 6
        assert tax.depth == 2
        assert names(tax, tax.leaf_order) == ["X1", "X2", "X3", "X4", "X5", "X6"]

    def test_single_leaf(self):
        tax = parse_taxonomy("root\n  only\n")
        assert tax.n_classes == 1 and tax.depth == 1

    def test_json_matches_text(self, six_leaf):
        tax = parse_taxonomy(json.dumps(six_leaf.to_dict()))
        assert tax.serialize() == six_leaf.serialize()

    @pytest.mark.parametrize(
        "text, fragment, line",
        [
            ("root\n  a\n    x\n  y\n", "non-uniform leaf depth", 4),
            ("root\n  a\n  a\n", "duplicate", 3),
            ("root\nother\n", "multiple roots", 2),
            ("root\n      deep\n", "jumps", 2),
            ("root\n   odd\n", "odd indentation", 2),
            ("root\n", "no leaves", None),
            ("", "empty", None),
        ],
    )
    def test_errors(self, text, fragment, line):
        with pytest.raises(TaxonomyError, match=fragment) as e:
            parse_taxonomy(text)
        assert e.value.lineno == line

    def test_depth_limit(self):
        with pytest.raises(TaxonomyError, match="exceeds"):
            balanced_taxonomy([1, 1, 1, 1, 1])

    def test_bad_json(self):
        with pytest.raises(TaxonomyError, match="name"):
            parse_taxonomy('{"children": []}')

    def test_comments_and_blank_lines(self):
        tax = parse_taxonomy("# header\nroot\n\n  a\n  # note\n  b\n")
        assert tax.n_classes == 2


class TestQueries:
    def test_leaves_under(self, six_leaf):
        assert six_leaf.leaves_under("a2") == (2, 3, 4)
        assert six_leaf.leaves_under("X6") == (5,)
        assert six_leaf.leaves_under(six_leaf.root) == (0, 1, 2, 3, 4, 5)

    def test_ancestor_chain(self, six_leaf):
        assert names(six_leaf, six_leaf.ancestor_chain(2)) == ["a2"]
        flat = parse_taxonomy("root\n  a\n  b\n")
        assert flat.ancestor_chain(1) == []

    def test_rcv1_shaped_chain(self):
        # 4 / 33 / 53 nodes per level
        tax = balanced_taxonomy([4, [9, 8, 8, 8], [2] * 20 + [1] * 13])
        assert [len(tax.level_nodes(j)) for j in (1, 2, 3)] == [4, 33, 53]
        assert all(len(tax.ancestor_chain(k)) == 2 for k in range(tax.n_classes))

    def test_level_nodes(self, six_leaf):
        assert names(six_leaf, six_leaf.level_nodes(2)) == ["X1", "X2", "X3", "X4", "X5", "X6"]
        assert six_leaf.level_nodes(0) == [six_leaf.root]
        assert names(six_leaf, six_leaf.level_nodes(1)) == ["a1", "a2", "a3"]
        with pytest.raises(IndexError):
            six_leaf.level_nodes(3)

    def test_unknown_references(self, six_leaf):
        with pytest.raises(KeyError):
            six_leaf.leaves_under("nope")
        with pytest.raises(IndexError):
            six_leaf.ancestor_chain(6)


@given(taxonomies())
def test_leaf_sets_partition(tax):
    for n in tax.nodes:
        if n.children:
            joined = [k for c in n.children for k in tax.leaves_under(c)]
            assert tuple(joined) == tax.leaves_under(n.id)
    for j in range(tax.depth + 1):
        covered = sorted(k for v in tax.level_nodes(j) for k in tax.leaves_under(v))
        assert covered == list(range(tax.n_classes))


@given(taxonomies())
def test_ancestor_chain_unique(tax):
    for k in range(tax.n_classes):
        chain = tax.ancestor_chain(k)
        assert len(chain) == tax.depth - 1
        for j, v in enumerate(chain, 1):
            holders = [u for u in tax.level_nodes(j) if k in tax.leaves_under(u)]
            assert holders == [v]


@given(taxonomies())
def test_serialize_roundtrip(tax):
    again = parse_taxonomy(tax.serialize())
    assert again.serialize() == tax.serialize()
    assert again.leaf_order == tax.leaf_order
    assert parse_taxonomy(json.dumps(tax.to_dict())).serialize() == tax.serialize()
