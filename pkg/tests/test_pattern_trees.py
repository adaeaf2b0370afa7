import pytest

from errors import InvalidArgumentError
from graph_core import Graph, RootedGraph, named_pattern
from hom_engine import canonical_form, canonical_form_rooted, count_hom
from pattern_trees import (
    attach,
    enumerate_backbones,
    enumerate_pattern_trees,
    pattern_trees_on_backbone,
    tree_depth,
    tree_hom_profile,
    tree_labels,
    trees_to_json,
)
from settings import Settings, set_settings

K3, P2, C4 = named_pattern("K3"), named_pattern("P2"), named_pattern("C4")


# ==========================================
# 1. 骨幹
# ==========================================
class TestBackbones:
    @pytest.mark.parametrize("depth, budget, expected", [
        (0, 4, 1),
        (1, 4, 4),
        (2, 4, 7),
        (3, 4, 8),
        (2, 1, 1),
    ])
    def test_counts(self, depth, budget, expected):
        assert len(enumerate_backbones(depth, budget)) == expected

    def test_shapes_are_trees_within_limits(self):
        backbones = enumerate_backbones(2, 5)
        labels = set()
        for b in backbones:
            assert b.root == 0
            assert b.graph.is_connected()
            assert b.graph.num_edges == b.n - 1
            assert tree_depth(b) <= 2
            assert b.n <= 5
            labels.add(canonical_form_rooted(b))
        assert len(labels) == len(backbones)

    def test_bad_arguments(self):
        with pytest.raises(InvalidArgumentError):
            enumerate_backbones(-1, 4)
        with pytest.raises(InvalidArgumentError):
            enumerate_backbones(1, 0)


# ==========================================
# 2. 接上圖樣
# ==========================================
class TestPatternTrees:
    def test_no_patterns_gives_backbones(self):
        trees = enumerate_pattern_trees(None, 2, 4)
        assert len(trees) == 7
        assert all(pt.attachments == () for pt in trees)

    def test_vertex_pattern_is_ignored(self):
        a = enumerate_pattern_trees([named_pattern("vertex")], 1, 4)
        assert len(a) == len(enumerate_backbones(1, 4))

    def test_edges_deepen_trees(self):
        # 深度 1 的骨幹接上 P2 = 深度 <= 2 的所有有根樹
        trees = enumerate_pattern_trees([P2], 1, 4)
        assert tree_labels(trees) == {canonical_form_rooted(b) for b in enumerate_backbones(2, 4)}

    def test_triangles(self):
        trees = enumerate_pattern_trees([K3], 1, 5)
        sizes = sorted(pt.tree.n for pt in trees)
        assert sizes[0] == 1
        assert max(sizes) <= 5
        assert any(pt.tree.graph.num_edges == 3 and pt.tree.n == 3 for pt in trees)
        for pt in trees:
            assert pt.depth <= 1
            rebuilt = pt.rebuild([K3])
            assert canonical_form_rooted(rebuilt) == canonical_form_rooted(pt.tree)

    def test_attach_keeps_root(self):
        path = RootedGraph(named_pattern("P3"), 0)
        t = attach(path, 2, RootedGraph(K3, 0))
        assert t.root == 0
        assert t.n == 5
        assert t.graph.degree(2) == 3

    def test_budget_from_settings(self):
        set_settings(Settings(tree_budget=3))
        trees = enumerate_pattern_trees([P2], 1)
        assert max(pt.tree.n for pt in trees) <= 3

    def test_order_is_deterministic(self):
        a = trees_to_json(enumerate_pattern_trees([K3, C4], 1, 6), ["K3", "C4"])
        b = trees_to_json(enumerate_pattern_trees([K3, C4], 1, 6), ["K3", "C4"])
        assert a == b
        assert any(att["pattern"] == "C4" for t in a for att in t["attachments"])

    def test_on_single_backbone(self):
        star = enumerate_backbones(1, 2)[1]
        trees = pattern_trees_on_backbone(star, [K3], 4)
        # 根接 / 葉接 / 都不接
        assert len(trees) == 3

    def test_hom_profile(self):
        trees = enumerate_pattern_trees(None, 1, 3)
        g = named_pattern("paw")
        assert tree_hom_profile(trees, g) == [count_hom(pt.tree.graph, g) for pt in trees]
        assert tree_hom_profile(trees, g)[:2] == [4, 8]
        rooted = tree_hom_profile(trees, g, root=2)
        assert rooted[:2] == [1, 3]
        assert canonical_form(trees[0].tree.graph) == canonical_form(named_pattern("vertex"))

    def test_triangle_trees_on_cherry(self):
        cherry = RootedGraph(Graph.from_edges(3, [(0, 1), (0, 2)]), 0)
        trees = pattern_trees_on_backbone(cherry, [K3], 7)
        expected = [
            Graph.from_edges(3, [(0, 1), (0, 2)]),
            Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4), (3, 4)]),
            Graph.from_edges(5, [(0, 1), (0, 2), (1, 3), (1, 4), (3, 4)]),
            Graph.from_edges(7, [(0, 1), (0, 2), (1, 3), (1, 4), (3, 4), (2, 5), (2, 6), (5, 6)]),
        ]
        labels = tree_labels(trees)
        assert {canonical_form(g, root=0) for g in expected} <= labels
        # 三個接點各 0..2 份且總數 <= 2：10 種接法，兩片葉子對稱後剩 7 種
        assert len(trees) == 10
        assert len(labels) == 7
        assert all(pt.tree.n <= 7 for pt in trees)


# ==========================================
# 3. 截斷的單調性
# ==========================================
class TestMonotonicity:
    @pytest.mark.parametrize("patterns", [None, [K3], [P2], [K3, C4]])
    @pytest.mark.parametrize("depth, budget", [(0, 5), (1, 4), (1, 6), (2, 5)])
    def test_larger_limits_keep_every_tree(self, patterns, depth, budget):
        base = tree_labels(enumerate_pattern_trees(patterns, depth, budget))
        assert base <= tree_labels(enumerate_pattern_trees(patterns, depth + 1, budget))
        assert base <= tree_labels(enumerate_pattern_trees(patterns, depth, budget + 1))
