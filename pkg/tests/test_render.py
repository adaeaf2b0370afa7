from graph_core import RootedGraph, named_pattern
from hom_engine import spasm
from pattern_trees import enumerate_pattern_trees
from render import ROOT_BG, graph_to_dot, spasm_to_dot, tree_to_dot, trees_to_dot


class TestDot:
    def test_graph(self):
        src = graph_to_dot(named_pattern("K3"))
        assert src.startswith("graph K3")
        assert src.count(" -- ") == 3
        assert ROOT_BG not in src

    def test_rooted_graph(self):
        src = graph_to_dot(RootedGraph(named_pattern("P3"), 1))
        assert src.count(ROOT_BG) == 1
        assert src.count(" -- ") == 2

    def test_spasm_clusters(self):
        src = spasm_to_dot(spasm(named_pattern("C4")))
        assert src.count("subgraph cluster_") == 3
        assert "coeff=-2" in src

    def test_trees(self):
        trees = enumerate_pattern_trees([named_pattern("K3")], 1, 5)
        src = trees_to_dot(trees)
        assert src.count("subgraph cluster_") == len(trees)
        one = tree_to_dot(trees[-1])
        assert one.count(ROOT_BG) == 1
