import json
import math
import random
from itertools import combinations

import numpy as np
import pytest

from bounds import (
    BoundParams,
    ClassPairs,
    bound_from_features,
    expectation_residual,
    graph_bound,
    monte_carlo_expectation_bound,
    node_bound,
    stratified_pair_sampling,
)
from errors import DegenerateClassError, InvalidArgumentError
from graph_core import Graph, GraphDataset, PatternSet, disjoint_union, load_dataset, named_pattern
from settings import Settings, set_settings

C4, C6, C8, K3 = (named_pattern(t) for t in ("C4", "C6", "C8", "K3"))
TWO_K3 = disjoint_union(K3, K3)
TWO_C4 = disjoint_union(C4, C4)


@pytest.fixture
def golden(fixtures_dir):
    return json.loads((fixtures_dir / "golden_bound.json").read_text(encoding="utf-8"))


@pytest.fixture
def regular_pairs():
    """每類都是 2-正則圖：1-WL 分不開，三角形 / C4 計數分得開。"""
    graphs = (C6, C6, TWO_K3, TWO_K3, C8, C8, TWO_C4, TWO_C4)
    return GraphDataset(graphs, 2, labels=(0, 0, 0, 0, 1, 1, 1, 1), name="regular")


def patterns(text):
    return PatternSet(tuple(named_pattern(t) for t in text.split(",")))


# ==========================================
# 1. 分層成對抽樣
# ==========================================
class TestPairSampling:
    def test_sizes_and_disjointness(self):
        labels = [0] * 9 + [1] * 5
        plans = stratified_pair_sampling(labels, 2, seed=4)
        assert [p.pair_size for p in plans] == [2, 1]
        for p in plans:
            used = [i for a, b in p.pairs for i in a + b]
            assert len(used) == len(set(used))
            assert all(labels[i] == p.c for i in used)
            assert len(p.pairs) == 2
        assert plans[1].degenerate
        assert not plans[0].degenerate

    def test_same_seed_same_pairs(self):
        labels = [0, 1] * 10
        assert stratified_pair_sampling(labels, 1, seed=9) == stratified_pair_sampling(labels, 1, seed=9)
        assert stratified_pair_sampling(labels, 1, seed=9) != stratified_pair_sampling(labels, 1, seed=10)

    def test_empty_class(self):
        plans = stratified_pair_sampling([0, 0, 0, 0], 1, num_classes=2)
        assert plans[1].m_c == 0
        assert plans[1].pairs == (((), ()),)

    def test_bad_n(self):
        with pytest.raises(InvalidArgumentError):
            stratified_pair_sampling([0, 0], 0)


# ==========================================
# 2. 固定特徵上的 bound
# ==========================================
class TestBoundFromFeatures:
    def test_golden_graph(self, golden):
        params = BoundParams(kl_method="exact")
        report = bound_from_features(golden["rows"], golden["labels"], 2, params, "graph")
        assert report.m == golden["m"]
        assert [t.beta for t in report.classes] == pytest.approx(golden["beta"])
        assert [t.pair_size for t in report.classes] == golden["pair_size"]
        assert [t.pi for t in report.classes] == pytest.approx(golden["pi"])
        assert [t.conc_term for t in report.classes] == pytest.approx(golden["conc_term"])
        assert all(math.isinf(k) for t in report.classes for k in t.kl)
        assert report.residual == pytest.approx(golden["residual"])
        assert report.bound == pytest.approx(golden["bound_graph"], rel=1e-9)

    def test_golden_node(self, golden):
        params = BoundParams(kl_method="exact")
        report = bound_from_features(golden["rows"], golden["labels"], 2, params, "node")
        assert report.bound == pytest.approx(golden["bound_node"], rel=1e-9)
        assert report.params["lip_over_gamma"] == 6.0

    def test_json_report(self, golden):
        report = bound_from_features(golden["rows"], golden["labels"], 2, BoundParams(kl_method="exact"), "graph")
        data = json.loads(json.dumps(report.to_json()))
        assert data["classes"][0]["kl"] == ["inf"]
        assert data["params"]["delta"] == 0.01
        assert data["params"]["lip_over_gamma"] == 3.0
        assert data["bound"] == pytest.approx(golden["bound_graph"])

    @staticmethod
    def fixed_pairs(case):
        out = []
        for c, (a, b) in enumerate(case["pairs"]):
            members = tuple(i for i, y in enumerate(case["labels"]) if y == c)
            out.append(ClassPairs(c, len(members), len(a), ((tuple(a), tuple(b)),), members))
        return out

    def test_golden_finite_kl(self, golden):
        case = golden["finite_kl"]
        pairs = self.fixed_pairs(case)
        params = BoundParams(kl_method="exact")
        report = bound_from_features(case["rows"], case["labels"], 2, params, "graph", pairs=pairs)
        assert [t.kl[0] for t in report.classes] == pytest.approx(case["kl"], rel=1e-12)
        assert [t.beta for t in report.classes] == pytest.approx(case["beta"])
        assert [t.div_term for t in report.classes] == pytest.approx(
            [b * o for b, o in zip(case["beta"], case["omega"])], rel=1e-12
        )
        assert [t.conc_term for t in report.classes] == pytest.approx(case["conc_term"], rel=1e-12)
        assert report.residual == pytest.approx(case["residual"], rel=1e-12)
        assert report.bound == pytest.approx(case["bound_graph"], rel=1e-12)
        node = bound_from_features(case["rows"], case["labels"], 2, params, "node", pairs=pairs)
        assert node.bound == pytest.approx(case["bound_node"], rel=1e-12)

    def test_fixed_pairs_are_checked(self, golden):
        case = golden["finite_kl"]
        pairs = self.fixed_pairs(case)
        params = BoundParams(kl_method="exact")
        crossing = [pairs[0], ClassPairs(1, 6, 3, (((4, 5, 0), (7, 8, 9)),), pairs[1].indices)]
        with pytest.raises(InvalidArgumentError):
            bound_from_features(case["rows"], case["labels"], 2, params, pairs=crossing)
        with pytest.raises(InvalidArgumentError):
            bound_from_features(case["rows"], case["labels"], 2, params, pairs=pairs[:1])
        with pytest.raises(InvalidArgumentError):
            bound_from_features(case["rows"], case["labels"], 2, BoundParams(n_pairs=2), pairs=pairs)

    def test_sampled_pairs_can_be_passed_back(self, golden):
        params = BoundParams(kl_method="exact", seed=3)
        pairs = stratified_pair_sampling(golden["labels"], 1, seed=3, num_classes=2)
        a = bound_from_features(golden["rows"], golden["labels"], 2, params)
        b = bound_from_features(golden["rows"], golden["labels"], 2, params, pairs=pairs)
        assert a.bound == b.bound

    def test_recompute_matches(self, golden):
        for method in ("exact", "knn"):
            report = bound_from_features(golden["rows"], golden["labels"], 2, BoundParams(kl_method=method), "graph")
            assert report.recompute() == pytest.approx(report.bound, rel=1e-12)

    def test_lip_scaling(self, golden):
        a = bound_from_features(golden["rows"], golden["labels"], 2, BoundParams(lip_over_gamma=3.0), "graph")
        b = bound_from_features(golden["rows"], golden["labels"], 2, BoundParams(lip_over_gamma=6.0), "graph")
        assert b.divergence_component() == pytest.approx(2 * a.divergence_component())
        assert b.residual == a.residual

    def test_per_class_lip(self, golden):
        params = BoundParams(lip_over_gamma=[1.0, 2.0], kl_method="exact")
        report = bound_from_features(golden["rows"], golden["labels"], 2, params, "graph")
        assert [t.lip for t in report.classes] == [1.0, 2.0]
        with pytest.raises(InvalidArgumentError):
            bound_from_features(golden["rows"], golden["labels"], 2, BoundParams(lip_over_gamma=[1.0]), "graph")

    def test_smaller_delta_is_larger(self, golden):
        a = bound_from_features(golden["rows"], golden["labels"], 2, BoundParams(delta=0.05), "graph")
        b = bound_from_features(golden["rows"], golden["labels"], 2, BoundParams(delta=0.01), "graph")
        assert b.bound > a.bound

    def test_settings_supply_defaults(self, golden):
        set_settings(Settings(delta=0.05, lip_over_gamma_graph=1.0))
        report = bound_from_features(golden["rows"], golden["labels"], 2, BoundParams(kl_method="exact"), "graph")
        assert report.params["delta"] == 0.05
        assert report.classes[0].lip == 1.0

    def test_constant_class_has_zero_terms(self):
        rows = [[1, 1]] * 4 + [[0, 0], [5, 0], [0, 5], [5, 5]]
        report = bound_from_features(rows, [0] * 4 + [1] * 4, 2, BoundParams(), "graph")
        first = report.classes[0]
        assert first.beta == 0.0
        assert first.div_term == 0.0
        assert first.conc_term == 0.0
        assert first.kl == (0.0,)

    def test_degenerate_class(self, caplog):
        rows = [[0.0], [1.0], [2.0], [3.0], [10.0], [12.0]]
        labels = [0, 0, 0, 0, 1, 1]
        report = bound_from_features(rows, labels, 2, BoundParams(), "graph")
        term = report.classes[1]
        assert term.degenerate
        assert term.div_term == pytest.approx(2.0)
        assert term.conc_term == pytest.approx(2 * 2.0 * math.sqrt(math.log(400)))
        assert "類別 1" in caplog.text
        with pytest.raises(DegenerateClassError):
            bound_from_features(rows, labels, 2, BoundParams(strict=True), "graph")

    def test_too_few_samples(self):
        with pytest.raises(InvalidArgumentError):
            bound_from_features([[0.0], [1.0]], [0, 1], 2, BoundParams(), "graph")

    def test_bad_inputs(self):
        with pytest.raises(InvalidArgumentError):
            bound_from_features([[0.0]] * 4, [0, 0, 0, 2], 2, BoundParams(), "graph")
        with pytest.raises(InvalidArgumentError):
            bound_from_features([[0.0]] * 4, [0, 0, 0], 2, BoundParams(), "graph")
        with pytest.raises(InvalidArgumentError):
            bound_from_features([[0.0]] * 4, [0] * 4, 1, BoundParams(), "edge")
        with pytest.raises(InvalidArgumentError):
            BoundParams(delta=1.0)
        with pytest.raises(InvalidArgumentError):
            BoundParams(kl_method="mmd")
        with pytest.raises(InvalidArgumentError):
            BoundParams(lip_over_gamma=-1.0)


# ==========================================
# 3. 資料集上的 bound
# ==========================================
class TestDatasetBounds:
    def test_vertex_patterns_give_residual_only(self, regular_pairs):
        params = BoundParams(kl_method="exact")
        report = graph_bound(regular_pairs, None, params)
        assert report.bound == pytest.approx(report.residual)
        assert report.residual == pytest.approx(math.sqrt(math.log(200) / 8))
        same = graph_bound(regular_pairs, patterns("vertex"), params)
        assert same.bound == pytest.approx(report.bound)

    def test_more_patterns_never_lower(self, regular_pairs):
        params = BoundParams(kl_method="exact")
        base = graph_bound(regular_pairs, patterns("vertex"), params)
        tri = graph_bound(regular_pairs, patterns("vertex,K3"), params)
        both = graph_bound(regular_pairs, patterns("vertex,K3,C4"), params)
        assert base.bound < tri.bound < both.bound
        for a, b in zip(tri.classes, both.classes):
            assert b.beta >= a.beta

    def test_deeper_never_lower(self, regular_pairs):
        values = [graph_bound(regular_pairs, patterns("vertex,K3"), BoundParams(kl_method="exact", depth=d)).bound for d in (0, 1, 2, 3)]
        assert values == sorted(values)

    def test_deterministic(self, fixtures_dir):
        ds = load_dataset(fixtures_dir / "tu_small")
        a = graph_bound(ds, patterns("K3"), BoundParams(seed=3)).to_json()
        b = graph_bound(ds, patterns("K3"), BoundParams(seed=3)).to_json()
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_node_bound(self, fixtures_dir):
        ds = load_dataset(fixtures_dir / "tu_small", task="node")
        report = node_bound(ds, None, BoundParams())
        assert report.task == "node"
        assert report.m == 17 // 2 + 10 // 2
        assert math.isfinite(report.bound)
        assert report.bound > report.residual
        ego = node_bound(ds, None, BoundParams(ego=True))
        assert math.isfinite(ego.bound)

    def test_missing_labels(self, fixtures_dir):
        ds = load_dataset(fixtures_dir / "tu_small")
        with pytest.raises(InvalidArgumentError):
            node_bound(ds, None, BoundParams())

    def test_expectation_residual(self, golden):
        assert expectation_residual(10, 0.01, "graph") == pytest.approx(golden["expectation_residual_graph"])
        assert expectation_residual(10, 0.01, "node") == pytest.approx(golden["expectation_residual_node"])
        with pytest.raises(InvalidArgumentError):
            expectation_residual(0, 0.01, "graph")

    def test_monte_carlo(self, fixtures_dir):
        ds = load_dataset(fixtures_dir / "tu_small")
        report = monte_carlo_expectation_bound(ds, patterns("K3"), BoundParams(), 3)
        exp = report.expectation
        assert exp["repeats"] == 3
        assert len(exp["values"]) == 3
        assert exp["mean"] == pytest.approx(np.mean(exp["values"]))
        assert exp["stderr"] >= 0.0
        assert exp["residual"] == pytest.approx(math.sqrt(math.log(100) / 16))
        assert exp["bound"] == pytest.approx(exp["mean"] + exp["residual"])
        assert report.to_summary_row("SMALL", "K3")["expectation_mean"] == exp["mean"]

    def test_monte_carlo_single_repeat(self, fixtures_dir):
        ds = load_dataset(fixtures_dir / "tu_small")
        report = monte_carlo_expectation_bound(ds, None, BoundParams(), 1)
        assert report.expectation["stderr"] == 0.0
        with pytest.raises(InvalidArgumentError):
            monte_carlo_expectation_bound(ds, None, BoundParams(), 0)

    def test_monte_carlo_stderr_shrinks(self):
        rng = random.Random(7)
        graphs = []
        for _ in range(40):
            n = rng.randint(4, 9)
            graphs.append(Graph.from_edges(n, [e for e in combinations(range(n), 2) if rng.random() < 0.4]))
        ds = GraphDataset(tuple(graphs), 2, labels=tuple(i % 2 for i in range(40)), name="random")
        params = BoundParams(n_pairs=2, seed=1)
        few = monte_carlo_expectation_bound(ds, patterns("K3"), params, 10).expectation
        many = monte_carlo_expectation_bound(ds, patterns("K3"), params, 100).expectation
        # seed 依序遞增，前 10 次抽樣相同
        assert many["values"][:10] == pytest.approx(few["values"])
        assert few["stderr"] > 0.0
        assert many["stderr"] < few["stderr"]
