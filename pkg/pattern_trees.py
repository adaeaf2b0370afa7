"""
F-pattern tree 列舉：
1. 骨幹 (backbone)：深度 <= L、頂點數 <= 預算的有根樹 (同構只留一個)。
2. 在骨幹的每個頂點接上任意份數的有根圖樣，總頂點數受預算限制。
3. 以有根標準型去重，輸出順序固定。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import networkx as nx

from errors import InvalidArgumentError
from graph_core import Graph, RootedGraph, as_rooted, join_rooted
from hom_engine import canonical_form, count_hom, count_hom_rooted
from settings import get_settings

logger = logging.getLogger(__name__)


# ==========================================
# 1. 骨幹：以排序後的巢狀 tuple 表示有根樹
# ==========================================
def _size(shape):
    return 1 + sum(_size(c) for c in shape)


@lru_cache(maxsize=None)
def _shapes(max_depth, max_nodes):
    """所有深度 <= max_depth、頂點數 <= max_nodes 的有根樹形狀。"""
    if max_nodes < 1:
        return ()
    if max_depth == 0 or max_nodes == 1:
        return ((),)
    children = _shapes(max_depth - 1, max_nodes - 1)
    out = []

    # 子樹以非遞減索引挑選，等同挑多重集合
    def pick(start, budget, chosen):
        out.append(tuple(chosen))
        for i in range(start, len(children)):
            s = _size(children[i])
            if s <= budget:
                chosen.append(children[i])
                pick(i, budget - s, chosen)
                chosen.pop()

    pick(0, max_nodes - 1, [])
    return tuple(sorted({tuple(sorted(s)) for s in out}, key=lambda s: (_size(s), repr(s))))


def _shape_to_rooted(shape):
    """BFS 編號，根為 0。"""
    edges = []
    queue = [(shape, 0)]
    nxt = 1
    while queue:
        node, idx = queue.pop(0)
        for child in node:
            edges.append((idx, nxt))
            queue.append((child, nxt))
            nxt += 1
    return RootedGraph(Graph.from_edges(nxt, edges), 0)


def enumerate_backbones(max_depth, max_nodes):
    if max_depth < 0:
        raise InvalidArgumentError(f"❌ 深度必須 >= 0: {max_depth}")
    if max_nodes < 1:
        raise InvalidArgumentError(f"❌ 頂點預算必須 >= 1: {max_nodes}")
    return [_shape_to_rooted(s) for s in _shapes(max_depth, max_nodes)]


def tree_depth(rg):
    """有根樹的深度 (以邊數計)。"""
    return max(nx.single_source_shortest_path_length(rg.graph._nx, rg.root).values())


# ==========================================
# 2. 接上圖樣
# ==========================================
@dataclass(frozen=True)
class PatternTree:
    tree: RootedGraph
    backbone: RootedGraph
    attachments: tuple

    @property
    def depth(self):
        return tree_depth(self.backbone)

    def rebuild(self, patterns):
        """依記錄的接合順序重建，用來核對 attachments。"""
        rooted = [as_rooted(p) for p in patterns]
        tree = self.backbone
        for w, i, copies in self.attachments:
            for _ in range(copies):
                tree = attach(tree, w, rooted[i])
        return tree

    def to_json(self, names=None):
        return {
            "n": self.tree.n,
            "root": self.tree.root,
            "edges": [list(e) for e in self.tree.graph.edge_list()],
            "backbone": {
                "n": self.backbone.n,
                "root": self.backbone.root,
                "edges": [list(e) for e in self.backbone.graph.edge_list()],
            },
            "attachments": [
                {"vertex": w, "pattern": names[i] if names else i, "copies": c}
                for w, i, c in self.attachments
            ],
        }


def attach(tree, w, pattern):
    """把 pattern 的根併到 tree 的頂點 w；tree 的根不變。"""
    joined = join_rooted(RootedGraph(tree.graph, w), pattern)
    return RootedGraph(joined.graph, tree.root)


def _count_vectors(extras, budget):
    """每種圖樣各接幾份 (總新增頂點 <= budget)。"""
    out = []

    def rec(i, left, chosen):
        if i == len(extras):
            out.append(tuple(chosen))
            return
        c = 0
        while c * extras[i] <= left:
            chosen.append(c)
            rec(i + 1, left - c * extras[i], chosen)
            chosen.pop()
            c += 1

    rec(0, budget, [])
    return out


def _trees_on_backbone(backbone, rooted, indices, max_nodes):
    extras = [rooted[i].n - 1 for i in indices]
    results = []

    def rec(w, tree, left, record):
        if w == backbone.n:
            results.append(PatternTree(tree, backbone, tuple(record)))
            return
        for counts in _count_vectors(extras, left):
            t = tree
            added = []
            used = 0
            for i, c in zip(indices, counts):
                for _ in range(c):
                    t = attach(t, w, rooted[i])
                if c:
                    added.append((w, i, c))
                    used += c * (rooted[i].n - 1)
            rec(w + 1, t, left - used, record + added)

    rec(0, backbone, max_nodes - backbone.n, [])
    return results


def enumerate_pattern_trees(patterns, max_depth, max_nodes=None):
    """
    T_L(F) 的有限截斷：
    1. patterns 為空 (None) 時等同 {單點}，只輸出骨幹本身。
    2. 單點圖樣接上去不改變圖，直接略過。
    3. 同構 (保根) 的樹只留第一個出現的版本。
    """
    max_nodes = max_nodes or get_settings().tree_budget
    rooted = [as_rooted(p) for p in (patterns or ())]
    indices = [i for i, p in enumerate(rooted) if p.n > 1]
    backbones = enumerate_backbones(max_depth, max_nodes)

    with ThreadPoolExecutor(max_workers=get_settings().threads) as pool:
        batches = list(pool.map(lambda b: _trees_on_backbone(b, rooted, indices, max_nodes), backbones))

    seen = {}
    for batch in batches:
        for pt in batch:
            key = canonical_form(pt.tree.graph, root=pt.tree.root)
            seen.setdefault(key, pt)
    out = sorted(seen.values(), key=lambda pt: (pt.tree.n, pt.tree.graph.num_edges, canonical_form(pt.tree.graph, root=pt.tree.root)))
    logger.info("🌳 depth<=%d, 頂點<=%d: %d 個骨幹, %d 棵 pattern tree", max_depth, max_nodes, len(backbones), len(out))
    return out


def tree_labels(trees):
    return {canonical_form(pt.tree.graph, root=pt.tree.root) for pt in trees}


def tree_hom_profile(trees, g, root=None):
    """每棵樹打到 g 的 hom 數；給定 root 時用有根版本。"""
    if root is None:
        return [count_hom(pt.tree.graph, g) for pt in trees]
    host = RootedGraph(g, root)
    return [count_hom_rooted(pt.tree, host) for pt in trees]


def trees_to_json(trees, names=None):
    return [pt.to_json(names) for pt in trees]


def pattern_trees_on_backbone(backbone, patterns, max_nodes=None):
    """只在指定骨幹上列舉 (不同接法若同構仍會各留一份)。"""
    max_nodes = max_nodes or get_settings().tree_budget
    rooted = [as_rooted(p) for p in (patterns or ())]
    indices = [i for i, p in enumerate(rooted) if p.n > 1]
    return _trees_on_backbone(backbone, rooted, indices, max_nodes)
