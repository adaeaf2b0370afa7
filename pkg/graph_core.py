"""
圖的基本結構與資料集讀取：
1. Graph / RootedGraph：不可變的簡單無向圖 (頂點固定為 0..n-1)。
2. 具名圖樣 (P_n, C_n, K_n, paw) 與組合運算 (不交聯集、根合併)。
3. L 跳 ego 子圖。
4. 邊列表、TU 資料集、JSON 交換格式的讀寫。
"""
import json
import logging
import random
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np
import pandas as pd

from errors import (
    BoundaryEdgeError,
    DuplicateEdgeError,
    InvalidArgumentError,
    InvariantViolationError,
    MissingFileError,
    NonContiguousIndicatorError,
    ParseError,
    SelfLoopError,
)

logger = logging.getLogger(__name__)


# ==========================================
# 1. 核心型別
# ==========================================
@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset = frozenset()
    name: str = field(default=None, compare=False)

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 0:
            raise InvalidArgumentError(f"❌ 頂點數必須為非負整數: {self.n!r}")
        for u, v in self.edges:
            if u == v:
                raise SelfLoopError(f"❌ 不允許自環: ({u}, {v})")
            if not (0 <= u < v < self.n):
                raise InvalidArgumentError(f"❌ 邊 ({u}, {v}) 未正規化或超出範圍 (n={self.n})")

    @classmethod
    def from_edges(cls, n, edges, name=None):
        """逐條檢查後建立；重複邊與自環直接報錯。"""
        normalized = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise SelfLoopError(f"❌ 不允許自環: ({u}, {v})")
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidArgumentError(f"❌ 邊 ({u}, {v}) 超出頂點範圍 0..{n - 1}")
            key = (u, v) if u < v else (v, u)
            if key in normalized:
                raise DuplicateEdgeError(f"❌ 重複的邊: ({u}, {v})")
            normalized.add(key)
        return cls(int(n), frozenset(normalized), name)

    @cached_property
    def adjacency(self):
        adj = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return tuple(frozenset(a) for a in adj)

    @cached_property
    def _nx(self):
        return self.to_networkx()

    @property
    def num_edges(self):
        return len(self.edges)

    def neighbors(self, v):
        return self.adjacency[v]

    def degree(self, v):
        return len(self.adjacency[v])

    def degrees(self):
        return [len(a) for a in self.adjacency]

    def edge_list(self):
        return sorted(self.edges)

    def has_edge(self, u, v):
        return v in self.adjacency[u]

    def components(self):
        return nx.number_connected_components(self._nx) if self.n else 0

    def is_connected(self):
        return self.n > 0 and nx.is_connected(self._nx)

    def to_networkx(self):
        G = nx.Graph()
        G.add_nodes_from(range(self.n))
        G.add_edges_from(self.edges)
        return G

    def adjacency_matrix(self, dtype=object):
        A = np.zeros((self.n, self.n), dtype=dtype)
        for u, v in self.edges:
            A[u, v] = 1
            A[v, u] = 1
        return A

    def relabel(self, perm):
        """perm[v] 為頂點 v 的新編號。"""
        if sorted(perm) != list(range(self.n)):
            raise InvalidArgumentError("❌ perm 必須是 0..n-1 的排列")
        return Graph.from_edges(self.n, [(perm[u], perm[v]) for u, v in self.edges], self.name)

    def label(self):
        return self.name or f"G(n={self.n},m={self.num_edges})"


@dataclass(frozen=True)
class RootedGraph:
    graph: Graph
    root: int = 0

    def __post_init__(self):
        if not (0 <= self.root < self.graph.n):
            raise InvalidArgumentError(f"❌ 根 {self.root} 不在 0..{self.graph.n - 1}")

    @property
    def n(self):
        return self.graph.n

    @property
    def name(self):
        return self.graph.name

    def label(self):
        return f"{self.graph.label()}^{self.root}"


def as_rooted(pattern, root=0):
    """對稱圖樣的根不影響結果，統一取頂點 0。"""
    if isinstance(pattern, RootedGraph):
        return pattern
    return RootedGraph(pattern, root)


def single_vertex():
    return Graph(1, frozenset(), "vertex")


# ==========================================
# 2. 具名圖樣與組合運算
# ==========================================
def make_named_pattern(kind, n):
    if n < 1:
        raise InvalidArgumentError(f"❌ 頂點數必須 >= 1: {n}")
    if kind == "path":
        return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], f"P{n}" if n > 1 else "vertex")
    if kind == "cycle":
        if n < 3:
            raise InvalidArgumentError(f"❌ 環至少需要 3 個頂點: {n}")
        return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], f"C{n}")
    if kind == "clique":
        return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], f"K{n}" if n > 1 else "vertex")
    raise InvalidArgumentError(f"❌ 未知的圖樣種類: {kind!r}")


_TOKEN = re.compile(r"^([PCK])(\d+)$", re.IGNORECASE)
_KINDS = {"P": "path", "C": "cycle", "K": "clique"}


def named_pattern(token):
    """解析 CLI 圖樣代號：P3 / C4 / K3 / vertex / paw。"""
    token = str(token).strip()
    low = token.lower()
    if low in ("vertex", "v1", "p1", "k1"):
        return single_vertex()
    if low == "paw":
        # 三角形 0-1-2 加上掛在 2 的懸掛點 3
        return Graph.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)], "paw")
    m = _TOKEN.match(token)
    if not m:
        raise InvalidArgumentError(f"❌ 無法辨識的圖樣代號: {token!r}")
    return make_named_pattern(_KINDS[m.group(1).upper()], int(m.group(2)))


def disjoint_union(a, b):
    shifted = [(u + a.n, v + a.n) for u, v in b.edges]
    name = f"{a.name}{b.name}" if a.name and b.name else None
    return Graph(a.n + b.n, frozenset(a.edges) | frozenset(shifted), name)


def join_rooted(a, b):
    """
    合併兩個有根圖 (b 的根併入 a 的根)：
    1. a 的頂點編號不變。
    2. b 的非根頂點依序接在 a 後面。
    3. 新根 = a.root。
    """
    mapping = {}
    nxt = a.n
    for v in range(b.n):
        if v == b.root:
            mapping[v] = a.root
        else:
            mapping[v] = nxt
            nxt += 1
    edges = set(a.graph.edges)
    for u, v in b.graph.edges:
        x, y = mapping[u], mapping[v]
        edges.add((x, y) if x < y else (y, x))
    return RootedGraph(Graph(a.n + b.n - 1, frozenset(edges)), a.root)


def ego_graph(g, v, radius):
    """半徑 radius 內所有頂點的誘導子圖，根 (v) 編號為 0，其餘依原編號排序。"""
    if not (0 <= v < g.n):
        raise InvalidArgumentError(f"❌ 頂點 {v} 不在圖中")
    if radius < 0:
        raise InvalidArgumentError(f"❌ 半徑必須 >= 0: {radius}")
    reached = nx.single_source_shortest_path_length(g._nx, v, cutoff=radius)
    order = [v] + sorted(u for u in reached if u != v)
    index = {u: i for i, u in enumerate(order)}
    edges = [(index[x], index[y]) for x, y in g.edges if x in index and y in index]
    return RootedGraph(Graph.from_edges(len(order), edges), 0)


def neighbor_signatures(adjacency, colors):
    """一輪顏色細化的簽章：(自己的舊顏色, 鄰居舊顏色排序後的多重集合)。"""
    return [(colors[v], tuple(sorted(colors[u] for u in adjacency[v]))) for v in range(len(colors))]


# ==========================================
# 3. 圖樣集合
# ==========================================
@dataclass(frozen=True)
class PatternSet:
    patterns: tuple
    name: str = None

    def __post_init__(self):
        object.__setattr__(self, "patterns", tuple(self.patterns))
        if not self.patterns:
            raise InvalidArgumentError("❌ 圖樣集合不可為空")
        from hom_engine import canonical_form

        seen = {}
        for i, p in enumerate(self.patterns):
            if isinstance(p, RootedGraph):
                key = canonical_form(p.graph, root=p.root)
            elif isinstance(p, Graph):
                key = canonical_form(p)
            else:
                raise InvalidArgumentError(f"❌ 圖樣必須是 Graph 或 RootedGraph: {type(p).__name__}")
            if key in seen:
                raise InvariantViolationError(f"❌ 圖樣 #{seen[key]} 與 #{i} 同構，集合中不可重複")
            seen[key] = i

    def __len__(self):
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def __getitem__(self, i):
        return self.patterns[i]

    @property
    def names(self):
        return [p.label() if p.name is None else p.name for p in self.patterns]

    def rooted(self):
        return tuple(as_rooted(p) for p in self.patterns)

    def extended(self, *extra):
        return PatternSet(self.patterns + tuple(extra), self.name)


def parse_pattern_list(text, name=None):
    """逗號分隔的圖樣代號或邊列表檔路徑。"""
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    return PatternSet(tuple(load_pattern(t) for t in items), name or ",".join(items))


def load_pattern(token):
    """有副檔名的一律當檔案讀 (找不到就報缺檔)，其餘當圖樣代號。"""
    path = Path(token)
    if path.suffix:
        return read_edge_list(path)
    return named_pattern(token)


# ==========================================
# 4. 邊列表格式
# ==========================================
def parse_edge_list(text, name=None):
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line))
    if not rows:
        raise ParseError("❌ 邊列表是空的 (第一行應為頂點數)")

    lineno, first = rows[0]
    try:
        n = int(first)
    except ValueError:
        raise ParseError(f"❌ 第 {lineno} 行應為頂點數: {first!r}")
    if n < 0:
        raise ParseError(f"❌ 頂點數不可為負: {n}")

    edges = []
    for lineno, line in rows[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"❌ 第 {lineno} 行格式應為 'u v': {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"❌ 第 {lineno} 行含非整數: {line!r}")
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(f"❌ 第 {lineno} 行頂點超出 0..{n - 1}: {line!r}")
        edges.append((u, v))
    return Graph.from_edges(n, edges, name)


def read_edge_list(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFileError(f"❌ 找不到邊列表檔: {path}")
    return parse_edge_list(text, name=path.stem)


def serialize_edge_list(g):
    lines = [str(g.n)] + [f"{u} {v}" for u, v in g.edge_list()]
    return "\n".join(lines) + "\n"


# ==========================================
# 5. 資料集
# ==========================================
@dataclass(frozen=True)
class GraphDataset:
    """
    graph 任務：labels[i] 為第 i 張圖的類別。
    node 任務：node_labels[i] 為第 i 張圖每個節點的類別。
    train / test 的索引層級由 split_level 決定 (圖編號或攤平後的節點編號)；
    train 為 None 代表全部樣本都是訓練集。
    """
    graphs: tuple
    num_classes: int
    labels: tuple = None
    node_labels: tuple = None
    train: tuple = None
    test: tuple = ()
    split_level: str = "graph"
    name: str = None

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if self.num_classes < 1:
            raise InvariantViolationError("❌ 類別數 K 必須 >= 1")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(int(y) for y in self.labels))
            if len(self.labels) != len(self.graphs):
                raise InvariantViolationError("❌ 圖標籤數量與圖數量不符")
            self._check_labels(self.labels)
        if self.node_labels is not None:
            object.__setattr__(self, "node_labels", tuple(tuple(int(y) for y in ys) for ys in self.node_labels))
            if len(self.node_labels) != len(self.graphs):
                raise InvariantViolationError("❌ 節點標籤的圖數量不符")
            for g, ys in zip(self.graphs, self.node_labels):
                if len(ys) != g.n:
                    raise InvariantViolationError("❌ 節點標籤數量與頂點數不符")
                self._check_labels(ys)
        if self.split_level not in ("graph", "node"):
            raise InvalidArgumentError(f"❌ split_level 只能是 graph 或 node: {self.split_level!r}")

        size = self.num_samples(self.split_level)
        test = tuple(int(i) for i in self.test)
        object.__setattr__(self, "test", test)
        if self.train is not None:
            train = tuple(int(i) for i in self.train)
            object.__setattr__(self, "train", train)
            if set(train) & set(test):
                raise InvariantViolationError("❌ 訓練集與測試集索引重疊")
        for i in (self.train or ()) + test:
            if not (0 <= i < size):
                raise InvariantViolationError(f"❌ 切分索引 {i} 超出範圍 0..{size - 1}")

    def _check_labels(self, ys):
        for y in ys:
            if not (0 <= y < self.num_classes):
                raise InvariantViolationError(f"❌ 標籤 {y} 不在 0..{self.num_classes - 1}")

    @property
    def items(self):
        if self.labels is not None:
            return list(zip(self.graphs, self.labels))
        return list(zip(self.graphs, self.node_labels or ()))

    def num_samples(self, level):
        if level == "graph":
            return len(self.graphs)
        return sum(g.n for g in self.graphs)

    def node_index(self):
        """攤平後的節點編號 -> (圖編號, 頂點)。"""
        return [(gi, v) for gi, g in enumerate(self.graphs) for v in range(g.n)]

    def train_indices(self, level):
        if self.train is None or self.split_level != level:
            if self.train is not None:
                logger.warning("⚠️ 資料集切分層級為 %s，%s 任務改用全部樣本", self.split_level, level)
            return list(range(self.num_samples(level)))
        return list(self.train)

    def sample_labels(self, level):
        if level == "graph":
            if self.labels is None:
                raise InvariantViolationError("❌ 資料集沒有圖標籤")
            return list(self.labels)
        if self.node_labels is None:
            raise InvariantViolationError("❌ 資料集沒有節點標籤")
        return [y for ys in self.node_labels for y in ys]


def random_split(ds, train_fraction, seed=0, level="graph"):
    """依固定種子打亂後切分 (圖任務常用 0.9，節點任務 0.6)。"""
    if not 0 < train_fraction <= 1:
        raise InvalidArgumentError(f"❌ train_fraction 必須在 (0, 1]: {train_fraction}")
    size = ds.num_samples(level)
    order = list(range(size))
    random.Random(seed).shuffle(order)
    cut = int(round(train_fraction * size))
    return GraphDataset(
        ds.graphs, ds.num_classes, ds.labels, ds.node_labels,
        tuple(sorted(order[:cut])), tuple(sorted(order[cut:])), level, ds.name,
    )


def _remap_first_appearance(values):
    mapping = {}
    for v in values:
        if v not in mapping:
            mapping[v] = len(mapping)
    return [mapping[v] for v in values], mapping


def _read_int_table(path, columns):
    """TU 檔案一律以字串讀入再轉數字，壞值統一回報 ParseError。"""
    try:
        df = pd.read_csv(path, header=None, dtype=str, skipinitialspace=True)
    except FileNotFoundError:
        raise MissingFileError(f"❌ 找不到檔案: {path}")
    except pd.errors.EmptyDataError:
        return np.zeros((0, columns), dtype=np.int64)
    if df.shape[1] != columns:
        raise ParseError(f"❌ {path.name} 應有 {columns} 欄，實際為 {df.shape[1]}")
    numeric = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    if numeric.isna().any().any():
        bad = int(numeric.isna().any(axis=1).to_numpy().nonzero()[0][0]) + 1
        raise ParseError(f"❌ {path.name} 第 {bad} 行不是整數")
    return numeric.to_numpy(dtype=np.int64)


def parse_tu_dataset(directory, name, task="graph"):
    """
    讀取 TU 格式資料集：
    1. DS_graph_indicator.txt 必須連續 (1, 1, 2, 2, 3 ...)。
    2. 1 起算的全域節點編號轉為每張圖 0 起算。
    3. (i, j) 與 (j, i) 合併為同一條無向邊；跨圖的邊直接報錯。
    4. 標籤依首次出現順序重新編為 0..K-1。
    """
    directory = Path(directory)
    if task not in ("graph", "node"):
        raise InvalidArgumentError(f"❌ task 只能是 graph 或 node: {task!r}")

    paths = {key: directory / f"{name}_{key}.txt" for key in ("A", "graph_indicator", "graph_labels", "node_labels")}
    required = ["A", "graph_indicator", "graph_labels" if task == "graph" else "node_labels"]
    for key in required:
        if not paths[key].exists():
            raise MissingFileError(f"❌ 缺少檔案: {paths[key]}")

    # --- 1. 節點所屬的圖 ---
    indicator = _read_int_table(paths["graph_indicator"], 1)[:, 0]
    if len(indicator) == 0:
        raise ParseError("❌ graph_indicator 是空的")
    if indicator[0] != 1 or np.any(np.diff(indicator) < 0) or np.any(np.diff(indicator) > 1):
        raise NonContiguousIndicatorError("❌ graph_indicator 必須由 1 開始連續遞增")
    num_graphs = int(indicator[-1])
    sizes = np.bincount(indicator - 1, minlength=num_graphs)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    total = len(indicator)

    # --- 2. 邊 ---
    edge_sets = [set() for _ in range(num_graphs)]
    loops = 0
    for lineno, (i, j) in enumerate(_read_int_table(paths["A"], 2), start=1):
        if not (1 <= i <= total and 1 <= j <= total):
            raise ParseError(f"❌ {name}_A.txt 第 {lineno} 行節點編號超出 1..{total}")
        gi, gj = indicator[i - 1] - 1, indicator[j - 1] - 1
        if gi != gj:
            raise BoundaryEdgeError(f"❌ {name}_A.txt 第 {lineno} 行的邊 ({i}, {j}) 跨越兩張圖")
        u, v = int(i - 1 - offsets[gi]), int(j - 1 - offsets[gi])
        if u == v:
            loops += 1
            continue
        edge_sets[gi].add((min(u, v), max(u, v)))
    if loops:
        logger.warning("⚠️ %s 含 %d 條自環，已略過", name, loops)

    graphs = tuple(Graph(int(sizes[g]), frozenset(edge_sets[g]), f"{name}#{g}") for g in range(num_graphs))

    # --- 3. 標籤 ---
    labels = None
    node_labels = None
    num_classes = 1
    if paths["graph_labels"].exists():
        raw = _read_int_table(paths["graph_labels"], 1)[:, 0].tolist()
        if len(raw) != num_graphs:
            raise ParseError(f"❌ graph_labels 有 {len(raw)} 行，但共有 {num_graphs} 張圖")
        labels, mapping = _remap_first_appearance(raw)
        if task == "graph":
            num_classes = len(mapping)
    if paths["node_labels"].exists():
        raw = _read_int_table(paths["node_labels"], 1)[:, 0].tolist()
        if len(raw) != total:
            raise ParseError(f"❌ node_labels 有 {len(raw)} 行，但共有 {total} 個節點")
        flat, mapping = _remap_first_appearance(raw)
        node_labels = tuple(tuple(flat[offsets[g]:offsets[g] + sizes[g]]) for g in range(num_graphs))
        if task == "node":
            num_classes = len(mapping)

    if task == "graph":
        node_labels = None
    else:
        labels = None
    logger.info("📚 %s: %d 張圖, %d 個節點, K=%d", name, num_graphs, total, num_classes)
    return GraphDataset(graphs, num_classes, labels, node_labels, name=name)


def dataset_to_dict(ds):
    graphs = []
    for i, g in enumerate(ds.graphs):
        item = {"n": g.n, "edges": [list(e) for e in g.edge_list()]}
        if ds.labels is not None:
            item["label"] = ds.labels[i]
        if ds.node_labels is not None:
            item["node_labels"] = list(ds.node_labels[i])
        graphs.append(item)
    return {"graphs": graphs, "num_classes": ds.num_classes}


def dataset_from_dict(data, name=None):
    try:
        items = data["graphs"]
        num_classes = int(data["num_classes"])
        graphs = tuple(Graph.from_edges(int(it["n"]), it.get("edges", []), f"{name or 'json'}#{i}") for i, it in enumerate(items))
        has_graph = all("label" in it for it in items)
        has_node = all("node_labels" in it for it in items)
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"❌ 資料集 JSON 欄位錯誤: {e}")
    labels = [it["label"] for it in items] if has_graph and items else None
    node_labels = [it["node_labels"] for it in items] if has_node and items else None
    return GraphDataset(graphs, num_classes, labels, node_labels, name=name)


def load_dataset_json(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MissingFileError(f"❌ 找不到資料集檔案: {path}")
    except json.JSONDecodeError as e:
        raise ParseError(f"❌ 無法解析 JSON ({path}): {e}")
    return dataset_from_dict(data, name=path.stem)


def save_dataset_json(ds, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(dataset_to_dict(ds), f, ensure_ascii=False, indent=2)


def load_dataset(source, name=None, task="graph"):
    """目錄 -> TU 格式；檔案 -> JSON 交換格式。"""
    source = Path(source)
    if source.is_dir():
        if name is None:
            indicator = sorted(source.glob("*_graph_indicator.txt"))
            if not indicator:
                raise MissingFileError(f"❌ {source} 內找不到 *_graph_indicator.txt")
            name = indicator[0].name[: -len("_graph_indicator.txt")]
        return parse_tu_dataset(source, name, task=task)
    return load_dataset_json(source)
