"""
F-WL 顏色細化：
1. 第 0 輪：每個節點的顏色 = 各圖樣 (有根) 打到該節點的 hom 數向量。
2. 之後每輪：(舊顏色, 鄰居舊顏色的多重集合) 重新上色。
3. 顏色以簽章的內容雜湊表示，同一個簽章在任何一次呼叫、任何一張圖都是同一個顏色。
4. 圖層級特徵 = 各輪顏色直方圖串接；節點層級特徵 = 各輪鄰居顏色直方圖串接。
5. 輸出矩陣時每輪的欄位依顏色鍵排序，因此結果與圖的順序無關。
"""
import hashlib
import json
import logging
import sys
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from tqdm import tqdm

from errors import InvalidArgumentError
from graph_core import PatternSet, RootedGraph, ego_graph, neighbor_signatures, single_vertex
from hom_engine import count_hom_rooted, count_sub_rooted
from settings import get_settings

logger = logging.getLogger(__name__)

COUNTINGS = {"hom": count_hom_rooted, "sub": count_sub_rooted}
KEY_BYTES = 12


# ==========================================
# 1. 顏色鍵與顏色字典
# ==========================================
def color_key(signature):
    """簽章 -> 固定長度的十六進位鍵 (blake2b)。簽章只含整數、字串與 tuple，repr 是單射。"""
    return hashlib.blake2b(repr(signature).encode("utf-8"), digest_size=KEY_BYTES).hexdigest()


class ColorDictionary:
    """每一輪各自一組顏色鍵 -> 欄位編號；可跨執行緒插入，欄位依鍵排序。"""

    def __init__(self):
        self._keys = {}
        self._lock = threading.Lock()

    def intern(self, iteration, keys):
        with self._lock:
            self._keys.setdefault(iteration, set()).update(keys)

    def update(self, history):
        for t, colors in enumerate(history):
            self.intern(t, colors)

    @property
    def dims(self):
        return tuple(len(self._keys[t]) for t in sorted(self._keys))

    def __len__(self):
        return sum(self.dims)

    def __contains__(self, item):
        t, key = item
        return key in self._keys.get(t, ())

    def columns(self):
        """[{鍵: 欄位}, ...]，一輪一個。"""
        return [{k: i for i, k in enumerate(sorted(self._keys[t]))} for t in sorted(self._keys)]


def _vertex_patterns():
    return PatternSet((single_vertex(),), "vertex")


def _check(counting, depth=0):
    if counting not in COUNTINGS:
        raise InvalidArgumentError(f"❌ counting 只能是 hom 或 sub: {counting!r}")
    if depth < 0:
        raise InvalidArgumentError(f"❌ 細化輪數必須 >= 0: {depth}")


# ==========================================
# 2. 初始顏色與細化
# ==========================================
def initial_signatures(g, patterns, rooted=True, counting="hom"):
    """
    節點 v 的簽章：
    rooted=True  -> (hom(F_1^r, G^v), ..., hom(F_k^r, G^v))
    rooted=False -> 每個圖樣改為對所有可能的根加總
    """
    _check(counting)
    fn = COUNTINGS[counting]
    rooted_patterns = patterns.rooted()
    out = []
    for v in range(g.n):
        host = RootedGraph(g, v)
        if rooted:
            out.append(tuple(fn(p, host) for p in rooted_patterns))
        else:
            out.append(tuple(sum(fn(RootedGraph(p.graph, r), host) for r in range(p.n)) for p in rooted_patterns))
    return out


def initial_colors(g, patterns=None, rooted=True, counting="hom"):
    return [color_key(s) for s in initial_signatures(g, patterns or _vertex_patterns(), rooted, counting)]


def refine(g, colors):
    if len(colors) != g.n:
        raise InvalidArgumentError(f"❌ 顏色數量 {len(colors)} 與頂點數 {g.n} 不符")
    return [color_key(s) for s in neighbor_signatures(g.adjacency, colors)]


def _graph_history(g, patterns, depth, rooted, counting):
    colors = initial_colors(g, patterns, rooted, counting)
    history = [colors]
    for _ in range(depth):
        colors = refine(g, colors)
        history.append(colors)
    return history


def color_history(graphs, patterns=None, depth=0, rooted=True, counting="hom", progress=False, dictionary=None):
    """
    回傳每張圖的 [第 0 輪顏色, ..., 第 depth 輪顏色]。
    給了 dictionary 時，各執行緒把自己那張圖的顏色鍵登記進去。
    """
    _check(counting, depth)
    patterns = patterns or _vertex_patterns()
    graphs = list(graphs)

    def run(g):
        history = _graph_history(g, patterns, depth, rooted, counting)
        if dictionary is not None:
            dictionary.update(history)
        return history

    with ThreadPoolExecutor(max_workers=get_settings().threads) as pool:
        jobs = pool.map(run, graphs)
        histories = list(tqdm(jobs, total=len(graphs), desc="F-WL 細化", disable=not progress, file=sys.stderr))
    if dictionary is not None:
        logger.debug("F-WL 各輪顏色數: %s", dictionary.dims)
    return histories


# ==========================================
# 3. 直方圖與節點表示
# ==========================================
@dataclass(frozen=True)
class ColorHistogram:
    """blocks[t] = {顏色鍵: 個數}；鍵與呼叫無關，不同次計算的直方圖可以直接比較。"""
    blocks: tuple

    @classmethod
    def from_colors(cls, per_iteration):
        return cls(tuple(dict(sorted(Counter(colors).items())) for colors in per_iteration))

    def block_sums(self):
        return [sum(b.values()) for b in self.blocks]

    def to_vector(self, columns):
        """依 ColorDictionary.columns() 攤平成稠密向量；字典裡沒有的顏色視為錯誤。"""
        if len(columns) != len(self.blocks):
            raise InvalidArgumentError(f"❌ 直方圖有 {len(self.blocks)} 輪，字典有 {len(columns)} 輪")
        parts = []
        for block, index in zip(self.blocks, columns):
            dense = np.zeros(len(index), dtype=np.int64)
            for key, k in block.items():
                if key not in index:
                    raise InvalidArgumentError(f"❌ 顏色 {key} 不在字典中")
                dense[index[key]] = k
            parts.append(dense)
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def histogram_matrix(hists, dictionary=None):
    """多個直方圖嵌到同一組欄位；沒給字典就用所有直方圖顏色的聯集。"""
    if dictionary is None:
        dictionary = ColorDictionary()
        for h in hists:
            for t, block in enumerate(h.blocks):
                dictionary.intern(t, block)
    columns = dictionary.columns()
    if not hists:
        return np.zeros((0, len(dictionary)), dtype=np.int64), dictionary.dims
    return np.vstack([h.to_vector(columns) for h in hists]), dictionary.dims


def fwl_histograms(g, patterns=None, depth=0, rooted=True, counting="hom"):
    _check(counting, depth)
    return ColorHistogram.from_colors(_graph_history(g, patterns or _vertex_patterns(), depth, rooted, counting))


def fwl_histograms_dataset(graphs, patterns=None, depth=0, rooted=True, counting="hom", progress=False):
    histories = color_history(graphs, patterns, depth, rooted, counting, progress)
    return [ColorHistogram.from_colors(h) for h in histories]


def _neighbor_histograms(g, history):
    return [
        ColorHistogram.from_colors([[colors[u] for u in g.adjacency[v]] for colors in history])
        for v in range(g.n)
    ]


def node_representations(g, patterns=None, depth=0, rooted=True, counting="hom"):
    """每個節點一個直方圖 = 各輪鄰居顏色的個數 (不含自身顏色)。"""
    _check(counting, depth)
    return _neighbor_histograms(g, _graph_history(g, patterns or _vertex_patterns(), depth, rooted, counting))


# ==========================================
# 4. 資料集特徵化
# ==========================================
@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray
    labels: tuple
    dims: tuple
    level: str

    @property
    def columns(self):
        return [f"t{t}_c{c}" for t, dim in enumerate(self.dims) for c in range(dim)]

    def to_frame(self):
        df = pd.DataFrame(self.rows, columns=self.columns)
        if self.labels is not None:
            df.insert(0, "label", list(self.labels))
        return df

    def to_csv(self, path=None):
        text = self.to_frame().to_csv(index=False)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_sparse_json(self):
        out = {"dim": int(self.rows.shape[1]), "rows": []}
        for row in self.rows:
            idx = np.flatnonzero(row)
            out["rows"].append({"idx": idx.tolist(), "val": row[idx].tolist()})
        if self.labels is not None:
            out["labels"] = list(self.labels)
        return out

    def save_sparse_json(self, path):
        Path(path).write_text(json.dumps(self.to_sparse_json(), sort_keys=True), encoding="utf-8")


def dataset_featurize(ds, patterns=None, depth=0, level="graph", ego=False, rooted=True, counting="hom", progress=False):
    """
    一列一個樣本：
    1. level=graph：每張圖的顏色直方圖。
    2. level=node：整張圖一起細化後讀出每個節點；ego=True 時改為每個節點各自的 depth 跳 ego 圖。
    欄位是這次資料集出現過的所有顏色 (依鍵排序)。
    """
    if level not in ("graph", "node"):
        raise InvalidArgumentError(f"❌ level 只能是 graph 或 node: {level!r}")
    labels = None
    if (level == "graph" and ds.labels is not None) or (level == "node" and ds.node_labels is not None):
        labels = tuple(ds.sample_labels(level))

    dictionary = ColorDictionary()
    if level == "graph":
        histories = color_history(ds.graphs, patterns, depth, rooted, counting, progress, dictionary)
        hists = [ColorHistogram.from_colors(h) for h in histories]
    elif not ego:
        histories = color_history(ds.graphs, patterns, depth, rooted, counting, progress, dictionary)
        hists = [h for g, hist in zip(ds.graphs, histories) for h in _neighbor_histograms(g, hist)]
    else:
        egos = [ego_graph(ds.graphs[gi], v, depth) for gi, v in ds.node_index()]
        histories = color_history([e.graph for e in egos], patterns, depth, rooted, counting, progress, dictionary)
        hists = [_neighbor_histograms(e.graph, hist)[e.root] for e, hist in zip(egos, histories)]

    rows, dims = histogram_matrix(hists, dictionary)
    logger.info("🧮 特徵矩陣 %s: %d x %d", level, rows.shape[0], rows.shape[1])
    return FeatureMatrix(rows, labels, dims, level)


def count_distinct_histograms(features):
    rows = features.rows if isinstance(features, FeatureMatrix) else np.asarray(features)
    if len(rows) == 0:
        return 0
    return len(np.unique(rows, axis=0))
