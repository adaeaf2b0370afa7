"""
精確同態計數引擎：
1. hom / inj / surj / aut / sub 計數 (回溯搜尋 + 鄰接一致性剪枝，整數精確累加)。
2. 小圖標準型 (顏色細化 + 個別化搜尋)。
3. spasm 列舉與 Möbius 係數，用 hom 反推 sub。
4. 鄰接矩陣冪次的對照 oracle。
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import networkx as nx
import numpy as np

from errors import CapExceededError, InternalCountingError, InvalidArgumentError, PreconditionError, ResourceLimitError
from graph_core import Graph, RootedGraph, make_named_pattern, neighbor_signatures
from settings import get_settings

logger = logging.getLogger(__name__)

HOM, INJ, SURJ, ESURJ = "hom", "inj", "surj", "esurj"


# ==========================================
# 1. 回溯搜尋
# ==========================================
def _search_order(f, first=None):
    """已放置鄰居多者優先，其次度數大者；不連通時自然換到下一個分量。"""
    placed = set()
    order = []
    remaining = set(range(f.n))
    while remaining:
        if first is not None and not order:
            v = first
        else:
            v = max(remaining, key=lambda u: (len(f.adjacency[u] & placed), len(f.adjacency[u]), -u))
        order.append(v)
        placed.add(v)
        remaining.discard(v)
    return order


class _Backtracker:
    def __init__(self, f, g, mode, root=None, host_root=None, work_limit=None):
        self.g = g
        self.mode = mode
        self.order = _search_order(f, root)
        pos = {v: i for i, v in enumerate(self.order)}
        self.back = [[pos[u] for u in f.adjacency[v] if pos[u] < i] for i, v in enumerate(self.order)]
        self.pattern_edges = [(pos[u], pos[v]) for u, v in f.edges]
        self.fixed = host_root
        self.images = [None] * f.n
        self.limit = work_limit or get_settings().work_limit
        self.nodes = 0
        self.used = set()
        self.cover = [0] * g.n
        self.uncovered = set(range(g.n))

    def run(self):
        if not self.order:
            return 1
        if self.mode in (SURJ, ESURJ) and len(self.order) < self.g.n:
            return 0
        return self._extend(0)

    def _candidates(self, i):
        if i == 0 and self.fixed is not None:
            cands = [self.fixed]
        elif self.back[i]:
            sets = sorted((self.g.adjacency[self.images[j]] for j in self.back[i]), key=len)
            base, rest = sets[0], sets[1:]
            cands = [c for c in base if all(c in s for s in rest)]
        else:
            cands = range(self.g.n)
        if self.mode == INJ:
            cands = [c for c in cands if c not in self.used]
        return cands

    def _assign(self, i, c):
        self.images[i] = c
        if self.mode == INJ:
            self.used.add(c)
        elif self.mode in (SURJ, ESURJ):
            self.cover[c] += 1
            self.uncovered.discard(c)

    def _unassign(self, i, c):
        self.images[i] = None
        if self.mode == INJ:
            self.used.discard(c)
        elif self.mode in (SURJ, ESURJ):
            self.cover[c] -= 1
            if self.cover[c] == 0:
                self.uncovered.add(c)

    def _covers_edges(self, i, c):
        """最後一個位置放 c 之後，點與邊是否都被蓋到。"""
        self._assign(i, c)
        image = {(min(self.images[a], self.images[b]), max(self.images[a], self.images[b])) for a, b in self.pattern_edges}
        ok = not self.uncovered and len(image) == self.g.num_edges
        self._unassign(i, c)
        return ok

    def _extend(self, i):
        self.nodes += 1
        if self.nodes > self.limit:
            raise ResourceLimitError(f"❌ 搜尋節點超過上限 {self.limit}")
        left = len(self.order) - i
        if self.mode in (SURJ, ESURJ) and len(self.uncovered) > left:
            return 0
        cands = self._candidates(i)

        # 最後一個頂點直接數候選數
        if left == 1:
            if self.mode == ESURJ:
                return sum(self._covers_edges(i, c) for c in cands)
            if self.mode != SURJ:
                return len(cands)
            if not self.uncovered:
                return len(cands)
            (missing,) = self.uncovered
            return 1 if missing in cands else 0

        total = 0
        for c in cands:
            self._assign(i, c)
            total += self._extend(i + 1)
            self._unassign(i, c)
        return total


def _split_components(f, keep=None):
    """回傳各連通分量的誘導子圖；keep 所在的分量放第一個並附上新根編號。"""
    parts = []
    for comp in sorted(nx.connected_components(f._nx), key=min):
        comp = sorted(comp)
        index = {v: i for i, v in enumerate(comp)}
        sub = Graph(len(comp), frozenset((index[u], index[v]) for u, v in f.edges if u in index))
        parts.append((sub, index.get(keep)))
    parts.sort(key=lambda p: p[1] is None)
    return parts


def _check_pattern(f):
    if f.n < 1:
        raise InvalidArgumentError("❌ 圖樣至少需要 1 個頂點")


def count_hom(f, g, work_limit=None):
    _check_pattern(f)
    if f.n > 1 and f.components() > 1:
        # 不交聯集的 hom 為各分量乘積
        total = 1
        for part, _ in _split_components(f):
            total *= _Backtracker(part, g, HOM, work_limit=work_limit).run()
            if total == 0:
                break
        return total
    return _Backtracker(f, g, HOM, work_limit=work_limit).run()


def count_hom_rooted(f, g, work_limit=None):
    """φ(f.root) = g.root 的同態數。"""
    _check_pattern(f.graph)
    parts = _split_components(f.graph, keep=f.root)
    total = 1
    for part, root in parts:
        if root is not None:
            total *= _Backtracker(part, g.graph, HOM, root=root, host_root=g.root, work_limit=work_limit).run()
        else:
            total *= _Backtracker(part, g.graph, HOM, work_limit=work_limit).run()
        if total == 0:
            break
    return total


def count_inj(f, g, work_limit=None):
    _check_pattern(f)
    if f.n > g.n:
        return 0
    return _Backtracker(f, g, INJ, work_limit=work_limit).run()


def count_inj_rooted(f, g, work_limit=None):
    _check_pattern(f.graph)
    if f.n > g.n:
        return 0
    return _Backtracker(f.graph, g.graph, INJ, root=f.root, host_root=g.root, work_limit=work_limit).run()


def count_surj(f, g, work_limit=None):
    _check_pattern(f)
    if f.n < g.n:
        return 0
    return _Backtracker(f, g, SURJ, work_limit=work_limit).run()


def count_edge_surj(f, g, work_limit=None):
    """點與邊都滿射的同態數 (F 的邊蓋滿 G 的每一條邊)。"""
    _check_pattern(f)
    if f.n < g.n or f.num_edges < g.num_edges:
        return 0
    return _Backtracker(f, g, ESURJ, work_limit=work_limit).run()


@lru_cache(maxsize=4096)
def count_aut(f):
    return count_inj(f, f)


@lru_cache(maxsize=4096)
def count_aut_rooted(f):
    return count_inj_rooted(f, f)


def _exact_div(num, den, what):
    q, r = divmod(num, den)
    if r:
        raise InternalCountingError(f"❌ {what}: {num} 無法被 {den} 整除")
    return q


def count_sub(f, g, work_limit=None):
    return _exact_div(count_inj(f, g, work_limit), count_aut(f), "inj/aut")


def count_sub_rooted(f, g, work_limit=None):
    return _exact_div(count_inj_rooted(f, g, work_limit), count_aut_rooted(f), "rooted inj/aut")


def rooted_counts(pattern, g, counting=HOM):
    """每個頂點 v 的 hom(F^r, G^v) (或 sub)。"""
    fn = count_hom_rooted if counting == HOM else count_sub_rooted
    return [fn(pattern, RootedGraph(g, v)) for v in range(g.n)]


# ==========================================
# 2. 標準型 (canonical form)
# ==========================================
def _refine_partition(adj, colors):
    """穩定化的顏色細化；新顏色保留舊顏色的先後次序。"""
    while True:
        sigs = neighbor_signatures(adj, colors)
        ranks = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [ranks[s] for s in sigs]
        if len(ranks) == len(set(colors)):
            return new
        colors = new


def _twins(adj, u, v):
    return adj[u] - {v} == adj[v] - {u}


def _canonical_code(g, colors, leaf_cap):
    adj = g.adjacency
    n = g.n
    edges = g.edge_list()
    best = None
    leaves = 0

    def visit(colors):
        nonlocal best, leaves
        colors = _refine_partition(adj, colors)
        if len(set(colors)) == n:
            leaves += 1
            if leaves > leaf_cap:
                raise CapExceededError(f"❌ 標準型搜尋葉節點超過上限 {leaf_cap}")
            code = tuple(sorted((min(colors[u], colors[v]), max(colors[u], colors[v])) for u, v in edges))
            if best is None or code > best:
                best = code
            return
        cells = defaultdict(list)
        for v, c in enumerate(colors):
            cells[c].append(v)
        target = min((c for c, vs in cells.items() if len(vs) > 1), key=lambda c: (len(cells[c]), c))
        tried = []
        for v in cells[target]:
            # 互為孿生的頂點 (對換為自同構) 只需走一次
            if any(_twins(adj, v, w) for w in tried):
                continue
            tried.append(v)
            split = [2 * c + 1 for c in colors]
            split[v] = 2 * colors[v]
            visit(split)

    visit(colors)
    return best or ()


@lru_cache(maxsize=65536)
def canonical_form(g, root=None):
    """同構 (有根時需保根) 的圖得到相同的 bytes 標籤。"""
    cap = get_settings().canonical_leaf_cap
    if root is None:
        colors = [0] * g.n
    else:
        if not (0 <= root < g.n):
            raise InvalidArgumentError(f"❌ 根 {root} 不在圖中")
        colors = [0 if v == root else 1 for v in range(g.n)]
    code = _canonical_code(g, colors, cap) if g.n else ()
    body = ",".join(f"{a}-{b}" for a, b in code)
    tag = "r" if root is not None else "u"
    return f"{tag}|{g.n}|{body}".encode("ascii")


def canonical_form_rooted(rg):
    return canonical_form(rg.graph, root=rg.root)


def are_isomorphic(a, b):
    if a.n != b.n or a.num_edges != b.num_edges or sorted(a.degrees()) != sorted(b.degrees()):
        return False
    return canonical_form(a) == canonical_form(b)


# ==========================================
# 3. Spasm 與 Möbius 反演
# ==========================================
@dataclass(frozen=True)
class SpasmMember:
    graph: Graph
    coefficient: Fraction
    partitions: int


@dataclass(frozen=True)
class Spasm:
    pattern: Graph
    members: tuple

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def graphs(self):
        return [m.graph for m in self.members]

    def labels(self):
        return {canonical_form(m.graph) for m in self.members}

    def __contains__(self, graph):
        return canonical_form(graph) in self.labels()

    def to_json(self):
        return [
            {
                "n": m.graph.n,
                "edges": [list(e) for e in m.graph.edge_list()],
                "coefficient": str(m.coefficient),
                "partitions": m.partitions,
            }
            for m in self.members
        ]


def _independent_partitions(f):
    """每個區塊都是獨立集的集合分割 (restricted growth)。"""
    blocks = []

    def place(v):
        if v == f.n:
            yield blocks
            return
        for b in blocks:
            if not (f.adjacency[v] & b):
                b.add(v)
                yield from place(v + 1)
                b.discard(v)
        blocks.append({v})
        yield from place(v + 1)
        blocks.pop()

    yield from place(0)


def _mobius(blocks):
    """分割的 Möbius 值：每個區塊貢獻 (-1)^k * k!，k = 區塊大小 - 1。"""
    value = 1
    for b in blocks:
        k = len(b) - 1
        value *= (-1) ** k * math.factorial(k)
    return value


def _quotient(f, blocks):
    owner = {}
    for i, b in enumerate(blocks):
        for v in b:
            owner[v] = i
    edges = set()
    for u, v in f.edges:
        a, b = owner[u], owner[v]
        edges.add((a, b) if a < b else (b, a))
    return Graph(len(blocks), frozenset(edges))


def spasm(f):
    cap = get_settings().pattern_size_cap
    if f.n > cap:
        raise CapExceededError(f"❌ 圖樣頂點數 {f.n} 超過上限 {cap}")
    return _spasm(f)


@lru_cache(maxsize=1024)
def _spasm(f):
    coeff = defaultdict(int)
    count = defaultdict(int)
    reps = {}
    for blocks in _independent_partitions(f):
        image = _quotient(f, blocks)
        key = canonical_form(image)
        reps.setdefault(key, image)
        coeff[key] += _mobius(blocks)
        count[key] += 1
    members = [SpasmMember(reps[k], Fraction(coeff[k]), count[k]) for k in reps]
    members.sort(key=lambda m: (-m.graph.n, -m.graph.num_edges, canonical_form(m.graph)))
    logger.debug("spasm(%s): %d 個成員", f.label(), len(members))
    return Spasm(f, tuple(members))


def sub_via_spasm(f, g):
    """inj(F,G) = Σ coeff(F')·hom(F',G)，再除以 aut(F)。"""
    total = Fraction(0)
    for m in spasm(f):
        if m.coefficient:
            total += m.coefficient * count_hom(m.graph, g)
    if total.denominator != 1:
        raise InternalCountingError(f"❌ spasm 反演結果不是整數: {total}")
    return _exact_div(total.numerator, count_aut(f), "spasm inj/aut")


def hom_via_spasm_decomposition(f, g):
    """
    hom(F,G) = Σ_{F′∈spasm(F)} surj(F,F′)·inj(F′,G)/aut(F′)；
    這裡的 surj 必須連邊也滿射，只蓋滿頂點會重複計算 (例如 P4 -> K3)。
    """
    total = 0
    for m in spasm(f):
        total += count_edge_surj(f, m.graph) * count_sub(m.graph, g)
    return total


def spasm_lower_bound_check(f1, f2, g):
    if f1 not in spasm(f2):
        raise PreconditionError(f"❌ {f1.label()} 不在 spasm({f2.label()}) 中")
    return count_hom(f2, g) >= count_hom(f1, g)


def p3_interval(m):
    """已知 hom(P2,G)=m 時 hom(P3,G) 的上下界 (m, m²)。"""
    if m < 0:
        raise InvalidArgumentError(f"❌ m 必須 >= 0: {m}")
    return m, m * m


# ==========================================
# 4. 鄰接矩陣冪次 oracle (僅供交叉驗證)
# ==========================================
def _matrix_power(g, k):
    A = g.adjacency_matrix(dtype=object)
    M = np.identity(g.n, dtype=object)
    for _ in range(k):
        M = M.dot(A)
    return M


def walk_count_oracle(k, g):
    """hom(P_k, G) = A^(k-1) 所有元素和 (P_k 有 k 個頂點)。"""
    if k < 1:
        raise InvalidArgumentError("❌ 路徑至少 1 個頂點")
    return int(sum(_matrix_power(g, k - 1).flat)) if g.n else 0


def cycle_trace_oracle(k, g):
    """hom(C_k, G) = trace(A^k)。"""
    if k < 3:
        raise InvalidArgumentError("❌ 環至少 3 個頂點")
    return int(np.trace(_matrix_power(g, k))) if g.n else 0


def cycle_hom(k, g):
    return count_hom(make_named_pattern("cycle", k), g)
