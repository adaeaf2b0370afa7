"""
圖樣集合的 hom 矩陣 M[i][j] = hom(F_i, F_j)：
1. 精確整數秩 (Bareiss 無分數消去)。
2. 找出列可由其他列線性表出的多餘圖樣，並給出保秩的精簡集合。
3. 直接分析「字面矩陣」(例如別處印出的數值) 以及 CSV 匯出。
"""
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from pathlib import Path

import numpy as np
import pandas as pd

from errors import DimensionMismatchError, InternalCountingError, InvalidArgumentError, MissingFileError, ParseError
from graph_core import RootedGraph
from hom_engine import count_hom
from settings import get_settings

logger = logging.getLogger(__name__)

CIRCUIT_SEARCH_CAP = 16


@dataclass(frozen=True)
class HomMatrix:
    names: tuple
    entries: tuple
    patterns: object = None

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "entries", tuple(tuple(int(x) for x in row) for row in self.entries))
        m = len(self.names)
        if len(self.entries) != m or any(len(row) != m for row in self.entries):
            raise DimensionMismatchError(f"❌ 矩陣必須是 {m}x{m}")
        for i, row in enumerate(self.entries):
            if any(x < 0 for x in row):
                raise InvalidArgumentError(f"❌ 第 {i} 列含負數")
            if row[i] <= 0:
                raise InvalidArgumentError(f"❌ 對角線 ({self.names[i]}) 必須為正")

    @property
    def size(self):
        return len(self.names)

    def to_frame(self):
        return pd.DataFrame(list(self.entries), index=list(self.names), columns=list(self.names))

    def to_csv(self, path=None):
        text = pd.DataFrame(list(self.entries), columns=list(self.names)).to_csv(index=False)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def submatrix(self, keep):
        keep = list(keep)
        return HomMatrix(
            [self.names[i] for i in keep],
            [[self.entries[i][j] for j in keep] for i in keep],
        )


def _unrooted(p):
    return p.graph if isinstance(p, RootedGraph) else p


def build_hom_matrix(patterns, threads=None):
    """逐格平行計算；結果只依圖樣順序而定。"""
    cap = get_settings().pattern_size_cap
    graphs = [_unrooted(p) for p in patterns]
    for g, name in zip(graphs, patterns.names):
        if g.n > cap:
            raise InvalidArgumentError(f"❌ 圖樣 {name} 有 {g.n} 個頂點，超過上限 {cap}")
    m = len(graphs)
    cells = [(i, j) for i in range(m) for j in range(m)]
    with ThreadPoolExecutor(max_workers=threads or get_settings().threads) as pool:
        values = list(pool.map(lambda ij: count_hom(graphs[ij[0]], graphs[ij[1]]), cells))
    entries = [values[i * m:(i + 1) * m] for i in range(m)]
    return HomMatrix(patterns.names, entries, patterns)


def from_literal(rows, names=None):
    """把已知數值 (例如印出來的矩陣) 當作資料直接包成 HomMatrix。"""
    rows = [list(r) for r in rows]
    names = names or [f"F{i + 1}" for i in range(len(rows))]
    return HomMatrix(names, rows)


def read_literal_csv(path):
    """第一列為圖樣名稱，其後每列為整數。"""
    try:
        df = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except FileNotFoundError:
        raise MissingFileError(f"❌ 找不到矩陣檔: {path}")
    except pd.errors.EmptyDataError:
        raise ParseError(f"❌ 矩陣檔是空的: {path}")
    numeric = df.apply(lambda col: pd.to_numeric(col.str.strip(), errors="coerce"))
    if numeric.isna().any().any():
        raise ParseError(f"❌ {path} 含非整數的格子")
    if (numeric % 1 != 0).any().any():
        raise ParseError(f"❌ {path} 的格子必須是整數")
    return from_literal(numeric.to_numpy(dtype=np.int64).tolist(), [str(c).strip() for c in df.columns])


# ==========================================
# 秩 (Bareiss 無分數消去)
# ==========================================
def _as_fraction(x):
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, float) and not math.isfinite(x):
        raise InvalidArgumentError(f"❌ 矩陣元素不是有限值: {x}")
    return Fraction(x)


def _integer_rows(matrix):
    """有理數列乘上分母的最小公倍數，秩不變。"""
    if isinstance(matrix, HomMatrix):
        return [list(r) for r in matrix.entries]
    rows = [[_as_fraction(x) for x in row] for row in np.asarray(matrix, dtype=object).tolist()]
    if rows and len({len(r) for r in rows}) != 1:
        raise DimensionMismatchError("❌ 每列長度必須相同")
    out = []
    for row in rows:
        scale = math.lcm(*(x.denominator for x in row)) if row else 1
        out.append([int(x * scale) for x in row])
    return out


def exact_rank(matrix):
    M = _integer_rows(matrix)
    if not M or not M[0]:
        return 0
    nr, nc = len(M), len(M[0])
    rank = 0
    prev = 1
    for col in range(nc):
        if rank == nr:
            break
        pivot = next((r for r in range(rank, nr) if M[r][col] != 0), None)
        if pivot is None:
            continue
        M[rank], M[pivot] = M[pivot], M[rank]
        p = M[rank][col]
        for r in range(rank + 1, nr):
            lead = M[r][col]
            for c in range(col + 1, nc):
                q, rem = divmod(M[r][c] * p - lead * M[rank][c], prev)
                if rem:
                    raise InternalCountingError("❌ Bareiss 消去出現非整除")
                M[r][c] = q
            M[r][col] = 0
        prev = p
        rank += 1
    return rank


# ==========================================
# 多餘圖樣分析
# ==========================================
@dataclass(frozen=True)
class RedundancyReport:
    names: tuple
    rank: int
    redundant: tuple
    dependent_subsets: tuple
    reduced: tuple
    reduced_rank: int
    reduced_submatrix_rank: int

    def to_json(self):
        return {
            "patterns": list(self.names),
            "rank": self.rank,
            "redundant": list(self.redundant),
            "dependent_subsets": [list(s) for s in self.dependent_subsets],
            "reduced": list(self.reduced),
            "reduced_rank": self.reduced_rank,
            "reduced_submatrix_rank": self.reduced_submatrix_rank,
        }


def _minimal_dependent_subsets(rows):
    """最小線性相依列集合 (circuit)：本身相依，但每個真子集都獨立。"""
    found = []
    for size in range(1, len(rows) + 1):
        for subset in combinations(range(len(rows)), size):
            if any(set(c) <= set(subset) for c in found):
                continue
            if exact_rank([rows[i] for i in subset]) < size:
                found.append(subset)
    return found


def find_redundant_patterns(matrix):
    """
    回報多餘圖樣，不更動使用者的集合：
    1. redundant：拿掉該列秩不變的圖樣。
    2. dependent_subsets：最小相依子集合。
    3. reduced：依原順序貪婪挑選會讓秩增加的圖樣。
    """
    if not isinstance(matrix, HomMatrix):
        matrix = build_hom_matrix(matrix)
    rows = [list(r) for r in matrix.entries]
    names = matrix.names
    rank = exact_rank(rows)

    redundant = tuple(
        names[i] for i in range(len(rows))
        if exact_rank(rows[:i] + rows[i + 1:]) == rank
    )

    if len(rows) <= CIRCUIT_SEARCH_CAP:
        circuits = tuple(tuple(names[i] for i in c) for c in _minimal_dependent_subsets(rows))
    else:
        logger.warning("⚠️ 圖樣數 %d 超過 %d，略過最小相依子集合搜尋", len(rows), CIRCUIT_SEARCH_CAP)
        circuits = ()

    keep = []
    for i in range(len(rows)):
        if exact_rank([rows[j] for j in keep + [i]]) > len(keep):
            keep.append(i)
    reduced_rank = exact_rank([rows[i] for i in keep])
    sub_rank = exact_rank(matrix.submatrix(keep).entries)
    if sub_rank != reduced_rank:
        logger.info("ℹ️ 精簡後方陣的秩為 %d (列秩 %d)", sub_rank, reduced_rank)

    report = RedundancyReport(
        names, rank, redundant, circuits, tuple(names[i] for i in keep), reduced_rank, sub_rank,
    )
    if redundant:
        logger.info("🔍 多餘圖樣: %s", ", ".join(redundant))
    return report


def matrix_report_text(matrix, report):
    """給人看的摘要：矩陣表格加上秩與多餘圖樣。"""
    buf = io.StringIO()
    buf.write(matrix.to_frame().to_string())
    buf.write(f"\nrank = {report.rank}\n")
    if report.redundant:
        buf.write(f"redundant = {', '.join(report.redundant)}\n")
        buf.write(f"reduced = {', '.join(report.reduced)}\n")
    return buf.getvalue()
