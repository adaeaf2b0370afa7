"""
資料相依的泛化界 (圖分類 / 節點分類)：
1. 每個類別在訓練集內分層抽出 n 對互不相交、大小 ⌊m_c/2n⌋ 的子樣本。
2. 每對子樣本算 KL (k-NN 估計或精確離散 KL)，截斷在 0 以上再套 Ω。
3. bound = Σ_c π̂(c)·(L_c/γ)·[平均 β_c·Ω(KL) + 2β_c·√(log(2K/δ)/(n·⌊m_c/2n⌋))] + √(log(2/δ)/(2m))。
4. 期望版本以重複抽樣 (Monte Carlo) 近似，回報平均與標準誤。
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from divergence import diameter, empirical_kl_exact, knn_kl_estimate, omega
from errors import DegenerateClassError, HomscopeError, InvalidArgumentError
from fwl_refinement import dataset_featurize
from settings import get_settings

logger = logging.getLogger(__name__)

KL_METHODS = ("knn", "exact")


# ==========================================
# 0. 參數
# ==========================================
@dataclass(frozen=True)
class BoundParams:
    """lip_over_gamma 為 None 時依任務取設定值 (graph 3.0 / node 6.0)；也可給每類一個值的 list。"""
    lip_over_gamma: object = None
    delta: float = field(default_factory=lambda: get_settings().delta)
    n_pairs: int = 1
    knn_k: int = field(default_factory=lambda: get_settings().knn_k)
    depth: int = 1
    seed: int = 0
    kl_method: str = "knn"
    ego: bool = False
    rooted: bool = True
    counting: str = "hom"
    strict: bool = False

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise InvalidArgumentError(f"❌ delta 必須介於 0 與 1: {self.delta}")
        if self.n_pairs < 1:
            raise InvalidArgumentError(f"❌ n_pairs 必須 >= 1: {self.n_pairs}")
        if self.knn_k < 1:
            raise InvalidArgumentError(f"❌ knn_k 必須 >= 1: {self.knn_k}")
        if self.depth < 0:
            raise InvalidArgumentError(f"❌ depth 必須 >= 0: {self.depth}")
        if self.kl_method not in KL_METHODS:
            raise InvalidArgumentError(f"❌ kl_method 只能是 {KL_METHODS}: {self.kl_method!r}")
        lips = self.lip_over_gamma if isinstance(self.lip_over_gamma, (list, tuple)) else [self.lip_over_gamma]
        if any(x is not None and x <= 0 for x in lips):
            raise InvalidArgumentError("❌ lip_over_gamma 必須為正數")

    def lip_for(self, c, task):
        lip = self.lip_over_gamma
        if lip is None:
            s = get_settings()
            return s.lip_over_gamma_graph if task == "graph" else s.lip_over_gamma_node
        if isinstance(lip, (list, tuple)):
            return float(lip[c])
        return float(lip)

    def echo(self, task):
        out = asdict(self)
        if out["lip_over_gamma"] is None:
            out["lip_over_gamma"] = self.lip_for(0, task)
        elif isinstance(out["lip_over_gamma"], tuple):
            out["lip_over_gamma"] = list(out["lip_over_gamma"])
        return out


# ==========================================
# 1. 分層成對抽樣
# ==========================================
@dataclass(frozen=True)
class ClassPairs:
    c: int
    m_c: int
    pair_size: int
    pairs: tuple
    indices: tuple = ()

    @property
    def degenerate(self):
        return self.pair_size < 2


def stratified_pair_sampling(labels, n_pairs, seed=0, num_classes=None):
    """
    類別依編號順序處理，同一個 seed 得到相同結果：
    每類打亂後切成 2n 段，每段 ⌊m_c/2n⌋ 個，剩下的不用。
    """
    if n_pairs < 1:
        raise InvalidArgumentError(f"❌ n_pairs 必須 >= 1: {n_pairs}")
    labels = np.asarray(labels, dtype=int)
    K = num_classes if num_classes is not None else (int(labels.max()) + 1 if len(labels) else 0)
    rng = np.random.default_rng(seed)
    out = []
    for c in range(K):
        idx = np.flatnonzero(labels == c)
        size = len(idx) // (2 * n_pairs)
        perm = rng.permutation(idx)
        pairs = tuple(
            (tuple(perm[2 * j * size:(2 * j + 1) * size].tolist()), tuple(perm[(2 * j + 1) * size:(2 * j + 2) * size].tolist()))
            for j in range(n_pairs)
        )
        out.append(ClassPairs(c, len(idx), size, pairs, tuple(idx.tolist())))
    return out


# ==========================================
# 2. 報告
# ==========================================
@dataclass(frozen=True)
class ClassTerm:
    c: int
    m_c: int
    pair_size: int
    beta: float
    kl: tuple
    lip: float
    pi: float
    div_term: float
    conc_term: float
    degenerate: bool


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


@dataclass(frozen=True)
class BoundReport:
    task: str
    params: dict
    classes: tuple
    num_classes: int
    m: int
    residual: float
    bound: float
    expectation: dict = None

    def divergence_component(self):
        return sum(t.pi * t.lip * t.div_term for t in self.classes)

    def recompute(self):
        """只用報告裡記錄的數值重新組合 bound。"""
        delta = self.params["delta"]
        n = self.params["n_pairs"]
        total = 0.0
        for t in self.classes:
            if t.m_c == 0:
                continue
            if t.degenerate:
                div = t.beta
            else:
                div = float(np.mean([t.beta * omega(max(k, 0.0)) for k in t.kl]))
            conc = 2 * t.beta * math.sqrt(math.log(2 * self.num_classes / delta) / (n * max(t.pair_size, 1)))
            total += t.pi * t.lip * (div + conc)
        return total + math.sqrt(math.log(2 / delta) / (2 * self.m))

    def to_json(self):
        out = {
            "task": self.task,
            "params": self.params,
            "classes": [
                {
                    "c": t.c,
                    "m_c": t.m_c,
                    "pair_size": t.pair_size,
                    "beta": t.beta,
                    "kl": [_num(k) for k in t.kl],
                    "lip_over_gamma": t.lip,
                    "pi": t.pi,
                    "div_term": t.div_term,
                    "conc_term": t.conc_term,
                    "degenerate": t.degenerate,
                }
                for t in self.classes
            ],
            "num_classes": self.num_classes,
            "m": self.m,
            "residual": self.residual,
            "bound": self.bound,
        }
        if self.expectation is not None:
            out["expectation"] = self.expectation
        return out

    def to_summary_row(self, dataset=None, patterns=None):
        row = {
            "dataset": dataset,
            "patterns": patterns,
            "depth": self.params.get("depth"),
            "task": self.task,
            "K": self.num_classes,
            "m": self.m,
            "residual": self.residual,
            "bound": self.bound,
        }
        if self.expectation is not None:
            row["expectation_mean"] = self.expectation["mean"]
            row["expectation_stderr"] = self.expectation["stderr"]
        return row


# ==========================================
# 3. 組合
# ==========================================
def _class_term(rows, plan, params, task, num_classes, total):
    c = plan.c
    lip = params.lip_for(c, task)
    if plan.m_c == 0:
        return ClassTerm(c, 0, 0, 0.0, (), lip, 0.0, 0.0, 0.0, plan.degenerate)

    beta = diameter(rows[list(plan.indices)])

    if plan.degenerate:
        logger.warning("⚠️ 類別 %d: ⌊m_c/2n⌋ = %d < 2，Ω 以上限 1 代替", c, plan.pair_size)
        kl = ()
        div = beta
    elif beta == 0.0:
        kl = tuple(0.0 for _ in plan.pairs)
        div = 0.0
    else:
        values = []
        for j, (a, b) in enumerate(plan.pairs):
            try:
                if params.kl_method == "exact":
                    v = empirical_kl_exact(rows[list(a)], rows[list(b)])
                else:
                    v = knn_kl_estimate(rows[list(a)], rows[list(b)], params.knn_k)
            except HomscopeError as e:
                raise type(e)(f"{e} (類別 {c}, 第 {j} 對)") from e
            values.append(v)
        kl = tuple(values)
        div = float(np.mean([beta * omega(max(v, 0.0)) for v in kl]))

    conc = 2 * beta * math.sqrt(math.log(2 * num_classes / params.delta) / (params.n_pairs * max(plan.pair_size, 1)))
    return ClassTerm(c, plan.m_c, plan.pair_size, beta, kl, lip, plan.m_c / total, div, conc, plan.degenerate)


def _check_pairs(pairs, labels, num_classes, n_pairs):
    if len(pairs) != num_classes:
        raise InvalidArgumentError(f"❌ 需要 {num_classes} 個類別的成對樣本，實際 {len(pairs)} 個")
    for c, plan in enumerate(pairs):
        if plan.c != c or len(plan.pairs) != n_pairs:
            raise InvalidArgumentError(f"❌ 類別 {c} 的成對樣本與 n_pairs = {n_pairs} 不符")
        members = np.flatnonzero(labels == c).tolist()
        if sorted(plan.indices) != members or plan.m_c != len(members):
            raise InvalidArgumentError(f"❌ 類別 {c} 的 indices 必須正好是該類全部樣本")
        used = [i for a, b in plan.pairs for i in a + b]
        if len(used) != len(set(used)) or not set(used) <= set(members):
            raise InvalidArgumentError(f"❌ 類別 {c} 的成對樣本必須互不重疊且都屬於該類")
        if any(len(a) != plan.pair_size or len(b) != plan.pair_size for a, b in plan.pairs):
            raise InvalidArgumentError(f"❌ 類別 {c} 的每段樣本數必須都是 {plan.pair_size}")


def bound_from_features(rows, labels, num_classes, params, task="graph", pairs=None):
    """
    rows / labels 只含訓練樣本。
    pairs 預設依 params.seed 分層抽樣；也可直接給 stratified_pair_sampling 格式的成對樣本。
    """
    if task not in ("graph", "node"):
        raise InvalidArgumentError(f"❌ task 只能是 graph 或 node: {task!r}")
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    labels = np.asarray(labels, dtype=int)
    if len(rows) != len(labels):
        raise InvalidArgumentError(f"❌ 特徵列數 {len(rows)} 與標籤數 {len(labels)} 不符")
    if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvalidArgumentError(f"❌ 標籤必須在 0..{num_classes - 1}")
    lip = params.lip_over_gamma
    if isinstance(lip, (list, tuple)) and len(lip) != num_classes:
        raise InvalidArgumentError(f"❌ 每類一個 lip_over_gamma：需要 {num_classes} 個，實際 {len(lip)} 個")

    if pairs is None:
        plans = stratified_pair_sampling(labels, params.n_pairs, params.seed, num_classes)
    else:
        _check_pairs(pairs, labels, num_classes, params.n_pairs)
        plans = list(pairs)
    m = sum(p.pair_size for p in plans)
    if m == 0:
        raise InvalidArgumentError("❌ m = Σ⌊m_c/2n⌋ 為 0，樣本太少無法計算")

    degenerate = [p.c for p in plans if p.m_c > 0 and p.degenerate]
    if degenerate and params.strict:
        raise DegenerateClassError(f"❌ 類別 {degenerate} 的 ⌊m_c/2n⌋ < 2")

    with ThreadPoolExecutor(max_workers=get_settings().threads) as pool:
        terms = list(pool.map(lambda p: _class_term(rows, p, params, task, num_classes, len(labels)), plans))

    residual = math.sqrt(math.log(2 / params.delta) / (2 * m))
    bound = sum(t.pi * t.lip * (t.div_term + t.conc_term) for t in terms) + residual
    logger.info("📐 %s bound = %.6f (residual %.6f, m = %d)", task, bound, residual, m)
    return BoundReport(task, params.echo(task), tuple(terms), num_classes, m, residual, bound)


def _train_features(ds, patterns, params, level):
    features = dataset_featurize(
        ds, patterns, params.depth, level, ego=params.ego, rooted=params.rooted, counting=params.counting,
        progress=logger.isEnabledFor(logging.INFO),
    )
    if features.labels is None:
        raise InvalidArgumentError(f"❌ 資料集沒有 {level} 層級的標籤")
    train = ds.train_indices(level)
    return features.rows[train], np.asarray(features.labels)[train]


def graph_bound(ds, patterns, params):
    rows, labels = _train_features(ds, patterns, params, "graph")
    return bound_from_features(rows, labels, ds.num_classes, params, "graph")


def node_bound(ds, patterns, params):
    rows, labels = _train_features(ds, patterns, params, "node")
    return bound_from_features(rows, labels, ds.num_classes, params, "node")


def expectation_residual(m_total, delta, task):
    """期望版本的餘項：graph 用 log(1/δ)，node 用 log(2/δ)；m 為訓練樣本總數。"""
    if m_total < 1:
        raise InvalidArgumentError("❌ 訓練樣本數必須 >= 1")
    num = math.log(1 / delta) if task == "graph" else math.log(2 / delta)
    return math.sqrt(num / (2 * m_total))


def monte_carlo_expectation_bound(ds, patterns, params, repeats, task="graph"):
    """重複 repeats 次成對抽樣 (seed, seed+1, ...)，平均 Σ π̂·(L_c/γ)·平均 β·Ω(KL)。"""
    if repeats < 1:
        raise InvalidArgumentError(f"❌ repeats 必須 >= 1: {repeats}")
    level = "graph" if task == "graph" else "node"
    rows, labels = _train_features(ds, patterns, params, level)

    reports = []
    for r in range(repeats):
        p = BoundParams(**{**asdict(params), "seed": params.seed + r})
        reports.append(bound_from_features(rows, labels, ds.num_classes, p, task))
    values = np.array([rep.divergence_component() for rep in reports])
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(repeats)) if repeats > 1 else 0.0
    residual = expectation_residual(len(labels), params.delta, task)

    first = reports[0]
    expectation = {
        "repeats": repeats,
        "values": values.tolist(),
        "mean": mean,
        "stderr": stderr,
        "residual": residual,
        "bound": mean + residual,
    }
    logger.info("🎲 期望界 (%d 次): %.6f ± %.6f", repeats, mean, stderr)
    return BoundReport(first.task, first.params, first.classes, first.num_classes, first.m, first.residual, first.bound, expectation)
