"""
經驗分布之間的距離與散度：
1. k-NN KL 估計 (cKDTree)、離散分布的精確 KL / TV。
2. 精確 Wasserstein-1 (指派問題)、直徑、Ω(x)、k-variance。
3. Shearer 係數 (以單邊 P2 為基底)。
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist
from scipy.special import rel_entr

from errors import DimensionMismatchError, InsufficientSamplesError, InvalidArgumentError, PreconditionError
from settings import get_settings

logger = logging.getLogger(__name__)

DISTANCE_FLOOR = 1e-12


# ==========================================
# 0. 型別
# ==========================================
@dataclass(frozen=True, eq=False)
class EmpiricalSample:
    rows: np.ndarray
    provenance: tuple = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(-1, 1)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise InvalidArgumentError("❌ 樣本必須是非空的二維陣列")
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return self.rows.shape[0]

    @property
    def dim(self):
        return self.rows.shape[1]


def as_sample(x):
    return x if isinstance(x, EmpiricalSample) else EmpiricalSample(x)


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support.reshape(-1, 1)
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or len(probs) != len(support):
            raise DimensionMismatchError("❌ 機率個數與支撐點數不符")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("❌ 機率必須非負且總和為 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def to_sample(self, resolution):
        """每個支撐點重複 p·resolution 次 (必須剛好是整數)。"""
        counts = np.rint(self.probs * resolution).astype(int)
        if not np.allclose(counts, self.probs * resolution, atol=1e-9) or counts.sum() != resolution:
            raise InvalidArgumentError(f"❌ 機率無法以解析度 {resolution} 精確展開")
        return EmpiricalSample(np.repeat(self.support, counts, axis=0))


def _probs(p):
    return p.probs if isinstance(p, DiscreteDistribution) else np.asarray(p, dtype=float)


def _same_support(p, q):
    a, b = _probs(p), _probs(q)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"❌ 兩個分布的支撐大小不同: {a.shape} vs {b.shape}")
    if isinstance(p, DiscreteDistribution) and isinstance(q, DiscreteDistribution):
        if not np.array_equal(p.support, q.support):
            raise DimensionMismatchError("❌ 兩個分布的支撐點不一致")
    return a, b


# ==========================================
# 1. KL 與 TV
# ==========================================
def knn_kl_estimate(x, y, k=None):
    """
    (d/n)·Σ log(ν_k/ρ_k) + log(m/(n-1))：
    ρ_k 為 x_i 在 x 內 (排除自己) 的第 k 近鄰距離，ν_k 為到 y 的第 k 近鄰距離。
    距離低於 1e-12 時截斷；回傳值可能為負，由呼叫端截斷。
    """
    x, y = as_sample(x), as_sample(y)
    k = k or get_settings().knn_k
    if x.dim != y.dim:
        raise DimensionMismatchError(f"❌ 維度不同: {x.dim} vs {y.dim}")
    n, m = len(x), len(y)
    if n < k + 1 or m < k:
        raise InsufficientSamplesError(f"❌ k={k} 需要 |x| >= {k + 1} 且 |y| >= {k} (實際 {n}, {m})")

    rho = cKDTree(x.rows).query(x.rows, k=[k + 1])[0][:, 0]
    nu = cKDTree(y.rows).query(x.rows, k=[k])[0][:, 0]
    rho = np.maximum(rho, DISTANCE_FLOOR)
    nu = np.maximum(nu, DISTANCE_FLOOR)
    return float(x.dim / n * np.sum(np.log(nu / rho)) + np.log(m / (n - 1)))


def exact_kl_discrete(p, q):
    a, b = _same_support(p, q)
    return float(np.sum(rel_entr(a, b)))


def total_variation_discrete(p, q):
    a, b = _same_support(p, q)
    return float(0.5 * np.abs(a - b).sum())


def empirical_kl_exact(x, y):
    """把兩組樣本視為離散分布 (重複的列累加機率) 計算精確 KL。"""
    x, y = as_sample(x), as_sample(y)
    if x.dim != y.dim:
        raise DimensionMismatchError(f"❌ 維度不同: {x.dim} vs {y.dim}")
    _, inverse = np.unique(np.vstack([x.rows, y.rows]), axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    size = inverse.max() + 1
    p = np.bincount(inverse[:len(x)], minlength=size) / len(x)
    q = np.bincount(inverse[len(x):], minlength=size) / len(y)
    return exact_kl_discrete(p, q)


# ==========================================
# 2. Wasserstein-1、直徑、Ω
# ==========================================
def wasserstein1_exact(x, y):
    x, y = as_sample(x), as_sample(y)
    if len(x) != len(y):
        raise DimensionMismatchError(f"❌ W1 需要相同樣本數: {len(x)} vs {len(y)}")
    if x.dim != y.dim:
        raise DimensionMismatchError(f"❌ 維度不同: {x.dim} vs {y.dim}")
    cost = cdist(x.rows, y.rows)
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum() / len(x))


def diameter(x):
    x = as_sample(x)
    if len(x) < 2:
        return 0.0
    return float(pdist(x.rows).max())


def omega(v):
    """Ω(v) = √(min(v/2, 1 - e^{-v}))。"""
    if v is None or math.isnan(v) or v < 0:
        raise InvalidArgumentError(f"❌ Ω 的輸入必須 >= 0: {v}")
    if math.isinf(v):
        return 1.0
    return math.sqrt(min(v / 2.0, -math.expm1(-v)))


# ==========================================
# 3. k-variance
# ==========================================
def k_variance_estimate(pairs, via="exact", beta=None, kl="knn", k=None):
    """
    exact   : 各對樣本精確 W1 的平均。
    kl-chain: 各對 β·Ω(max(KL, 0)) 的平均；β 未給時取所有樣本的直徑。
    """
    pairs = [(as_sample(a), as_sample(b)) for a, b in pairs]
    if not pairs:
        raise InvalidArgumentError("❌ 至少需要一對樣本")
    for a, b in pairs:
        if len(a) != len(b):
            raise DimensionMismatchError(f"❌ 同一對樣本大小必須相同: {len(a)} vs {len(b)}")

    if via == "exact":
        return float(np.mean([wasserstein1_exact(a, b) for a, b in pairs]))
    if via != "kl-chain":
        raise InvalidArgumentError(f"❌ via 只能是 exact 或 kl-chain: {via!r}")

    if beta is None:
        beta = diameter(np.vstack([s.rows for pair in pairs for s in pair]))
    estimator = empirical_kl_exact if kl == "exact" else (lambda a, b: knn_kl_estimate(a, b, k))
    terms = [beta * omega(max(estimator(a, b), 0.0)) for a, b in pairs]
    return float(np.mean(terms))


# ==========================================
# 4. Shearer 係數
# ==========================================
def shearer_coefficient(f):
    """H(X_{F→S}) <= c·H(X_{P2→S})，c = |E_F| / 最小度數。"""
    if f.num_edges == 0:
        raise InvalidArgumentError("❌ Shearer 係數需要至少一條邊")
    if not f.is_connected():
        raise PreconditionError(f"❌ {f.label()} 不連通")
    return Fraction(f.num_edges, min(f.degrees()))
