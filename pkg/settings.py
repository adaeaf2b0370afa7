import os
import logging
from dataclasses import dataclass, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from errors import InvalidArgumentError

logger = logging.getLogger(__name__)

THREADS_ENV = "HOMSCOPE_THREADS"
CONFIG_ENV = "HOMSCOPE_CONFIG"


# ==========================================
# 0. 全域設定 (預設值 -> TOML -> 環境變數)
# ==========================================
@dataclass(frozen=True)
class Settings:
    threads: int = os.cpu_count() or 1
    work_limit: int = 10**9
    pattern_size_cap: int = 10
    canonical_leaf_cap: int = 3_628_800
    tree_budget: int = 8
    knn_k: int = 1
    delta: float = 0.01
    lip_over_gamma_graph: float = 3.0
    lip_over_gamma_node: float = 6.0

    def __post_init__(self):
        for name in ("threads", "work_limit", "pattern_size_cap", "canonical_leaf_cap", "tree_budget", "knn_k"):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f"❌ 設定 {name} 必須 >= 1")
        if not 0 < self.delta < 1:
            raise InvalidArgumentError("❌ 設定 delta 必須介於 0 與 1 之間")
        if self.lip_over_gamma_graph <= 0 or self.lip_over_gamma_node <= 0:
            raise InvalidArgumentError("❌ lip_over_gamma 必須為正數")

    def override(self, **changes):
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def get_thread_count(raw=None):
    """
    解析執行緒上限 (支援整數、字串、空值)：
    1. 未設定 -> CPU 數量。
    2. 設定值大於 CPU 數量時仍照用，由使用者自行負責。
    """
    raw = os.environ.get(THREADS_ENV) if raw is None else raw
    if raw is None or str(raw).strip() == "":
        return os.cpu_count() or 1
    try:
        value = int(str(raw).strip())
    except ValueError:
        raise InvalidArgumentError(f"❌ {THREADS_ENV} 不是整數: {raw!r}")
    if value < 1:
        raise InvalidArgumentError(f"❌ {THREADS_ENV} 必須 >= 1")
    return value


def read_toml(path):
    """讀取 key = value 設定檔；鍵名的 '-' 一律轉成 '_'。"""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise InvalidArgumentError(f"❌ 找不到設定檔: {path}")
    except tomllib.TOMLDecodeError as e:
        raise InvalidArgumentError(f"❌ 設定檔格式錯誤 ({path}): {e}")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def load_settings(path=None):
    known = {f.name for f in fields(Settings)}
    values = {}

    # 1. TOML 設定檔 (參數優先，其次環境變數)
    path = path or os.environ.get(CONFIG_ENV)
    if path:
        for key, value in read_toml(path).items():
            if key in known:
                values[key] = value
            else:
                logger.debug("略過非全域設定鍵: %s", key)

    # 2. 環境變數覆蓋執行緒數
    if os.environ.get(THREADS_ENV):
        values["threads"] = get_thread_count()

    try:
        return Settings(**values)
    except TypeError as e:
        raise InvalidArgumentError(f"❌ 設定值型別錯誤: {e}")


_current = None


def get_settings():
    """整個行程共用一份；第一次呼叫時才讀檔與環境變數。"""
    global _current
    if _current is None:
        _current = load_settings()
    return _current


def set_settings(settings):
    global _current
    _current = settings
    return settings
