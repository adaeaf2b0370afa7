"""
homscope 例外層級：
1. 函式庫只負責 raise，訊息沿用「❌ / ⚠️ + 短句」的語氣。
2. 每個類別帶有 CLI 結束碼 (exit_code)，由 cli.py 統一轉換。
"""


class HomscopeError(Exception):
    exit_code = 1


# --- 輸入解析 ---
class ParseError(HomscopeError):
    exit_code = 3


class MissingFileError(ParseError):
    pass


class DuplicateEdgeError(ParseError):
    pass


class SelfLoopError(ParseError):
    pass


class NonContiguousIndicatorError(ParseError):
    pass


class BoundaryEdgeError(ParseError):
    pass


# --- 參數 / 不變量 ---
class InvariantViolationError(HomscopeError):
    exit_code = 4


class InvalidArgumentError(InvariantViolationError):
    pass


class PreconditionError(InvariantViolationError):
    pass


class DimensionMismatchError(InvariantViolationError):
    pass


class InsufficientSamplesError(InvariantViolationError):
    pass


# --- 資源上限 ---
class ResourceLimitError(HomscopeError):
    exit_code = 5


class CapExceededError(ResourceLimitError):
    pass


class DegenerateClassError(HomscopeError):
    exit_code = 6


class InternalCountingError(HomscopeError):
    """整除檢查失敗，代表計數程式有 bug。"""
    exit_code = 7
