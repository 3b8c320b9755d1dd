from typing import Any, Dict, Optional


class DecayError(Exception):
    """所有衰变计算错误的基类

    exit_code 供命令行入口使用：2 表示输入校验错误，3 表示数值错误。
    stage 记录出错的流水线阶段（poles / coeffs / survival ...）。
    """

    exit_code = 3

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "stage": self.stage,
            "exit_code": self.exit_code,
        }


class ValidationFailure(DecayError):
    """输入校验类错误的公共基类"""

    exit_code = 2


class InvalidSpecError(ValidationFailure, ValueError):
    """势场、初态或网格参数不合法"""


class DomainError(ValidationFailure, ValueError):
    """自变量超出定义域（x 不在 [0, L]、t < 0 等）"""


class ProvenanceError(ValidationFailure):
    """初态与极点集合不是在同一个势场上构造的"""


class InvalidLadderError(ValidationFailure, ValueError):
    """N 阶梯不满足要求（长度不足、非递增、非几何）"""


class InsufficientDataError(ValidationFailure, ValueError):
    """拟合可用的数据点不足"""


class CsvParseError(ValidationFailure):
    """CSV 解析失败，line 为出错的文件行号（从 1 开始）"""

    def __init__(self, message: str, line: Optional[int] = None, stage: Optional[str] = None):
        super().__init__(f"{message} (line {line})" if line is not None else message, stage)
        self.line = line


class NotAPoleError(DecayError):
    """给定的 kappa 不是出射格林函数的极点"""


class IncompleteSearchError(DecayError):
    """幅角原理计数与找到的零点数不一致，box 为出问题的子区域"""

    def __init__(self, message: str, box: Optional[tuple] = None, stage: Optional[str] = None):
        super().__init__(message, stage)
        self.box = box


class DegeneratePoleError(DecayError):
    """两个极点之间的距离小于简并容差"""

    def __init__(self, message: str, pair: Optional[tuple] = None, stage: Optional[str] = None):
        super().__init__(message, stage)
        self.pair = pair


class InconclusiveConvergenceError(DecayError):
    """矩序列在 N 阶梯上的走势无法判断收敛或发散"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None, stage: Optional[str] = None):
        super().__init__(message, stage)
        self.diagnostics = diagnostics or {}


class InconclusiveVerdictError(DecayError):
    """三次和的判定结果为 inconclusive，无法给出短时指数"""


class WindowTooEarlyError(DecayError):
    """拟合窗口内 1 - S 低于噪声底"""
