"""CSV / JSON 产物的读写

CSV 第一行是注释头：配置哈希与各模块版本；浮点一律以 %.17g 写出，
同一配置两次运行的输出逐字节相同。
"""
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy

from core.errors import CsvParseError

PACKAGE_VERSION = "1.0.0"
FLOAT_FORMAT = "%.17g"

logger = logging.getLogger(__name__)


def module_versions() -> Dict[str, str]:
    return {
        "resonant-decay": PACKAGE_VERSION,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def header_line(config_hash: str) -> str:
    versions = " ".join(f"{name}={version}" for name, version in module_versions().items())
    return f"# config_sha256={config_hash} {versions}\n"


def write_csv(frame: pd.DataFrame, path: Path, config_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(header_line(config_hash))
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"已写出 {path}（{len(frame)} 行）")
    return path


def to_jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def write_json(data: Dict[str, Any], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"已写出 {path}")
    return path


# 输入 CSV 中时间与生存概率列可接受的名称
_TIME_COLUMNS = ("t", "t_fs", "t_us")
_SURVIVAL_COLUMNS = ("S", "S_oracle", "S_N")


def read_curve_csv(path: Path, require_sigma: bool = False) -> pd.DataFrame:
    """读取 t,S[,sigma] 曲线；忽略 # 注释行，出错时报告文件行号"""
    path = Path(path)
    try:
        raw_lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CsvParseError(f"无法读取 {path}: {e}", stage="fit")
    line_numbers: List[int] = []
    kept: List[str] = []
    for number, line in enumerate(raw_lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        line_numbers.append(number)
        kept.append(line)
    if not kept:
        raise CsvParseError(f"{path} 中没有数据", line=len(raw_lines), stage="fit")

    header_number = line_numbers[0]
    columns = [c.strip() for c in kept[0].split(",")]
    t_col = next((c for c in _TIME_COLUMNS if c in columns), None)
    s_col = next((c for c in _SURVIVAL_COLUMNS if c in columns), None)
    if t_col is None or s_col is None:
        raise CsvParseError(f"表头必须包含 t 和 S 列，实际为 {columns}", line=header_number, stage="fit")
    if require_sigma and "sigma" not in columns:
        raise CsvParseError("表头缺少 sigma 列", line=header_number, stage="fit")

    for offset, line in enumerate(kept[1:], start=1):
        if len(line.split(",")) != len(columns):
            raise CsvParseError(f"列数与表头不一致: {line!r}", line=line_numbers[offset], stage="fit")
    frame = pd.read_csv(io.StringIO("\n".join(kept)), dtype=str, skipinitialspace=True)
    frame.columns = [c.strip() for c in frame.columns]

    wanted = [t_col, s_col] + (["sigma"] if "sigma" in columns else [])
    result = pd.DataFrame()
    for name in wanted:
        values = pd.to_numeric(frame[name], errors="coerce")
        bad = np.nonzero(values.isna().to_numpy())[0]
        if len(bad):
            row = int(bad[0])
            raise CsvParseError(
                f"列 {name} 的值不是数字: {frame[name].iloc[row]!r}", line=line_numbers[row + 1], stage="fit"
            )
        result[{t_col: "t", s_col: "S"}.get(name, name)] = values.astype(float)
    return result


def curve_config_hash(path: Path) -> Optional[str]:
    """读取 CSV 注释头中的配置哈希"""
    try:
        first = Path(path).read_text(encoding="utf-8").splitlines()[0]
    except (OSError, IndexError):
        return None
    for token in first.lstrip("# ").split():
        if token.startswith("config_sha256="):
            return token.split("=", 1)[1]
    return None
