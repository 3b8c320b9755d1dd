"""极点集合与展开系数的磁盘缓存

每个条目是一个 JSON-lines 文件，文件名为规范化配置的 SHA-256：
第一行是头 {"format", "version", "key", "config"}，之后每行一条记录。
浮点数经 json 以 repr 写出，读回后逐位相同。
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config.cache import CacheSetting
from config.solver import SolverSetting
from core.initial_states import CoefficientSet, InitialState
from core.potential import PhysicalParams, PiecewisePotential
from core.resonance import PoleSet, SearchBox, build_resonant_state

CACHE_FORMAT_VERSION = 1
POLE_FORMAT = "resonant-decay/poles"
COEFF_FORMAT = "resonant-decay/coefficients"


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def _coefficient_mismatch(
    header: Dict[str, Any],
    key: str,
    n: np.ndarray,
    kappa: np.ndarray,
    state: InitialState,
    poles: PoleSet,
) -> Optional[str]:
    """缓存的系数必须属于同一个键、同一个初态，且 κ 与当前极点集合的求和顺序逐位一致"""
    if header.get("key") != key:
        return "键不同"
    if header.get("state") != json.loads(canonical_json(state.describe())):
        return "初态不同"
    count = int(np.max(np.abs(n))) if len(n) else 0
    if header.get("pole_count") != count or count > poles.resonance_count:
        return f"极点数 {header.get('pole_count')} 与当前 {poles.resonance_count} 不符"
    expected = poles.ordered(count)
    if [i for i, _ in expected] != n.tolist() or not np.array_equal(poles.kappas(count), kappa):
        return "极点集合不同"
    return None


class PoleCache:
    """按配置哈希读写极点集合与系数集合"""

    def __init__(self, setting: Optional[CacheSetting] = None):
        setting = setting or CacheSetting()
        self.directory = Path(setting.directory)
        self.enabled = setting.enabled
        self.logger = logging.getLogger(__name__)

    def _path(self, kind: str, key: str) -> Path:
        return self.directory / f"{kind}-{key}.jsonl"

    def _write(self, path: Path, header: Dict[str, Any], records: List[Dict[str, Any]]) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            fh.write(canonical_json(header) + "\n")
            for record in records:
                fh.write(canonical_json(record) + "\n")
        tmp.replace(path)

    def _read(self, path: Path, fmt: str) -> Optional[Tuple[Dict[str, Any], List[Dict[str, Any]]]]:
        if not self.enabled or not path.exists():
            return None
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
            header = json.loads(lines[0])
            if header.get("format") != fmt or header.get("version") != CACHE_FORMAT_VERSION:
                self.logger.warning(f"缓存 {path.name} 格式不匹配，忽略")
                return None
            return header, [json.loads(line) for line in lines[1:] if line.strip()]
        except (OSError, ValueError, IndexError) as e:
            self.logger.warning(f"读取缓存 {path.name} 失败: {e}")
            return None

    # 极点

    def save_poles(self, key: str, config: Dict[str, Any], poles: PoleSet) -> Optional[Path]:
        if not self.enabled:
            return None
        records = [
            {"n": i + 1, "re": s.kappa.value.real, "im": s.kappa.value.imag, "class": s.kappa.pole_class.value}
            for i, s in enumerate(poles.resonances)
        ]
        records += [
            {"n": 0, "re": s.kappa.value.real, "im": s.kappa.value.imag, "class": s.kappa.pole_class.value}
            for s in poles.imaginary
        ]
        header = {"format": POLE_FORMAT, "version": CACHE_FORMAT_VERSION, "key": key, "config": config}
        if poles.search_box is not None:
            header["search_box"] = [poles.search_box.re_max, poles.search_box.im_depth, poles.search_box.re_min]
        path = self._path("poles", key)
        self._write(path, header, records)
        self.logger.info(f"极点集合已缓存: {path}")
        return path

    def load_poles(
        self,
        key: str,
        p: PiecewisePotential,
        params: PhysicalParams,
        setting: Optional[SolverSetting] = None,
    ) -> Optional[PoleSet]:
        loaded = self._read(self._path("poles", key), POLE_FORMAT)
        if loaded is None:
            self.logger.info(f"极点缓存未命中: {key[:12]}")
            return None
        header, records = loaded
        box = header.get("search_box")
        states = [
            (r["n"], build_resonant_state(p, params, complex(r["re"], r["im"]), setting=setting)) for r in records
        ]
        self.logger.info(f"极点缓存命中: {key[:12]}，{len(states)} 个态")
        return PoleSet(
            potential=p,
            params=params,
            resonances=tuple(s for n, s in states if n > 0),
            imaginary=tuple(s for n, s in states if n == 0),
            search_box=SearchBox(re_max=box[0], im_depth=box[1], re_min=box[2]) if box else None,
        )

    # 系数

    def save_coefficients(self, key: str, config: Dict[str, Any], coeffs: CoefficientSet) -> Optional[Path]:
        if not self.enabled:
            return None
        records = [
            {
                "n": int(n),
                "re_kappa": k.real,
                "im_kappa": k.imag,
                "re_C": c.real,
                "im_C": c.imag,
                "re_Cbar": cb.real,
                "im_Cbar": cb.imag,
            }
            for n, k, c, cb in zip(coeffs.n, coeffs.kappa, coeffs.c, coeffs.c_bar)
        ]
        header = {
            "format": COEFF_FORMAT,
            "version": CACHE_FORMAT_VERSION,
            "key": key,
            "config": config,
            "pole_count": coeffs.pole_count,
            "state": coeffs.source_state.describe() if coeffs.source_state is not None else None,
        }
        path = self._path("coefficients", key)
        self._write(path, header, records)
        self.logger.info(f"系数集合已缓存: {path}")
        return path

    def load_coefficients(self, key: str, state: InitialState, poles: PoleSet) -> Optional[CoefficientSet]:
        loaded = self._read(self._path("coefficients", key), COEFF_FORMAT)
        if loaded is None:
            self.logger.info(f"系数缓存未命中: {key[:12]}")
            return None
        header, records = loaded
        n = np.array([r["n"] for r in records], dtype=int)
        kappa = np.array([complex(r["re_kappa"], r["im_kappa"]) for r in records])
        mismatch = _coefficient_mismatch(header, key, n, kappa, state, poles)
        if mismatch:
            self.logger.warning(f"系数缓存 {key[:12]} 与当前请求不符（{mismatch}），重新计算")
            return None
        self.logger.info(f"系数缓存命中: {key[:12]}，{len(records)} 项")
        return CoefficientSet(
            n=n,
            kappa=kappa,
            c=np.array([complex(r["re_C"], r["im_C"]) for r in records]),
            c_bar=np.array([complex(r["re_Cbar"], r["im_Cbar"]) for r in records]),
            source_state=state,
            poles=poles,
        )
