"""子命令路由：每个 router 模块登记自己的子命令，main 统一挂到 argparse 上"""
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from api.models import RunConfig, StageResponse
from core.decay_service import DecayService
from core.dynamics import geometric_ladder
from core.errors import InvalidSpecError
from core.initial_states import CoefficientSet, InitialState
from core.resonance import PoleSet
from core.short_time import FitMode, FreeExponent, LeastSquares, TwoPoint
from core.storage.pole_cache import config_hash


class StageError(Exception):
    """某个阶段返回 success=False，携带该结果字典"""

    def __init__(self, result: Dict[str, Any]):
        super().__init__(result.get("message", "阶段失败"))
        self.result = result

    @property
    def exit_code(self) -> int:
        return int(self.result.get("exit_code", 3))


def unwrap(result: Dict[str, Any]) -> Dict[str, Any]:
    if not result["success"]:
        raise StageError(result)
    return result


@dataclass
class Command:
    name: str
    help: str
    handler: Callable
    arguments: List[Tuple[Tuple[str, ...], Dict[str, Any]]] = field(default_factory=list)


class CommandRouter:
    def __init__(self, tags: List[str]):
        self.tags = tags
        self.commands: List[Command] = []

    def command(self, name: str, help: str, arguments: Optional[List[Tuple[Tuple[str, ...], Dict[str, Any]]]] = None):
        def decorator(fn: Callable) -> Callable:
            self.commands.append(Command(name, help, fn, arguments or []))
            return fn

        return decorator

    def register(self, subparsers) -> None:
        for cmd in self.commands:
            parser = subparsers.add_parser(cmd.name, help=cmd.help)
            for flags, kwargs in cmd.arguments:
                parser.add_argument(*flags, **kwargs)
            parser.set_defaults(handler=cmd.handler)


# 各子命令共用的参数
POLE_ARGS = [
    (("--n-poles",), {"type": int, "help": "共振极点数 N"}),
    (("--box-re-max",), {"type": float, "help": "搜索框 Re κ 上限 (nm^-1)"}),
    (("--box-im-max",), {"type": float, "help": "搜索框 |Im κ| 深度 (nm^-1)"}),
]
STATE_ARGS = [
    (("--state",), {"choices": ["gaussian", "sine"], "help": "初态类型"}),
    (("--x0",), {"type": float, "help": "高斯中心 (nm)"}),
    (("--sigma",), {"type": float, "help": "高斯宽度 (nm)"}),
    (("--j",), {"type": int, "help": "正弦态阶数"}),
]
LADDER_ARGS = [
    (("--ladder",), {"type": int, "nargs": "+", "help": "N 阶梯（几何级数，至少 5 级）"}),
]


def apply_overrides(config: RunConfig, args) -> RunConfig:
    """命令行参数覆盖配置文件中的对应字段"""
    updates: Dict[str, Dict[str, Any]] = {}

    def put(section: str, key: str, attr: str):
        value = getattr(args, attr, None)
        if value is not None:
            updates.setdefault(section, {})[key] = value

    put("state", "kind", "state")
    put("state", "x0_nm", "x0")
    put("state", "sigma_nm", "sigma")
    put("state", "j", "j")
    put("search_box", "re_max", "box_re_max")
    put("search_box", "im_depth", "box_im_max")
    put("time_grid", "t_max", "t_max")
    put("time_grid", "points", "t_points")
    put("time_grid", "unit", "t_unit")
    put("analysis", "ladder", "ladder")
    put("analysis", "fit_mode", "mode")
    put("analysis", "window", "window")
    put("analysis", "two_points", "points")
    put("oracle", "dx_nm", "dx")
    put("oracle", "dt_fs", "dt")
    put("oracle", "pad_factor", "pad_factor")
    put("oracle", "t_max", "oracle_t_max")
    put("oracle", "unit", "oracle_t_unit")
    put("oracle", "absorbing_width_nm", "absorbing_width")
    put("oracle", "absorbing_strength_eV", "absorbing_strength")

    data = config.model_dump()
    for section, values in updates.items():
        data[section].update(values)
    if getattr(args, "n_poles", None) is not None:
        data["n_poles"] = args.n_poles
    if getattr(args, "out", None) is not None:
        data["output_dir"] = args.out
    return RunConfig.model_validate(data)


def digest(config: RunConfig) -> str:
    return config_hash(config.model_dump(mode="json"))


def respond(result: Dict[str, Any], data: Dict[str, Any], artifacts: List[Path]) -> StageResponse:
    return StageResponse(
        success=result["success"],
        message=result["message"],
        stage=result["stage"],
        data=data,
        artifacts=[str(p) for p in artifacts],
        timestamp=datetime.now(),
    )


def load_poles(config: RunConfig, service: DecayService, n_poles: int, threads: Optional[int]) -> PoleSet:
    result = unwrap(
        service.find_poles(
            config.build_potential(),
            config.build_params(),
            n_poles,
            config.build_search_box(),
            threads=threads,
            cache_config=config.pole_key(n_poles),
        )
    )
    return result["poles"]


def load_coefficients(
    config: RunConfig,
    service: DecayService,
    poles: PoleSet,
    state: Optional[InitialState] = None,
) -> Tuple[CoefficientSet, Dict[str, Any]]:
    state = state or config.build_state()
    result = unwrap(
        service.expansion_coefficients(
            state, poles, cache_config=config.coefficient_key(poles.resonance_count, state)
        )
    )
    return result["coefficients"], result


def time_grid(config: RunConfig, tau1: Optional[float]) -> np.ndarray:
    grid = config.time_grid
    if grid.unit == "tau1" and tau1 is None:
        raise InvalidSpecError("没有共振极点，无法以 tau1 为时间单位", stage="survival")
    t_max = grid.t_max * tau1 if grid.unit == "tau1" else grid.t_max
    if grid.points == 1:
        return np.array([0.0])
    return np.linspace(0.0, t_max, grid.points)


def ladder_for(config: RunConfig, n_top: int) -> List[int]:
    if config.analysis.ladder:
        return config.analysis.ladder
    return geometric_ladder(max(4, n_top // 16), n_top, 5)


def fit_mode_for(config: RunConfig) -> FitMode:
    analysis = config.analysis
    if analysis.fit_mode == "two-point":
        if analysis.two_points is None:
            raise StageError(
                {
                    "success": False,
                    "message": "two-point 模式需要 analysis.two_points",
                    "error": "InvalidSpecError",
                    "stage": "fit",
                    "exit_code": 2,
                }
            )
        return TwoPoint(*analysis.two_points)
    if analysis.fit_mode == "free":
        return FreeExponent(analysis.window)
    return LeastSquares(analysis.window)


def output_dir(config: RunConfig) -> Path:
    path = Path(config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path
