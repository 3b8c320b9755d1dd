from dataclasses import replace
from pathlib import Path

from api.models import RunConfig, StageResponse
from api.router.base import STATE_ARGS, CommandRouter, digest, load_poles, output_dir, respond, unwrap
from core.artifacts import curve_config_hash, read_curve_csv, write_csv, write_json
from core.decay_service import DecayService
from core.errors import InvalidSpecError
from core.propagation import Boundary, BoundaryKind, GridSpec, default_grid

router = CommandRouter(tags=["oracle"])

# 只为确定 τ_1 而做的极点搜索规模
TAU1_POLES = 10

ORACLE_ARGS = [
    (("--dx",), {"type": float, "help": "空间步长 (nm)"}),
    (("--dt",), {"type": float, "help": "时间步长 (fs)，默认取精度上限"}),
    (("--pad-factor",), {"type": float, "help": "两侧空白，以 L 为单位"}),
    (("--t-max",), {"type": float, "dest": "oracle_t_max", "help": "传播时长"}),
    (("--t-unit",), {"choices": ["tau1", "fs"], "dest": "oracle_t_unit", "help": "--t-max 的单位"}),
    (("--absorbing-width",), {"type": float, "help": "吸收层宽度 (nm)，给出时改用吸收边界"}),
    (("--absorbing-strength",), {"type": float, "help": "吸收层强度 (eV)"}),
]

COMPARE_ARGS = [
    (("--expansion",), {"required": True, "help": "survival 子命令产出的 CSV"}),
    (("--oracle",), {"required": True, "help": "oracle 子命令产出的 CSV"}),
]


def oracle_grid(config: RunConfig) -> GridSpec:
    settings = config.oracle
    params = config.build_params()
    boundary = None
    if settings.absorbing_width_nm is not None:
        boundary = Boundary(
            kind=BoundaryKind.ABSORBING_LAYER,
            width=settings.absorbing_width_nm,
            strength=settings.absorbing_strength_eV or 1.0,
        )
    grid = default_grid(
        config.build_potential().total_length,
        params,
        dx=settings.dx_nm,
        pad_factor=settings.pad_factor,
        boundary=boundary,
    )
    if settings.dt_fs is not None:
        grid = replace(grid, dt=settings.dt_fs)
    return grid


@router.command("oracle", "Crank–Nicolson 直接传播，写出 oracle.csv", ORACLE_ARGS + STATE_ARGS)
def oracle_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    t_max = config.oracle.t_max
    if config.oracle.unit == "tau1":
        poles = load_poles(config, service, TAU1_POLES, args.threads)
        if poles.lifetime_tau1 is None:
            raise InvalidSpecError("没有共振极点，无法以 tau1 为传播时长单位", stage="oracle")
        t_max *= poles.lifetime_tau1
    result = unwrap(
        service.oracle(
            config.build_potential(),
            config.build_state(),
            oracle_grid(config),
            t_max,
            config.build_params(),
        )
    )
    oracle = result["result"]
    path = write_csv(oracle.to_frame(), output_dir(config) / "oracle.csv", digest(config))
    return respond(
        result,
        {
            "t_max_fs": t_max,
            "contaminated": result["contaminated"],
            "contamination_time_fs": result["contamination_time_fs"],
            "final_total_norm": float(oracle.total_norm[-1]),
        },
        [path],
    )


@router.command("compare", "比较展开曲线与传播曲线", COMPARE_ARGS)
def compare_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    expansion_path, oracle_path = Path(args.expansion), Path(args.oracle)
    result = unwrap(service.compare(read_curve_csv(expansion_path), read_curve_csv(oracle_path)))
    summary = result["report"].to_dict()
    summary["expansion_config_sha256"] = curve_config_hash(expansion_path)
    summary["oracle_config_sha256"] = curve_config_hash(oracle_path)
    path = write_json(summary, output_dir(config) / "compare.json")
    return respond(result, summary, [path])
