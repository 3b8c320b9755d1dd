from pathlib import Path

import numpy as np
import pandas as pd

from api.models import RunConfig, StageResponse
from api.router.base import CommandRouter, digest, fit_mode_for, output_dir, respond, unwrap
from core.artifacts import curve_config_hash, read_curve_csv, write_csv, write_json
from core.decay_service import DecayService
from core.errors import InvalidSpecError

router = CommandRouter(tags=["fitting"])

FIT_ARGS = [
    (("--input",), {"required": True, "help": "曲线 CSV（列 t 或 t_fs, S[, sigma]）"}),
    (("--mode",), {"choices": ["two-point", "lsq", "free"], "help": "拟合方式"}),
    (("--window",), {"type": float, "nargs": 2, "metavar": ("T_LO", "T_HI"), "help": "拟合窗口 (fs)"}),
    (("--points",), {"type": float, "nargs": 2, "metavar": ("T_A", "T_B"), "help": "two-point 模式的两个时间点 (fs)"}),
]

EXPERIMENT_ARGS = [
    (("--input",), {"help": "实验数据 CSV（列 t, S[, sigma]）；不给则生成合成数据"}),
    (("--theta",), {"type": float, "nargs": "+", "default": [1.5, 2.0], "help": "候选指数"}),
    (("--synthetic-theta",), {"type": float, "default": 2.0, "help": "合成数据的指数"}),
    (("--synthetic-tau",), {"type": float, "default": 12.55, "help": "合成数据的 τ*"}),
    (("--synthetic-points",), {"type": int, "default": 20, "help": "合成数据点数"}),
    (("--noise",), {"type": float, "default": 0.01, "help": "合成数据的相对噪声（相对 1 - S）"}),
]


@router.command("fit", "拟合短时律 S(t) ≈ 1 - (t/τ*)^ϑ", FIT_ARGS)
def fit_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    curve = read_curve_csv(Path(args.input))
    result = unwrap(service.fit(curve, fit_mode_for(config)))
    fit = result["fit"]
    summary = fit.to_dict()
    summary["source"] = str(args.input)
    summary["source_config_sha256"] = curve_config_hash(Path(args.input))
    path = write_json(summary, output_dir(config) / "fit.json")
    return respond(
        result,
        {"theta": fit.theta, "tau_star": fit.tau_star, "residual": fit.residual, "ambiguous": fit.ambiguous},
        [path],
    )


def synthetic_experiment(
    theta: float, tau_star: float, points: int, noise: float, seed: int
) -> pd.DataFrame:
    """从 1 - (t/τ*)^ϑ 采样并加高斯噪声，噪声标准差为 noise·(1 - S)"""
    if points < 2 or tau_star <= 0 or noise < 0:
        raise InvalidSpecError(f"合成数据参数无效: points={points}, tau={tau_star}, noise={noise}", stage="experiment")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.05 * tau_star, 0.5 * tau_star, points)
    drop = (t / tau_star) ** theta
    sigma = noise * drop
    s = 1.0 - drop + rng.normal(0.0, 1.0, points) * sigma
    frame = pd.DataFrame({"t": t, "S": s})
    if noise > 0:
        frame["sigma"] = sigma
    return frame


@router.command("experiment", "实验数据（或合成数据）在候选 ϑ 下的加权拟合", EXPERIMENT_ARGS)
def experiment_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    out = output_dir(config)
    artifacts = []
    if args.input:
        data = read_curve_csv(Path(args.input))
        source = str(args.input)
    else:
        data = synthetic_experiment(
            args.synthetic_theta, args.synthetic_tau, args.synthetic_points, args.noise, args.seed
        )
        artifacts.append(write_csv(data, out / "experiment_data.csv", digest(config)))
        source = f"synthetic(theta={args.synthetic_theta:g}, tau={args.synthetic_tau:g}, seed={args.seed})"

    result = unwrap(service.fit_experiment(data, args.theta))
    fits = result["fits"]
    table = pd.DataFrame(
        [{"theta": f.theta, "tau_star": f.tau_star, "residual": f.residual} for f in fits]
    )
    artifacts.append(write_csv(table, out / "experiment_fits.csv", digest(config)))
    summary = {
        "source": source,
        "fits": [f.to_dict() for f in fits],
        "preferred_theta": result["preferred_theta"],
    }
    artifacts.append(write_json(summary, out / "experiment.json"))
    return respond(result, summary, artifacts)
