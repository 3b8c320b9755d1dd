import sys

import pandas as pd

from api.models import RunConfig, StageResponse
from api.router.base import (
    LADDER_ARGS,
    POLE_ARGS,
    STATE_ARGS,
    CommandRouter,
    digest,
    fit_mode_for,
    ladder_for,
    load_coefficients,
    load_poles,
    output_dir,
    respond,
    time_grid,
    unwrap,
)
from core.artifacts import write_csv, write_json
from core.decay_service import DecayService

router = CommandRouter(tags=["dynamics"])

TIME_ARGS = [
    (("--t-max",), {"type": float, "help": "时间上限"}),
    (("--t-points",), {"type": int, "help": "时间点数"}),
    (("--t-unit",), {"choices": ["tau1", "fs"], "help": "--t-max 的单位"}),
]


@router.command("survival", "计算 S_N(t) 并写出 survival.csv", POLE_ARGS + STATE_ARGS + TIME_ARGS)
def survival_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    poles = load_poles(config, service, config.n_poles, args.threads)
    coeffs, _ = load_coefficients(config, service, poles)
    times = time_grid(config, poles.lifetime_tau1)
    result = unwrap(service.survival(coeffs, poles, config.build_params(), times, threads=args.threads or 1))
    path = write_csv(result["curve"].to_frame(), output_dir(config) / "survival.csv", digest(config))
    return respond(result, {"n_used": result["curve"].n_used, "overflow_points": result["overflow_points"]}, [path])


@router.command("classify", "三次和 Σ CC̄κ³ 在 N 阶梯上的判定", POLE_ARGS + STATE_ARGS + LADDER_ARGS)
def classify_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    poles = load_poles(config, service, config.n_poles, args.threads)
    coeffs, _ = load_coefficients(config, service, poles)
    result = unwrap(service.classify(coeffs, ladder_for(config, coeffs.pole_count)))
    diagnostic = result["diagnostic"]
    out = output_dir(config)
    table = write_csv(diagnostic.to_frame(), out / "classify.csv", digest(config))
    summary = {
        "verdict": diagnostic.verdict.to_dict(),
        "alpha": diagnostic.alpha,
        "confidence": diagnostic.confidence,
        "tail_exponent": diagnostic.tail_exponent,
        "predicted_exponent": result["predicted_exponent"],
    }
    path = write_json(summary, out / "classify.json")
    print(diagnostic.to_frame().to_string(index=False), file=sys.stderr)
    return respond(result, summary, [table, path])


@router.command("moments", "μ_N(j), j=0..8 在 N 阶梯上的取值与哈密顿量矩", POLE_ARGS + STATE_ARGS + LADDER_ARGS)
def moments_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    poles = load_poles(config, service, config.n_poles, args.threads)
    coeffs, _ = load_coefficients(config, service, poles)
    result = unwrap(service.moments(coeffs, config.build_params(), ladder_for(config, coeffs.pole_count)))
    out = output_dir(config)
    table = write_csv(result["table"].to_frame(), out / "moments.csv", digest(config))
    summary = {
        "hamiltonian": result["hamiltonian"].to_dict(),
        "mean_H_quadrature_eV": result["mean_H_quadrature"],
        "growth": result["growth"],
    }
    path = write_json(summary, out / "moments.json")
    return respond(result, summary, [table, path])


@router.command("zeno", "不同 σ 的高斯态：拟合 τ* 与 Zeno 时间对比", POLE_ARGS + LADDER_ARGS)
def zeno_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    poles = load_poles(config, service, config.n_poles, args.threads)
    well = config.potential.double_barrier.w_nm if config.potential.double_barrier else poles.potential.total_length / 3
    gaussian = config.model_copy(update={"state": config.state.model_copy(update={"kind": "gaussian"})})
    states = [gaussian.build_state(sigma_nm=fraction * well) for fraction in config.analysis.zeno_sigma_fractions]
    result = unwrap(
        service.zeno_table(
            states,
            poles,
            config.build_params(),
            ladder_for(config, poles.resonance_count),
            fit_mode_for(config),
            threads=args.threads or 1,
        )
    )
    path = write_csv(pd.DataFrame(result["rows"]), output_dir(config) / "zeno.csv", digest(config))
    return respond(result, {"rows": result["rows"]}, [path])
