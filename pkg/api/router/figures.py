import numpy as np
import pandas as pd

from api.models import RunConfig, StageResponse
from api.router.base import (
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
from api.router.dynamics import TIME_ARGS
from core.artifacts import write_csv, write_json
from core.decay_service import DecayService
from core.dynamics import sum_rule_report
from core.short_time import short_time_model

router = CommandRouter(tags=["figures"])

FIGURE_ARGS = [
    (("--n-reference",), {"type": int, "help": "对照曲线的 N，0 表示不算"}),
]


@router.command("figure1", "ln S_N(t) 曲线（N 与对照 N）、拟合曲线与判定摘要", POLE_ARGS + STATE_ARGS + TIME_ARGS + FIGURE_ARGS)
def figure1_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    """一次算到 max(N, N_ref) 个极点，两条曲线取前 N / N_ref 项"""
    n = config.n_poles
    n_ref = args.n_reference if args.n_reference is not None else config.n_poles_reference
    params = config.build_params()
    threads = args.threads or 1

    poles = load_poles(config, service, max(n, n_ref), args.threads)
    coeffs, _ = load_coefficients(config, service, poles)
    n = min(n, coeffs.pole_count)
    tau1 = poles.lifetime_tau1
    times = time_grid(config, tau1)

    curve = unwrap(service.survival(coeffs, poles, params, times, n, threads))["curve"]
    frame = curve.to_frame()[["t_fs", "t_over_tau1", "ln_S"]].rename(columns={"ln_S": f"ln_S_N{n}"})
    if n_ref > n:
        reference = unwrap(service.survival(coeffs, poles, params, times, n_ref, threads))["curve"]
        frame[f"ln_S_N{reference.n_used}"] = reference.to_frame()["ln_S"]
        convergence = float(np.max(np.abs(reference.probability - curve.probability)))
    else:
        convergence = None

    summary = {"n_poles": n, "n_reference": n_ref if n_ref > n else None, "tau1_fs": tau1, "max_abs_dS": convergence}

    fit_result = service.short_time_fit(coeffs, poles, params, fit_mode_for(config), n, threads)
    if fit_result["success"]:
        fit = fit_result["fit"]
        summary.update({"theta": fit.theta, "tau_star": fit.tau_star, "fit": fit.to_dict()})
        with np.errstate(invalid="ignore", divide="ignore"):
            frame["ln_S_model"] = np.log(short_time_model(frame["t_fs"].to_numpy(), fit.tau_star, fit.theta))
    else:
        summary.update({"theta": None, "tau_star": None, "fit_error": fit_result["message"]})

    classify_result = service.classify(coeffs, ladder_for(config, n))
    if classify_result["success"]:
        diagnostic = classify_result["diagnostic"]
        summary["verdict"] = diagnostic.verdict.to_dict()
        summary["predicted_exponent"] = classify_result["predicted_exponent"]
    else:
        summary["verdict"] = None
        summary["classify_error"] = classify_result["message"]

    sum_rules = sum_rule_report(coeffs, n)
    summary["sum_rules"] = sum_rules.to_dict()
    summary["unconverged"] = not sum_rules.converged

    out = output_dir(config)
    curves = write_csv(frame, out / "figure1_curves.csv", digest(config))
    path = write_json(summary, out / "figure1_summary.json")
    message = f"figure1: theta={summary['theta']}, tau*={summary['tau_star']}"
    if summary["unconverged"]:
        message += "（求和规则未收敛）"
    return respond({"success": True, "message": message, "stage": "figure1"}, summary, [curves, path])
