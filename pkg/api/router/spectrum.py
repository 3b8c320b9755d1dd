import pandas as pd

from api.models import RunConfig, StageResponse
from api.router.base import (
    POLE_ARGS,
    STATE_ARGS,
    CommandRouter,
    digest,
    load_coefficients,
    load_poles,
    output_dir,
    respond,
)
from core.artifacts import write_csv, write_json
from core.decay_service import DecayService
from core.faddeyeva import selftest

router = CommandRouter(tags=["spectrum"])


@router.command("poles", "求共振极点并写出 poles.csv", POLE_ARGS)
def poles_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    """极点表：虚轴态 (n=0)、共振 n 与反共振 -n"""
    poles = load_poles(config, service, config.n_poles, args.threads)
    rows = []
    for n, state in poles.ordered():
        rows.append(
            {
                "n": n,
                "re_kappa_nm^-1": state.kappa.value.real,
                "im_kappa_nm^-1": state.kappa.value.imag,
                "re_E_eV": state.energy.real,
                "im_E_eV": state.energy.imag,
                "class": state.kappa.pole_class.value,
            }
        )
    path = write_csv(pd.DataFrame(rows), output_dir(config) / "poles.csv", digest(config))
    return respond(
        {"success": True, "message": f"找到 {poles.resonance_count} 个共振极点", "stage": "poles"},
        {"resonances": poles.resonance_count, "imaginary": len(poles.imaginary), "tau1_fs": poles.lifetime_tau1},
        [path],
    )


@router.command("coeffs", "计算展开系数并写出 coeffs.csv", POLE_ARGS + STATE_ARGS)
def coeffs_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    poles = load_poles(config, service, config.n_poles, args.threads)
    coeffs, result = load_coefficients(config, service, poles)
    product = coeffs.product
    frame = pd.DataFrame(
        {
            "n": coeffs.n,
            "re_C": coeffs.c.real,
            "im_C": coeffs.c.imag,
            "re_Cbar": coeffs.c_bar.real,
            "im_Cbar": coeffs.c_bar.imag,
            "re_product": product.real,
            "im_product": product.imag,
        }
    )
    path = write_csv(frame, output_dir(config) / "coeffs.csv", digest(config))
    return respond(
        result,
        {"sum_rules": result["sum_rules"].to_dict(), "cutoff_warning": result["cutoff_warning"]},
        [path],
    )


@router.command("faddeyeva-selftest", "Faddeyeva 函数恒等式自检")
def faddeyeva_selftest_command(args, config: RunConfig, service: DecayService) -> StageResponse:
    residuals = selftest(seed=args.seed)
    path = write_json(residuals, output_dir(config) / "faddeyeva_selftest.json")
    return respond(
        {"success": True, "message": "Faddeyeva 自检完成", "stage": "faddeyeva-selftest"},
        residuals,
        [path],
    )
