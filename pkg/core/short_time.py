"""短时行为：三次和 Σ C_n C̄_n κ_n³ 的判定与 S(t) ≈ 1 - (t/τ*)^ϑ 拟合"""
from dataclasses import dataclass, field
from enum import StrEnum
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import curve_fit

from config.analysis import ClassifierSetting, FitSetting
from core.dynamics import TailDecay, mu_moment, tail_decay, validate_ladder
from core.errors import (
    InconclusiveVerdictError,
    InsufficientDataError,
    InvalidLadderError,
    WindowTooEarlyError,
)
from core.initial_states import CoefficientSet

logger = logging.getLogger(__name__)

CANDIDATE_THETAS = (1.5, 2.0)


class VerdictKind(StrEnum):
    VANISHES = "vanishes"
    CONVERGES = "converges"
    DIVERGES = "diverges"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    limit: Optional[complex] = None
    growth_exponent: Optional[float] = None

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value}
        if self.limit is not None:
            data["limit"] = [self.limit.real, self.limit.imag]
        if self.growth_exponent is not None:
            data["growth_exponent"] = self.growth_exponent
        return data


@dataclass(frozen=True)
class CubicSumDiagnostic:
    partial_sums: List[Tuple[int, complex]]
    verdict: Verdict
    confidence: float  # log-log 拟合残差
    alpha: float
    scale: float  # |κ_1|³
    tail_exponent: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "N": [n for n, _ in self.partial_sums],
                "re_P": [p.real for _, p in self.partial_sums],
                "im_P": [p.imag for _, p in self.partial_sums],
                "abs_P": [abs(p) for _, p in self.partial_sums],
            }
        )


def decide_verdict(
    ladder: Sequence[int],
    partial_sums: Sequence[complex],
    scale: float,
    setting: Optional[ClassifierSetting] = None,
    tail: Optional[TailDecay] = None,
) -> Tuple[Verdict, float, float]:
    """对 log|P_N| = α log N + β 拟合并按阈值给出判定，返回 (verdict, alpha, residual)

    tail 给出配对项的衰减指数；项衰减不快于 N^{-tail_exponent} 时部分和只是在振荡，判为发散。
    """
    setting = setting or ClassifierSetting()
    values = np.asarray(partial_sums, dtype=complex)
    magnitude = np.maximum(np.abs(values), np.finfo(float).tiny)
    (alpha, _), res, *_ = np.polyfit(np.log(ladder), np.log(magnitude), 1, full=True)
    alpha = float(alpha)
    residual = float(np.sqrt(res[0] / len(ladder))) if len(res) else 0.0
    top = abs(values[-1])
    plateau = abs(values[-1] - values[-2]) / top if top > 0 else np.inf

    if alpha > setting.diverge_alpha and residual < setting.diverge_residual:
        return Verdict(VerdictKind.DIVERGES, growth_exponent=alpha), alpha, residual
    # 停在求和舍入底上的平台与趋零同样视为零
    if top < setting.vanish_scale * scale and alpha <= setting.diverge_alpha:
        return Verdict(VerdictKind.VANISHES), alpha, residual
    if tail is not None and tail.mass > setting.vanish_scale * scale and tail.exponent <= setting.tail_exponent:
        growth = max(alpha, 1.0 - tail.exponent)
        return Verdict(VerdictKind.DIVERGES, growth_exponent=growth), alpha, residual
    if abs(alpha) <= setting.diverge_alpha and plateau < setting.plateau_tol:
        return Verdict(VerdictKind.CONVERGES, limit=complex(values[-1])), alpha, residual
    return Verdict(VerdictKind.INCONCLUSIVE), alpha, residual


def classify_cubic_sum(
    coeffs: CoefficientSet,
    ladder: Sequence[int],
    setting: Optional[ClassifierSetting] = None,
) -> CubicSumDiagnostic:
    rungs = validate_ladder(ladder, 5, geometric=True)
    if rungs[-1] > coeffs.pole_count:
        raise InvalidLadderError(f"阶梯上限 {rungs[-1]} 超过已有系数数目 {coeffs.pole_count}")
    partial = [mu_moment(coeffs, 3, n) for n in rungs]
    first = coeffs.kappa[coeffs.n == 1]
    scale = float(abs(first[0]) ** 3) if len(first) else 1.0
    tail = tail_decay(coeffs, 3, rungs)
    verdict, alpha, residual = decide_verdict(rungs, partial, scale, setting, tail)
    logger.info(
        f"三次和判定: {verdict.kind.value}（alpha={alpha:.3f}, residual={residual:.3f}, 尾部指数={tail.exponent:.3f}）"
    )
    return CubicSumDiagnostic(
        partial_sums=list(zip(rungs, partial)),
        verdict=verdict,
        confidence=residual,
        alpha=alpha,
        scale=scale,
        tail_exponent=tail.exponent,
    )


def predict_exponent(diag: CubicSumDiagnostic) -> float:
    kind = diag.verdict.kind
    if kind is VerdictKind.VANISHES:
        return 2.0
    if kind in (VerdictKind.CONVERGES, VerdictKind.DIVERGES):
        return 1.5
    raise InconclusiveVerdictError("三次和判定不明确，无法预测短时指数", stage="classify")


# ---------------------------------------------------------------------------
# 拟合
# ---------------------------------------------------------------------------

class FitMethod(StrEnum):
    TWO_POINT = "two_point"
    LEAST_SQUARES = "least_squares"
    FREE_EXPONENT = "free_exponent"


@dataclass(frozen=True)
class TwoPoint:
    t_a: float
    t_b: float


@dataclass(frozen=True)
class LeastSquares:
    window: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class FreeExponent:
    window: Optional[Tuple[float, float]] = None


FitMode = Union[TwoPoint, LeastSquares, FreeExponent]


@dataclass(frozen=True)
class FitResult:
    theta: float
    tau_star: float
    residual: float
    method: FitMethod
    window: Tuple[float, float]
    ambiguous: bool = False
    free_theta: Optional[float] = None
    # 各候选 ϑ 的 (τ*, residual)
    candidates: Dict[float, Tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "tau_star": self.tau_star,
            "residual": self.residual,
            "method": self.method.value,
            "window": list(self.window),
            "ambiguous": self.ambiguous,
            "free_theta": self.free_theta,
            "candidates": {str(k): {"tau_star": v[0], "residual": v[1]} for k, v in self.candidates.items()},
        }


def short_time_model(t, tau_star: float, theta: float):
    return 1.0 - (np.asarray(t, dtype=float) / tau_star) ** theta


def fit_residual(times, survival, theta: float, tau_star: float, window: Tuple[float, float]) -> float:
    """窗口内 Σ (S - 1 + (t/τ*)^ϑ)²"""
    times, survival = np.asarray(times, dtype=float), np.asarray(survival, dtype=float)
    mask = (times >= window[0]) & (times <= window[1])
    return float(np.sum((survival[mask] - short_time_model(times[mask], tau_star, theta)) ** 2))


def _curve_arrays(curve) -> Tuple[np.ndarray, np.ndarray, Optional[float]]:
    if isinstance(curve, pd.DataFrame):
        return curve["t"].to_numpy(float), curve["S"].to_numpy(float), None
    if hasattr(curve, "probability"):
        return np.asarray(curve.times, float), np.asarray(curve.probability, float), getattr(curve, "tau1", None)
    times, survival = curve
    return np.asarray(times, float), np.asarray(survival, float), None


def default_window(
    times: np.ndarray,
    survival: np.ndarray,
    tau1: Optional[float],
    setting: FitSetting,
) -> Tuple[float, float]:
    """短时窗口：上限取 window_tau1·τ1（无 τ1 时取最后一点），再截到 1 - S 首次超过 max_drop 之前"""
    positive = times > 0
    if not np.any(positive):
        raise InsufficientDataError("曲线上没有 t > 0 的点")
    t, drop = times[positive], 1.0 - survival[positive]
    t_hi = min(setting.window_tau1 * tau1, t[-1]) if tau1 else float(t[-1])
    beyond = np.nonzero(drop > setting.max_drop)[0]
    if len(beyond):
        if beyond[0] == 0:
            raise InsufficientDataError(
                f"最早的数据点 t={t[0]:g} 处 1 - S 已超过 {setting.max_drop:g}，曲线不含短时区", stage="fit"
            )
        t_hi = min(t_hi, float(t[beyond[0] - 1]))
    t_lo = setting.window_span * t_hi
    # 下限越过噪声底
    resolved = np.nonzero((drop >= setting.noise_floor) & (t <= t_hi))[0]
    if len(resolved):
        t_lo = max(t_lo, float(t[resolved[0]]))
    return float(t_lo), float(t_hi)


def fit_window_grid(tau1: float, setting: Optional[FitSetting] = None) -> np.ndarray:
    """默认拟合窗口上的对数均匀时间点"""
    setting = setting or FitSetting()
    t_max = setting.window_tau1 * tau1
    return np.geomspace(setting.window_span * t_max, t_max, setting.points)


def _window_points(times, survival, window, setting: FitSetting):
    mask = (times >= window[0]) & (times <= window[1]) & (times > 0)
    t, s = times[mask], survival[mask]
    if len(t) < 2:
        raise InsufficientDataError(f"窗口 {window} 内不足两个数据点")
    if np.any(1.0 - s < setting.noise_floor):
        raise WindowTooEarlyError(f"窗口 {window} 内 1 - S 低于噪声底 {setting.noise_floor}", stage="fit")
    return t, s


def _pick(candidates: Dict[float, Tuple[float, float]], ratio: float) -> Tuple[float, bool]:
    (theta_a, (_, res_a)), (theta_b, (_, res_b)) = sorted(candidates.items(), key=lambda kv: kv[1][1])
    ambiguous = abs(res_b - res_a) <= ratio * max(res_a, res_b)
    return theta_a, bool(ambiguous)


def fit_short_time(curve, mode: Optional[FitMode] = None, setting: Optional[FitSetting] = None) -> FitResult:
    """在 ϑ ∈ {3/2, 2} 两个假设（或自由指数）下拟合 S(t) ≈ 1 - (t/τ*)^ϑ"""
    setting = setting or FitSetting()
    mode = mode or LeastSquares()
    times, survival, tau1 = _curve_arrays(curve)

    if isinstance(mode, TwoPoint):
        picks = [int(np.argmin(np.abs(times - t))) for t in (mode.t_a, mode.t_b)]
        t_pts, s_pts = times[picks], survival[picks]
        if t_pts[0] == t_pts[1] or np.any(t_pts <= 0):
            raise InsufficientDataError(f"两点法需要两个不同的正时间点: {mode}")
        if np.any(1.0 - s_pts < setting.noise_floor):
            raise WindowTooEarlyError("两点处 1 - S 低于噪声底", stage="fit")
        window = (float(min(t_pts)), float(max(t_pts)))
        drop = 1.0 - s_pts
        candidates = {}
        for theta in CANDIDATE_THETAS:
            tau = float(np.exp(np.mean(np.log(t_pts) - np.log(drop) / theta)))
            candidates[theta] = (tau, fit_residual(times, survival, theta, tau, window))
        free_theta = float(np.log(drop[1] / drop[0]) / np.log(t_pts[1] / t_pts[0]))
        theta, ambiguous = _pick(candidates, setting.ambiguous_ratio)
        return FitResult(
            theta=theta,
            tau_star=candidates[theta][0],
            residual=candidates[theta][1],
            method=FitMethod.TWO_POINT,
            window=window,
            ambiguous=ambiguous,
            free_theta=free_theta,
            candidates=candidates,
        )

    window = mode.window or default_window(times, survival, tau1, setting)
    t, s = _window_points(times, survival, window, setting)
    log_t, log_drop = np.log(t), np.log(1.0 - s)
    slope, intercept = np.polyfit(log_t, log_drop, 1)
    free_theta = float(slope)

    if isinstance(mode, FreeExponent):
        tau = float(np.exp(-intercept / slope))
        return FitResult(
            theta=free_theta,
            tau_star=tau,
            residual=fit_residual(times, survival, free_theta, tau, window),
            method=FitMethod.FREE_EXPONENT,
            window=window,
            free_theta=free_theta,
        )

    # 固定 ϑ 时 log(1 - S) = ϑ(log t - log τ*) 的最小二乘解是闭式的；按对数残差选 ϑ
    candidates = {}
    log_residuals = {}
    for theta in CANDIDATE_THETAS:
        log_tau = float(np.mean(log_t - log_drop / theta))
        tau = float(np.exp(log_tau))
        candidates[theta] = (tau, fit_residual(times, survival, theta, tau, window))
        log_residuals[theta] = (tau, float(np.sum((log_drop - theta * (log_t - log_tau)) ** 2)))
    theta, ambiguous = _pick(log_residuals, setting.ambiguous_ratio)
    if ambiguous:
        logger.warning(f"两种短时假设的对数残差相差不到 {setting.ambiguous_ratio:.0%}: {log_residuals}")
    return FitResult(
        theta=theta,
        tau_star=candidates[theta][0],
        residual=candidates[theta][1],
        method=FitMethod.LEAST_SQUARES,
        window=window,
        ambiguous=ambiguous,
        free_theta=free_theta,
        candidates=candidates,
    )


def fit_experimental(
    data,
    theta_candidates: Sequence[float] = CANDIDATE_THETAS,
) -> List[FitResult]:
    """带误差加权的最小二乘，每个候选 ϑ 给出一个 τ*；单位由调用方负责"""
    if isinstance(data, pd.DataFrame):
        frame = data
    else:
        rows = [tuple(row) for row in data]
        columns = ["t", "S", "sigma"][: len(rows[0])] if rows else ["t", "S"]
        frame = pd.DataFrame(rows, columns=columns)
    frame = frame[frame["t"] > 0]
    if len(frame) < 2:
        raise InsufficientDataError(f"t > 0 的数据点只有 {len(frame)} 个，至少需要 2 个", stage="experiment")
    t = frame["t"].to_numpy(float)
    s = frame["S"].to_numpy(float)
    sigma = frame["sigma"].to_numpy(float) if "sigma" in frame and frame["sigma"].notna().all() else None
    drop = np.clip(1.0 - s, np.finfo(float).tiny, None)
    window = (float(t.min()), float(t.max()))

    results = []
    for theta in theta_candidates:
        p0 = float(np.exp(np.mean(np.log(t) - np.log(drop) / theta)))
        popt, _ = curve_fit(
            lambda tt, tau: short_time_model(tt, tau, theta),
            t,
            s,
            p0=[p0],
            sigma=sigma,
            absolute_sigma=sigma is not None,
            maxfev=10000,
        )
        tau = float(abs(popt[0]))
        results.append(
            FitResult(
                theta=float(theta),
                tau_star=tau,
                residual=fit_residual(t, s, theta, tau, window),
                method=FitMethod.LEAST_SQUARES,
                window=window,
            )
        )
    return results
