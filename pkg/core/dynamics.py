"""衰变动力学：生存振幅、波函数、矩序列与哈密顿量矩

所有对极点的求和都在 |n| <= N 的对称区间上进行，按 |κ_n| 升序做补偿求和。
A_N(t) = Σ C_n C̄_n ω(iy_n) / μ_N(0)，因此 A_N(0) = 1 严格成立。
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.special import rgamma

from config.analysis import ClassifierSetting
from core.errors import DomainError, InconclusiveConvergenceError, InvalidLadderError, ProvenanceError
from core.faddeyeva import a_constant, omega_time_factors
from core.initial_states import CoefficientSet, InitialState
from core.potential import PhysicalParams, PiecewisePotential
from core.resonance import PoleSet, StateStack
from core.summation import compensated_sum, compensated_sum_rows

logger = logging.getLogger(__name__)

SUM_RULE_TOL = 1e-3


def validate_ladder(ladder: Sequence[int], min_rungs: int, geometric: bool = False) -> List[int]:
    rungs = [int(n) for n in ladder]
    if len(rungs) < min_rungs:
        raise InvalidLadderError(f"N 阶梯至少需要 {min_rungs} 级，实际 {len(rungs)} 级")
    if any(n < 1 for n in rungs) or any(b <= a for a, b in zip(rungs, rungs[1:])):
        raise InvalidLadderError(f"N 阶梯必须是严格递增的正整数: {rungs}")
    if geometric:
        ratios = np.array(rungs[1:]) / np.array(rungs[:-1])
        # 整数取整带来的偏差
        if np.max(ratios) / np.min(ratios) > 1.25:
            raise InvalidLadderError(f"N 阶梯不是几何级数: {rungs}")
    return rungs


def geometric_ladder(n_min: int, n_max: int, rungs: int = 5) -> List[int]:
    """[n_min, n_max] 上 rungs 级互不相同的取整几何阶梯，放不下时报错而不是合并"""
    if n_min < 1 or n_max <= n_min:
        raise InvalidLadderError(f"阶梯端点不合法: [{n_min}, {n_max}]")
    values = np.unique(np.round(np.geomspace(n_min, n_max, rungs)).astype(int))
    if len(values) < rungs:
        raise InvalidLadderError(f"N={n_max} 太小，[{n_min}, {n_max}] 内放不下 {rungs} 级不同的整数阶梯")
    return [int(v) for v in values]


def _check_provenance(coeffs: CoefficientSet, poles: PoleSet) -> None:
    if coeffs.poles is not poles and coeffs.poles.potential != poles.potential:
        raise ProvenanceError("系数集合与极点集合不是在同一个势场上构造的")


# ---------------------------------------------------------------------------
# 矩序列
# ---------------------------------------------------------------------------

def mu_moment(coeffs: CoefficientSet, j: int, n_max: Optional[int] = None) -> complex:
    """μ_N(j) = Σ_{|n|<=N} C_n C̄_n κ_n^j"""
    if j < 0:
        raise DomainError(f"j 不能为负: {j}")
    idx = coeffs.indices(n_max)
    return compensated_sum(coeffs.product[idx] * coeffs.kappa[idx] ** j)


@dataclass(frozen=True)
class MomentTable:
    ladder: List[int]
    mu: Dict[int, np.ndarray]

    def growth(self, j: int) -> float:
        """log|μ_N(j)| 对 log N 的斜率"""
        slope, _ = np.polyfit(np.log(self.ladder), np.log(np.abs(self.mu[j])), 1)
        return float(slope)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for j in sorted(self.mu):
            for n, value in zip(self.ladder, self.mu[j]):
                rows.append({"j": j, "N": n, "re_mu": value.real, "im_mu": value.imag, "abs_mu": abs(value)})
        return pd.DataFrame(rows)


def moment_table(coeffs: CoefficientSet, js: Iterable[int], ladder: Sequence[int]) -> MomentTable:
    rungs = validate_ladder(ladder, 2)
    mu = {int(j): np.array([mu_moment(coeffs, int(j), n) for n in rungs]) for j in js}
    return MomentTable(ladder=rungs, mu=mu)


@dataclass(frozen=True)
class TailDecay:
    """按 |n| 配对后的项 d_m = Σ_{|n|=m} C_n C̄_n κ_n^j 的衰减"""

    exponent: float  # |d_m| ~ m^{-exponent}
    mass: float  # Σ_{N_0 < m <= N_max} |d_m|


def tail_decay(coeffs: CoefficientSet, j: int, ladder: Sequence[int]) -> TailDecay:
    """在阶梯相邻两级之间取 |d_m| 的平均，对几何中点做 log-log 拟合"""
    rungs = validate_ladder(ladder, 2)
    idx = coeffs.indices(rungs[-1])
    m = np.abs(coeffs.n[idx]).astype(int)
    terms = coeffs.product[idx] * coeffs.kappa[idx] ** j
    keep = m >= 1
    size = rungs[-1] + 1
    paired = np.bincount(m[keep], weights=terms[keep].real, minlength=size) + 1j * np.bincount(
        m[keep], weights=terms[keep].imag, minlength=size
    )
    magnitude = np.abs(paired)
    centers, means = [], []
    for lo, hi in zip(rungs, rungs[1:]):
        block = magnitude[lo + 1 : hi + 1]
        if np.any(block > 0):
            centers.append(math.sqrt((lo + 1) * hi))
            means.append(float(block.mean()))
    if len(means) < 2:
        exponent = math.inf
    else:
        slope, _ = np.polyfit(np.log(centers), np.log(means), 1)
        exponent = -float(slope)
    return TailDecay(exponent=exponent, mass=float(magnitude[rungs[0] + 1 :].sum()))


@dataclass(frozen=True)
class SumRuleReport:
    n_used: int
    closure_deviation: float  # |½μ_N(0) - 1|
    first_residual: float  # |Σ CC̄κ| / Σ|CC̄κ|
    inverse_residual: float  # |Σ CC̄/κ| / Σ|CC̄/κ|
    tol: float = SUM_RULE_TOL

    @property
    def converged(self) -> bool:
        return max(self.closure_deviation, self.first_residual, self.inverse_residual) < self.tol

    def to_dict(self) -> dict:
        return {
            "n_used": self.n_used,
            "closure_deviation": self.closure_deviation,
            "first_residual": self.first_residual,
            "inverse_residual": self.inverse_residual,
            "converged": self.converged,
        }


def sum_rule_report(coeffs: CoefficientSet, n_max: Optional[int] = None, tol: float = SUM_RULE_TOL) -> SumRuleReport:
    idx = coeffs.indices(n_max)
    prod, kappa = coeffs.product[idx], coeffs.kappa[idx]

    def normalized(terms: np.ndarray) -> float:
        scale = math.fsum(np.abs(terms))
        return abs(compensated_sum(terms)) / scale if scale > 0 else 0.0

    return SumRuleReport(
        n_used=coeffs.pole_count if n_max is None else int(n_max),
        closure_deviation=abs(0.5 * compensated_sum(prod) - 1.0),
        first_residual=normalized(prod * kappa),
        inverse_residual=normalized(prod / kappa),
        tol=tol,
    )


# ---------------------------------------------------------------------------
# 哈密顿量矩与 Zeno 时间
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentValue:
    """有限值或发散（带增长指数）的标记值"""

    value: Optional[float] = None
    growth_exponent: Optional[float] = None

    @classmethod
    def finite(cls, value: float) -> "MomentValue":
        return cls(value=float(value))

    @classmethod
    def divergent(cls, growth_exponent: float) -> "MomentValue":
        return cls(growth_exponent=float(growth_exponent))

    @property
    def is_finite(self) -> bool:
        return self.value is not None

    def to_dict(self) -> dict:
        if self.is_finite:
            return {"kind": "finite", "value": self.value}
        return {"kind": "divergent", "growth_exponent": self.growth_exponent}


@dataclass(frozen=True)
class HamiltonianMoments:
    mean_H: float  # eV
    mean_H_imag: float
    mean_H2: MomentValue  # eV²
    delta_E: MomentValue  # eV
    zeno_time: MomentValue  # fs
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean_H_eV": self.mean_H,
            "mean_H_imag_eV": self.mean_H_imag,
            "mean_H2_eV2": self.mean_H2.to_dict(),
            "delta_E_eV": self.delta_E.to_dict(),
            "zeno_time_fs": self.zeno_time.to_dict(),
            "diagnostics": self.diagnostics,
        }


def _plateau_end(changes: np.ndarray, tol: float) -> Optional[int]:
    """第一段连续两次相对变化都小于 tol 的平台，返回平台最后一级的下标"""
    for i in range(len(changes) - 1):
        if changes[i] < tol and changes[i + 1] < tol:
            end = i + 1
            while end + 1 < len(changes) and changes[end + 1] < tol:
                end += 1
            return end + 1
    return None


def hamiltonian_moments(
    coeffs: CoefficientSet,
    params: PhysicalParams,
    ladder: Sequence[int],
    setting: Optional[ClassifierSetting] = None,
) -> HamiltonianMoments:
    """⟨H^j⟩ = (ħ²/2m)^j μ_N(2j)/μ_N(0)；μ_N(0) -> 2 时即 ½(ħ²/2m)^j μ_N(2j)"""
    setting = setting or ClassifierSetting()
    rungs = validate_ladder(ladder, 3)
    n_top = rungs[-1]
    mu0 = mu_moment(coeffs, 0, n_top)
    mean_h = params.hbar2_over_2m * mu_moment(coeffs, 2, n_top) / mu0
    if abs(mean_h.imag) > 1e-8 * abs(mean_h.real):
        logger.warning(f"<H> 的虚部 {mean_h.imag:.3e} eV 超出截断误差预期")

    mu4 = np.array([mu_moment(coeffs, 4, n) / mu_moment(coeffs, 0, n) for n in rungs])
    log_n, log_mu = np.log(rungs), np.log(np.abs(mu4))
    (alpha, beta), res, *_ = np.polyfit(log_n, log_mu, 1, full=True)
    residual = float(np.sqrt(res[0] / len(rungs))) if len(res) else 0.0
    changes = np.abs(np.diff(mu4)) / np.abs(mu4[1:])
    tail = tail_decay(coeffs, 4, rungs)
    diagnostics = {
        "alpha": float(alpha),
        "residual": residual,
        "plateau_change": float(changes[-1]),
        "tail_exponent": tail.exponent,
    }

    plateau = _plateau_end(changes, setting.plateau_tol)
    if plateau is not None:
        if plateau < len(rungs) - 1:
            logger.warning(
                f"μ_N(4) 在 N={rungs[plateau]} 处已稳定，之后偏离 {changes[plateau:].max():.1%}，取平台值"
            )
        diagnostics["plateau_N"] = float(rungs[plateau])
        mean_h2 = MomentValue.finite(params.hbar2_over_2m ** 2 * mu4[plateau].real)
    elif alpha > setting.diverge_alpha and residual < setting.diverge_residual:
        mean_h2 = MomentValue.divergent(alpha)
    elif tail.exponent <= setting.tail_exponent:
        mean_h2 = MomentValue.divergent(max(float(alpha), 1.0 - tail.exponent))
    else:
        raise InconclusiveConvergenceError(
            f"μ_N(4) 在阶梯 {rungs} 上既不收敛也不明确发散", diagnostics=diagnostics
        )

    if mean_h2.is_finite:
        variance = mean_h2.value - mean_h.real ** 2
        if variance < 0:
            raise InconclusiveConvergenceError(f"能量方差为负: {variance}", diagnostics=diagnostics)
        delta_e = MomentValue.finite(math.sqrt(variance))
        zeno = MomentValue.finite(params.hbar / delta_e.value)
    else:
        delta_e = MomentValue.divergent(mean_h2.growth_exponent / 2)
        zeno = MomentValue.divergent(mean_h2.growth_exponent / 2)
    return HamiltonianMoments(
        mean_H=float(mean_h.real),
        mean_H_imag=float(mean_h.imag),
        mean_H2=mean_h2,
        delta_E=delta_e,
        zeno_time=zeno,
        diagnostics=diagnostics,
    )


def mean_energy_quadrature(state: InitialState, potential: PiecewisePotential, params: PhysicalParams) -> float:
    """<H> = (ħ²/2m)∫|ψ'|² + ∫V|ψ|²，逐段自适应积分"""
    lo, hi = state.support
    kinetic, potential_part = 0.0, 0.0
    for seg in potential.segments:
        a, b = max(seg.x_lo, lo), min(seg.x_hi, hi)
        if b <= a:
            continue
        kinetic += quad(lambda x: state.derivative(x) ** 2, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        if seg.height != 0.0:
            potential_part += seg.height * quad(
                lambda x: state.evaluate(x) ** 2, a, b, epsabs=1e-14, epsrel=1e-12, limit=200
            )[0]
    return params.hbar2_over_2m * kinetic + potential_part


# ---------------------------------------------------------------------------
# 生存振幅
# ---------------------------------------------------------------------------

def _amplitude(coeffs: CoefficientSet, idx: np.ndarray, params: PhysicalParams, t: float):
    if t < 0:
        raise DomainError(f"t 不能为负: {t}")
    if t == 0:
        return 1.0 + 0.0j, False
    prod = coeffs.product[idx]
    omega, overflow = omega_time_factors(coeffs.kappa[idx], t, params)
    return compensated_sum(prod * omega) / compensated_sum(prod), bool(np.any(overflow))


class Amplitude(complex):
    """A_N(t) 的值；saturated 为 True 时至少一个 ω 因子已饱和，数值不可信"""

    saturated: bool

    def __new__(cls, value: complex, saturated: bool = False):
        obj = super().__new__(cls, value)
        obj.saturated = bool(saturated)
        return obj


def survival_amplitude(
    coeffs: CoefficientSet,
    poles: PoleSet,
    params: PhysicalParams,
    t: float,
    n_max: Optional[int] = None,
) -> Amplitude:
    _check_provenance(coeffs, poles)
    value, saturated = _amplitude(coeffs, coeffs.indices(n_max), params, t)
    if saturated:
        logger.warning(f"t={t:g} fs 处 Faddeyeva 因子已饱和")
    return Amplitude(value, saturated)


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    times: np.ndarray  # fs
    amplitude: np.ndarray
    n_used: int
    tau1: Optional[float] = None
    overflow: Optional[np.ndarray] = None

    @property
    def probability(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def to_frame(self) -> pd.DataFrame:
        probability = self.probability
        with np.errstate(divide="ignore"):
            ln_s = np.log(probability)
        return pd.DataFrame(
            {
                "t_fs": self.times,
                "t_over_tau1": self.times / self.tau1 if self.tau1 else np.full(len(self.times), np.nan),
                "re_A": self.amplitude.real,
                "im_A": self.amplitude.imag,
                "S": probability,
                "ln_S": ln_s,
                "saturated": self.overflow if self.overflow is not None else np.zeros(len(self.times), dtype=bool),
            }
        )


def survival_curve(
    coeffs: CoefficientSet,
    poles: PoleSet,
    params: PhysicalParams,
    times: Sequence[float],
    n_max: Optional[int] = None,
    threads: int = 1,
) -> SurvivalCurve:
    _check_provenance(coeffs, poles)
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise DomainError("时间网格不能包含负值")
    if np.any(np.diff(times) < 0):
        raise DomainError("时间网格必须升序")
    idx = coeffs.indices(n_max)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: _amplitude(coeffs, idx, params, float(t)), times))
    else:
        results = [_amplitude(coeffs, idx, params, float(t)) for t in times]
    amplitude = np.array([r[0] for r in results], dtype=complex)
    overflow = np.array([r[1] for r in results], dtype=bool)
    if np.any(overflow):
        logger.warning(f"{int(overflow.sum())} 个时间点的 Faddeyeva 因子已饱和")
    return SurvivalCurve(
        times=times,
        amplitude=amplitude,
        n_used=coeffs.pole_count if n_max is None else int(n_max),
        tau1=poles.lifetime_tau1,
        overflow=overflow,
    )


def wavefunction(
    coeffs: CoefficientSet,
    poles: PoleSet,
    params: PhysicalParams,
    x,
    t: float,
    n_max: Optional[int] = None,
):
    """ψ_N(x,t) = ½ Σ C_n u_n(x) ω(iy_n)，仅在 [0, L] 上有效"""
    _check_provenance(coeffs, poles)
    if t < 0:
        raise DomainError(f"t 不能为负: {t}")
    xs = np.asarray(x, dtype=float)
    length = poles.potential.total_length
    if np.any((xs < 0) | (xs > length)):
        raise DomainError(f"x 必须位于 [0, {length}] 内")
    idx = coeffs.indices(n_max)
    stack = StateStack.from_states(coeffs.states(n_max))
    omega, _ = omega_time_factors(coeffs.kappa[idx], t, params)
    weights = coeffs.c[idx] * omega
    u = stack.values(xs)
    values = 0.5 * compensated_sum_rows((weights[:, None] * u).T)
    return complex(values[0]) if xs.ndim == 0 else values


# ---------------------------------------------------------------------------
# 导数与短时展开
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SecondDerivative:
    """Ä_N(t) 的三个通道：ω 项、t^{-1/2} 项（三次和）、t^{-3/2} 项（一阶和规则余项）"""

    term_omega: complex
    term_sqrt: complex
    term_remainder: complex

    @property
    def total(self) -> complex:
        return self.term_omega + self.term_sqrt + self.term_remainder


def second_derivative_amplitude(
    coeffs: CoefficientSet,
    poles: PoleSet,
    params: PhysicalParams,
    t: float,
    n_max: Optional[int] = None,
) -> SecondDerivative:
    _check_provenance(coeffs, poles)
    if not t > 0:
        raise DomainError(f"二阶导数只在 t > 0 处有定义: {t}")
    idx = coeffs.indices(n_max)
    prod, kappa = coeffs.product[idx], coeffs.kappa[idx]
    mu0 = compensated_sum(prod)
    a = a_constant(params)
    omega, _ = omega_time_factors(kappa, t, params)
    sqrt_pi = math.sqrt(math.pi)
    return SecondDerivative(
        term_omega=a ** 4 * compensated_sum(prod * kappa ** 4 * omega) / mu0,
        term_sqrt=a ** 3 / sqrt_pi * compensated_sum(prod * kappa ** 3) / math.sqrt(t) / mu0,
        term_remainder=-a / (2 * sqrt_pi) * compensated_sum(prod * kappa) * t ** -1.5 / mu0,
    )


def short_time_coefficients(
    coeffs: CoefficientSet, params: PhysicalParams, s_max: int, n_max: Optional[int] = None
) -> np.ndarray:
    """A_N(t) = Σ_s c_s t^{s/2}，c_s = a^s μ_N(s) / (Γ(1+s/2) μ_N(0))"""
    if s_max < 0:
        raise DomainError(f"s_max 不能为负: {s_max}")
    a = a_constant(params)
    mu0 = mu_moment(coeffs, 0, n_max)
    return np.array(
        [a ** s * mu_moment(coeffs, s, n_max) * rgamma(1 + s / 2) / mu0 for s in range(s_max + 1)]
    )


def short_time_series(
    coeffs: CoefficientSet, params: PhysicalParams, t, s_max: int, n_max: Optional[int] = None
):
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0):
        raise DomainError("t 不能为负")
    c = short_time_coefficients(coeffs, params, s_max, n_max)
    root = np.sqrt(ts)
    values = sum(c_s * root ** s for s, c_s in enumerate(c))
    return complex(values) if ts.ndim == 0 else values


def first_derivative_at_zero(
    coeffs: CoefficientSet,
    poles: PoleSet,
    params: PhysicalParams,
    n_max: Optional[int] = None,
    steps: Optional[Sequence[float]] = None,
    degree: int = 4,
) -> complex:
    """单边差商 (A(h)-1)/h 按 h^{1/2} 的多项式外推到 h -> 0⁺，返回 t⁰ 系数"""
    _check_provenance(coeffs, poles)
    steps = np.geomspace(1e-7, 1e-5, 16) if steps is None else np.asarray(steps, dtype=float)
    idx = coeffs.indices(n_max)
    values = np.array([_amplitude(coeffs, idx, params, float(h))[0] for h in steps])
    r = np.sqrt(steps)
    # (A(h)-1)/√h = c1 + c2 r + c3 r² + ...，c2 即 Ȧ(0⁺)
    scaled = (values - 1.0) / r
    real = np.polynomial.Polynomial.fit(r, scaled.real, degree).convert().coef
    imag = np.polynomial.Polynomial.fit(r, scaled.imag, degree).convert().coef
    return complex(real[1], imag[1])
