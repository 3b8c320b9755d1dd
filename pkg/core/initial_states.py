"""初态与展开系数 C_n, C̄_n

两类初态：截断高斯脉冲与阱内正弦脉冲。系数全部用闭式积分计算：
高斯 × 指数 用 Faddeyeva 函数表示的误差函数，正弦 × 指数 用 expm1(z)/z。
"""
from dataclasses import dataclass
from enum import StrEnum
import logging
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.special import erfc

from core.errors import InvalidSpecError, ProvenanceError
from core.faddeyeva import faddeyeva
from core.potential import DoubleBarrierSpec, PiecewisePotential, build_double_barrier
from core.resonance import PoleSet, ResonantState, StateStack

logger = logging.getLogger(__name__)

CUTOFF_WARNING_MASS = 1e-3


class StateKind(StrEnum):
    GAUSSIAN = "gaussian"
    SINUSOIDAL = "sinusoidal"


@dataclass(frozen=True, eq=False)
class InitialState:
    kind: StateKind
    potential: PiecewisePotential
    normalization_constant: float
    support: Tuple[float, float]  # ψ 在此区间外恒为 0
    x0: Optional[float] = None
    sigma: Optional[float] = None
    j: Optional[int] = None
    cutoff_mass: float = 0.0
    cutoff_warning: bool = False

    @property
    def total_length(self) -> float:
        return self.potential.total_length

    @property
    def wavenumber(self) -> Optional[float]:
        """正弦态的 k_j = jπ/w"""
        if self.kind is not StateKind.SINUSOIDAL:
            return None
        lo, hi = self.support
        return self.j * np.pi / (hi - lo)

    def evaluate(self, x):
        xs = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (xs >= lo) & (xs <= hi)
        if self.kind is StateKind.GAUSSIAN:
            values = self.normalization_constant * np.exp(-((xs - self.x0) ** 2) / (4.0 * self.sigma ** 2))
        else:
            values = self.normalization_constant * np.sin(self.wavenumber * (xs - lo))
        values = np.where(inside, values, 0.0)
        return float(values) if values.ndim == 0 else values

    def derivative(self, x):
        xs = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (xs >= lo) & (xs <= hi)
        if self.kind is StateKind.GAUSSIAN:
            gauss = self.normalization_constant * np.exp(-((xs - self.x0) ** 2) / (4.0 * self.sigma ** 2))
            values = -(xs - self.x0) / (2.0 * self.sigma ** 2) * gauss
        else:
            k = self.wavenumber
            values = self.normalization_constant * k * np.cos(k * (xs - lo))
        values = np.where(inside, values, 0.0)
        return float(values) if values.ndim == 0 else values

    def describe(self) -> dict:
        if self.kind is StateKind.GAUSSIAN:
            return {"kind": self.kind.value, "x0_nm": self.x0, "sigma_nm": self.sigma}
        return {"kind": self.kind.value, "j": self.j, "window_nm": list(self.support)}


def gaussian_state(x0: float, sigma: float, p: PiecewisePotential) -> InitialState:
    """截断高斯 (1/2πσ²)^{1/4} e^{-(x-x0)²/4σ²}，在 [0, L] 上重新归一化"""
    length = p.total_length
    if not 0.0 < x0 < length:
        raise InvalidSpecError(f"x0 必须位于 (0, {length}) 内: {x0}")
    if not sigma > 0:
        raise InvalidSpecError(f"sigma 必须为正: {sigma}")
    scale = sigma * np.sqrt(2.0)
    cutoff = 0.5 * (erfc((length - x0) / scale) + erfc(x0 / scale))
    base = (2.0 * np.pi * sigma ** 2) ** -0.25
    warning = cutoff > CUTOFF_WARNING_MASS
    if warning:
        logger.warning(f"高斯态截断质量 {cutoff:.3e} 超过 {CUTOFF_WARNING_MASS}，已在 [0, L] 上重新归一化")
    return InitialState(
        kind=StateKind.GAUSSIAN,
        potential=p,
        normalization_constant=float(base / np.sqrt(1.0 - cutoff)),
        support=(0.0, length),
        x0=float(x0),
        sigma=float(sigma),
        cutoff_mass=float(cutoff),
        cutoff_warning=bool(warning),
    )


def sinusoidal_state(j: int, spec: DoubleBarrierSpec) -> InitialState:
    """阱内正弦 sqrt(2/w) sin(jπ(x-b)/w)，阱外为 0"""
    if int(j) != j or j < 1:
        raise InvalidSpecError(f"j 必须是正整数: {j}")
    b, w = spec.barrier_width, spec.well_width
    return InitialState(
        kind=StateKind.SINUSOIDAL,
        potential=build_double_barrier(spec),
        normalization_constant=float(np.sqrt(2.0 / w)),
        support=(b, b + w),
        j=int(j),
    )


class CoefficientEntry(NamedTuple):
    n: int
    c: complex
    c_bar: complex
    product: complex


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """按求和顺序（虚轴态，然后 n, -n 成对）排列的系数"""

    n: np.ndarray
    kappa: np.ndarray
    c: np.ndarray
    c_bar: np.ndarray
    source_state: InitialState
    poles: PoleSet

    @property
    def product(self) -> np.ndarray:
        return self.c * self.c_bar

    @property
    def pole_count(self) -> int:
        return int(np.max(np.abs(self.n))) if len(self.n) else 0

    @property
    def entries(self) -> List[CoefficientEntry]:
        return [
            CoefficientEntry(int(n), complex(c), complex(cb), complex(c * cb))
            for n, c, cb in zip(self.n, self.c, self.c_bar)
        ]

    def indices(self, n_max: Optional[int] = None) -> np.ndarray:
        """|n| <= n_max 的下标，按 |κ| 升序（同模时保持 n, -n 的原顺序）"""
        n_max = self.pole_count if n_max is None else n_max
        if n_max > self.pole_count:
            raise InvalidSpecError(f"N={n_max} 超过已计算的系数数目 {self.pole_count}")
        selected = np.nonzero(np.abs(self.n) <= n_max)[0]
        order = np.argsort(np.abs(self.kappa[selected]), kind="stable")
        return selected[order]

    def states(self, n_max: Optional[int] = None) -> List[ResonantState]:
        # 与 PoleSet.ordered 的排列一致
        ordered = [state for _, state in self.poles.ordered(self.pole_count)]
        return [ordered[i] for i in self.indices(n_max)]


def _phi(z):
    """(e^z - 1)/z，z = 0 处取 1"""
    z = np.asarray(z, dtype=complex)
    safe = np.where(z == 0, 1.0, z)
    return np.where(z == 0, 1.0 + 0j, np.expm1(safe) / safe)


def _exp_integral(p, s_lo: float, s_hi: float):
    """∫_{s_lo}^{s_hi} e^{ips} ds"""
    d = s_hi - s_lo
    return np.exp(1j * p * s_lo) * d * _phi(1j * p * d)


def _gaussian_exp_integral(lam, s0: float, sigma: float, d: float):
    """∫_0^d e^{-(s-s0)²/4σ²} e^{iλs} ds，用 Faddeyeva 函数的闭式"""
    lam = np.asarray(lam, dtype=complex)
    peak = 2.0 * np.exp(1j * lam * s0 - (sigma * lam) ** 2)

    def term(s_k: float):
        t = (s_k - s0) / (2.0 * sigma)
        z = 1j * t + sigma * lam
        upper = z.imag >= 0
        w = faddeyeva(np.where(upper, z, -z))
        edge = np.exp(1j * lam * s_k - t * t) * w
        return np.where(upper, edge, peak - edge)

    return sigma * np.sqrt(np.pi) * (term(0.0) - term(d))


def _exponential_amplitudes(stack: StateStack, j: int):
    """第 j 段上 u = P e^{iqs} + M e^{-iqs}"""
    q = np.sqrt(stack.q2[:, j])
    ratio = stack.du_lo[:, j] / (1j * q)
    return q, 0.5 * (stack.u_lo[:, j] + ratio), 0.5 * (stack.u_lo[:, j] - ratio)


def _gaussian_overlaps(state: InitialState, stack: StateStack) -> np.ndarray:
    total = np.zeros(stack.q2.shape[0], dtype=complex)
    for j, (x_lo, d) in enumerate(zip(stack.edges, stack.widths)):
        q, plus, minus = _exponential_amplitudes(stack, j)
        s0 = state.x0 - x_lo
        total += plus * _gaussian_exp_integral(q, s0, state.sigma, d)
        total += minus * _gaussian_exp_integral(-q, s0, state.sigma, d)
    return state.normalization_constant * total


def _sinusoidal_overlaps(state: InitialState, stack: StateStack) -> np.ndarray:
    b, b_end = state.support
    k = state.wavenumber
    total = np.zeros(stack.q2.shape[0], dtype=complex)
    for j, (x_lo, d) in enumerate(zip(stack.edges, stack.widths)):
        xa, xb = max(x_lo, b), min(x_lo + d, b_end)
        if xb <= xa:
            continue
        sa, sb = xa - x_lo, xb - x_lo
        q, plus, minus = _exponential_amplitudes(stack, j)
        phase = np.exp(1j * k * (x_lo - b))
        total += phase * (plus * _exp_integral(k + q, sa, sb) + minus * _exp_integral(k - q, sa, sb))
        total -= (plus * _exp_integral(q - k, sa, sb) + minus * _exp_integral(-k - q, sa, sb)) / phase
    return state.normalization_constant * total / 2j


def overlap(state: InitialState, stack: StateStack) -> np.ndarray:
    """∫_0^L ψ(x,0) u(x) dx，对 stack 中每个态"""
    if state.kind is StateKind.GAUSSIAN:
        return _gaussian_overlaps(state, stack)
    return _sinusoidal_overlaps(state, stack)


def expansion_coefficients(state: InitialState, poles: PoleSet, n_max: Optional[int] = None) -> CoefficientSet:
    """C_n = ∫ψ u_n，C̄_n = ∫ψ* u_n；ψ 为实函数，故 C̄_n = C_n，且 C_{-n} = C_n*"""
    if state.potential != poles.potential:
        raise ProvenanceError("初态与极点集合不是在同一个势场上构造的")
    n_max = poles.resonance_count if n_max is None else min(n_max, poles.resonance_count)
    n_list: List[int] = []
    kappa_list: List[complex] = []
    c_list: List[complex] = []

    if poles.imaginary:
        c_imag = overlap(state, StateStack.from_states(poles.imaginary))
        for st, c in zip(poles.imaginary, c_imag):
            n_list.append(0)
            kappa_list.append(st.kappa.value)
            c_list.append(c)

    if n_max > 0:
        resonances = poles.resonances[:n_max]
        c_res = overlap(state, StateStack.from_states(resonances))
        for i, (st, c) in enumerate(zip(resonances, c_res)):
            n_list.extend([i + 1, -(i + 1)])
            kappa_list.extend([st.kappa.value, -np.conj(st.kappa.value)])
            c_list.extend([c, np.conj(c)])

    c = np.array(c_list, dtype=complex)
    logger.info(f"展开系数计算完成: {state.kind.value} 态，N={n_max}，共 {len(c)} 项")
    return CoefficientSet(
        n=np.array(n_list, dtype=int),
        kappa=np.array(kappa_list, dtype=complex),
        c=c,
        c_bar=c.copy(),
        source_state=state,
        poles=poles,
    )
