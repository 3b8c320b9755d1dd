"""出射格林函数的复极点与共振态

Jost 型函数 f(k) 由 [0, L] 上的传递矩阵给出；在复 k 平面第四象限按竖条划分，
用幅角原理计数每个条带内的零点，再以牛顿迭代抛光。虚轴上 f(iγ) 为实数，
束缚态/反束缚态用变号扫描加 brentq 求出。
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
import logging
import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from config.solver import SolverSetting
from core.errors import DegeneratePoleError, DomainError, IncompleteSearchError, NotAPoleError
from core.potential import PhysicalParams, PiecewisePotential

logger = logging.getLogger(__name__)

# 相邻采样点之间允许的最大相位增量
_MAX_PHASE_STEP = np.pi / 4
# 相邻采样点之间允许的模长比
_MAX_LOG_RATIO = np.log(2.0)
_MAX_REFINE_DEPTH = 40
# 换基时代替 q = 0 的极小波数
_TINY_Q = 1e-150
# |Im k|·L 不超过该值时直接用传递矩阵元
_DIRECT_IM_LENGTH = 1.0


class PoleClass(StrEnum):
    RESONANCE = "resonance"
    ANTI_RESONANCE = "anti_resonance"
    BOUND = "bound"
    ANTIBOUND = "antibound"


@dataclass(frozen=True)
class ComplexMomentum:
    value: complex  # nm^-1
    pole_class: PoleClass


def classify_kappa(value: complex, tol: float = 1e-12) -> PoleClass:
    value = complex(value)
    if abs(value.real) <= tol:
        if value.imag > 0:
            return PoleClass.BOUND
        if value.imag < 0:
            return PoleClass.ANTIBOUND
        raise DomainError("k = 0 不是可分类的极点")
    if value.imag < 0:
        return PoleClass.RESONANCE if value.real > 0 else PoleClass.ANTI_RESONANCE
    raise DomainError(f"上半平面非虚轴点不可能是极点: {value}")


@dataclass(frozen=True)
class SearchBox:
    """第四象限的搜索矩形 [re_min, re_max] × [-im_depth, 0]"""

    re_max: float
    im_depth: float
    re_min: float = 0.0

    def __post_init__(self):
        if not (self.re_max > self.re_min >= 0.0 and self.im_depth > 0.0):
            raise DomainError(f"搜索矩形不合法: {self}")


# ---------------------------------------------------------------------------
# 传递矩阵与 Jost 函数
# ---------------------------------------------------------------------------

def _cos_sinc(q2, d: float):
    """返回 cos(qd) 与 sin(qd)/q，两者都是 q² 的偶函数，与分支无关"""
    q = np.sqrt(q2)
    return np.cos(q * d), d * np.sinc(q * d / np.pi)


def _segment_q2(kappa, height: float, params: PhysicalParams):
    return kappa * kappa - height / params.hbar2_over_2m


def _transfer_elements(p: PiecewisePotential, params: PhysicalParams, k):
    k = np.asarray(k, dtype=complex)
    m11 = np.ones(k.shape, dtype=complex)
    m12 = np.zeros(k.shape, dtype=complex)
    m21 = np.zeros(k.shape, dtype=complex)
    m22 = np.ones(k.shape, dtype=complex)
    for seg in p.segments:
        q2 = _segment_q2(k, seg.height, params)
        c, s = _cos_sinc(q2, seg.width)
        m11, m12, m21, m22 = (
            c * m11 + s * m21,
            c * m12 + s * m22,
            -q2 * s * m11 + c * m21,
            -q2 * s * m12 + c * m22,
        )
    return m11, m12, m21, m22


def transfer_matrix(p: PiecewisePotential, params: PhysicalParams, k: complex) -> np.ndarray:
    """把 x=0 处的 (u, u') 映到 x=L 处的 (u, u')"""
    m11, m12, m21, m22 = _transfer_elements(p, params, complex(k))
    return np.array([[m11, m12], [m21, m22]], dtype=complex)


def _jost_direct(p: PiecewisePotential, params: PhysicalParams, k):
    m11, m12, m21, m22 = _transfer_elements(p, params, k)
    f = m21 - 1j * k * (m11 + m22) - k * k * m12
    scale = np.abs(m21) + np.abs(k) * (np.abs(m11) + np.abs(m22)) + np.abs(k) ** 2 * np.abs(m12)
    return f, scale


def _jost_exponential(p: PiecewisePotential, params: PhysicalParams, k):
    """在指数基 A e^{iqs} + B e^{-iqs} 中逐段传播出射解

    x<0 处出射解为 e^{-ikx}，即 (A, B) = (0, 1)；界面处按 u、u' 连续换基，
    段内两个分量各乘各的指数因子，深复 k 处不出现 cos/sin 的大数相消。
    相邻两段高度相同时不换基，自由势下结果精确为 -2ik e^{-ikL}。
    """
    k = np.asarray(k, dtype=complex)
    a = np.zeros(k.shape, dtype=complex)
    b = np.ones(k.shape, dtype=complex)
    q_prev = k
    h_prev = 0.0
    for seg in p.segments:
        if seg.height != h_prev:
            q = np.sqrt(_segment_q2(k, seg.height, params))
            q = np.where(q == 0, _TINY_Q, q)
            r = q_prev / q
            a, b = 0.5 * ((1 + r) * a + (1 - r) * b), 0.5 * ((1 - r) * a + (1 + r) * b)
            q_prev, h_prev = q, seg.height
        a = a * np.exp(1j * q_prev * seg.width)
        b = b * np.exp(-1j * q_prev * seg.width)
    # f = u'(L) - ik u(L)
    f = 1j * q_prev * (a - b) - 1j * k * (a + b)
    scale = (np.abs(q_prev) + np.abs(k)) * (np.abs(a) + np.abs(b))
    return f, scale


def _jost_and_scale(p: PiecewisePotential, params: PhysicalParams, k):
    """浅处 (q 可能为 0) 用传递矩阵元，深处用指数基；两者是同一个函数"""
    k = np.asarray(k, dtype=complex)
    shallow = np.abs(k.imag) * p.total_length <= _DIRECT_IM_LENGTH
    if np.all(shallow):
        return _jost_direct(p, params, k)
    if not np.any(shallow):
        return _jost_exponential(p, params, k)
    f_direct, s_direct = _jost_direct(p, params, k)
    f_exp, s_exp = _jost_exponential(p, params, k)
    return np.where(shallow, f_direct, f_exp), np.where(shallow, s_direct, s_exp)


def outgoing_condition(p: PiecewisePotential, params: PhysicalParams, k):
    """f(k) = u'(L) - ik u(L)，其中 u(0)=1, u'(0)=-ik；零点即出射格林函数的极点"""
    f, _ = _jost_and_scale(p, params, k)
    return complex(f) if np.ndim(f) == 0 else f


# ---------------------------------------------------------------------------
# 幅角原理计数
# ---------------------------------------------------------------------------

class _ContourTooClose(Exception):
    pass


def _edge_phase(fun, z0: complex, z1: complex, h0: float) -> float:
    """沿线段 z0 -> z1 累积 arg f 的增量，自适应加密直到相邻相位增量足够小"""
    n = max(8, int(math.ceil(abs(z1 - z0) / h0)))
    zs = z0 + (z1 - z0) * np.linspace(0.0, 1.0, n + 1)
    fs = fun(zs)
    if np.any(fs == 0):
        raise _ContourTooClose()
    za, zb, fa, fb = zs[:-1], zs[1:], fs[:-1], fs[1:]
    total = 0.0
    for _ in range(_MAX_REFINE_DEPTH):
        ratio = fb / fa
        dphi = np.angle(ratio)
        bad = (np.abs(dphi) > _MAX_PHASE_STEP) | (np.abs(np.log(np.abs(ratio))) > _MAX_LOG_RATIO)
        total += float(np.sum(dphi[~bad]))
        if not np.any(bad):
            return total
        za, zb, fa, fb = za[bad], zb[bad], fa[bad], fb[bad]
        zm = 0.5 * (za + zb)
        fm = fun(zm)
        if np.any(fm == 0):
            raise _ContourTooClose()
        za, zb = np.concatenate([za, zm]), np.concatenate([zm, zb])
        fa, fb = np.concatenate([fa, fm]), np.concatenate([fm, fb])
    raise _ContourTooClose()


def _winding_number(fun, box: Tuple[float, float, float, float], h0: float) -> int:
    """矩形 (re_lo, re_hi, im_lo, im_hi) 边界上 f 的绕数，即内部零点个数"""
    re_lo, re_hi, im_lo, im_hi = box
    corners = [
        complex(re_lo, im_lo),
        complex(re_hi, im_lo),
        complex(re_hi, im_hi),
        complex(re_lo, im_hi),
    ]
    total = 0.0
    for i in range(4):
        total += _edge_phase(fun, corners[i], corners[(i + 1) % 4], h0)
    winding = total / (2 * np.pi)
    count = int(round(winding))
    if abs(winding - count) > 1e-3:
        raise _ContourTooClose()
    return count


# ---------------------------------------------------------------------------
# 共振态
# ---------------------------------------------------------------------------

def _integral_sin2_over_q2(q2, d: float):
    """∫_0^d sin²(qs)/q² ds"""
    q2 = np.asarray(q2, dtype=complex)
    sin2 = d * np.sinc(np.sqrt(q2) * 2 * d / np.pi)
    small = np.abs(q2) * d * d < 1e-4
    safe_q2 = np.where(small, 1.0, q2)
    direct = (d - sin2) / (2.0 * safe_q2)
    series = d ** 3 / 3 - q2 * d ** 5 / 15 + 2 * q2 ** 2 * d ** 7 / 315 - q2 ** 3 * d ** 9 / 2835
    return np.where(small, series, direct)


def _segment_square_integral(a, b, q2, d: float):
    """∫_0^d (a cos(qs) + b sin(qs)/q)² ds"""
    cos_int = 0.5 * (d + d * np.sinc(np.sqrt(q2) * 2 * d / np.pi))
    _, s = _cos_sinc(q2, d)
    return a * a * cos_int + b * b * _integral_sin2_over_q2(q2, d) + a * b * s * s


@dataclass(frozen=True, eq=False)
class ResonantState:
    """u_n(x) 在每段上写成 u_lo cos(q s) + du_lo sin(q s)/q，s = x - x_lo"""

    kappa: ComplexMomentum
    energy: complex  # eV
    edges: np.ndarray
    widths: np.ndarray
    q2: np.ndarray
    u_lo: np.ndarray
    du_lo: np.ndarray
    norm_applied: bool = True

    @property
    def total_length(self) -> float:
        return float(self.edges[-1] + self.widths[-1])

    @property
    def segment_coeffs(self) -> List[Tuple[complex, complex]]:
        """每段 (A_j, B_j)：u = A_j e^{ik_j s} + B_j e^{-ik_j s}，k_j 取主值平方根，s 为段内局部坐标"""
        q = np.sqrt(self.q2)
        half_ratio = np.where(q != 0, self.du_lo / (1j * np.where(q != 0, q, 1.0)), 0.0)
        return [(complex(0.5 * (u + r)), complex(0.5 * (u - r))) for u, r in zip(self.u_lo, half_ratio)]

    def boundary_values(self) -> Tuple[complex, complex, complex, complex]:
        """(u(0), u'(0), u(L), u'(L))"""
        c, s = _cos_sinc(self.q2[-1], self.widths[-1])
        u_end = self.u_lo[-1] * c + self.du_lo[-1] * s
        du_end = -self.u_lo[-1] * self.q2[-1] * s + self.du_lo[-1] * c
        return complex(self.u_lo[0]), complex(self.du_lo[0]), complex(u_end), complex(du_end)

    def normalization_integral(self) -> complex:
        """∫_0^L u² dx + i[u²(0) + u²(L)]/(2κ)"""
        u0, _, uL, _ = self.boundary_values()
        body = sum(
            _segment_square_integral(a, b, q2, d)
            for a, b, q2, d in zip(self.u_lo, self.du_lo, self.q2, self.widths)
        )
        return complex(body + 1j * (u0 * u0 + uL * uL) / (2.0 * self.kappa.value))

    def mirrored(self) -> "ResonantState":
        """κ -> -κ* 对应的态 u*(x)"""
        value = -np.conj(self.kappa.value)
        mirror_class = {
            PoleClass.RESONANCE: PoleClass.ANTI_RESONANCE,
            PoleClass.ANTI_RESONANCE: PoleClass.RESONANCE,
        }.get(self.kappa.pole_class, self.kappa.pole_class)
        return ResonantState(
            kappa=ComplexMomentum(complex(value), mirror_class),
            energy=complex(np.conj(self.energy)),
            edges=self.edges,
            widths=self.widths,
            q2=np.conj(self.q2),
            u_lo=np.conj(self.u_lo),
            du_lo=np.conj(self.du_lo),
            norm_applied=self.norm_applied,
        )


def build_resonant_state(
    p: PiecewisePotential,
    params: PhysicalParams,
    kappa,
    *,
    setting: Optional[SolverSetting] = None,
    normalize: bool = True,
) -> ResonantState:
    """由极点 κ 构造满足出射边界条件并归一化的共振态"""
    setting = setting or SolverSetting()
    value = complex(getattr(kappa, "value", kappa))
    f, scale = _jost_and_scale(p, params, value)
    if not abs(complex(f)) <= setting.accept_tol * float(scale):
        raise NotAPoleError(f"kappa={value} 不是极点: |f|={abs(complex(f)):.3e}, scale={float(scale):.3e}")
    pole_class = classify_kappa(value)

    n_seg = len(p.segments)
    q2 = np.empty(n_seg, dtype=complex)
    u_lo = np.empty(n_seg, dtype=complex)
    du_lo = np.empty(n_seg, dtype=complex)
    u, du = 1.0 + 0j, -1j * value
    for j, seg in enumerate(p.segments):
        q2[j] = _segment_q2(value, seg.height, params)
        u_lo[j], du_lo[j] = u, du
        c, s = _cos_sinc(q2[j], seg.width)
        u, du = c * u + s * du, -q2[j] * s * u + c * du

    state = ResonantState(
        kappa=ComplexMomentum(value, pole_class),
        energy=complex(params.hbar2_over_2m * value * value),
        edges=p.edges,
        widths=p.widths,
        q2=q2,
        u_lo=u_lo,
        du_lo=du_lo,
        norm_applied=False,
    )
    if not normalize:
        return state
    factor = 1.0 / np.sqrt(state.normalization_integral())
    return ResonantState(
        kappa=state.kappa,
        energy=state.energy,
        edges=state.edges,
        widths=state.widths,
        q2=q2,
        u_lo=u_lo * factor,
        du_lo=du_lo * factor,
        norm_applied=True,
    )


def _locate_segments(edges: np.ndarray, total_length: float, x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if np.any((x < -tol * total_length) | (x > total_length * (1 + tol))):
        raise DomainError(f"x 必须位于 [0, {total_length}] 内")
    idx = np.searchsorted(edges, x, side="right") - 1
    return np.clip(idx, 0, len(edges) - 1)


def evaluate_state(u: ResonantState, x):
    """u_n(x)，仅在 [0, L] 上有定义"""
    xs = np.asarray(x, dtype=float)
    idx = _locate_segments(u.edges, u.total_length, xs)
    s = xs - u.edges[idx]
    c, sn = _cos_sinc(u.q2[idx], s)
    values = u.u_lo[idx] * c + u.du_lo[idx] * sn
    return complex(values) if values.ndim == 0 else values


def evaluate_state_derivative(u: ResonantState, x):
    xs = np.asarray(x, dtype=float)
    idx = _locate_segments(u.edges, u.total_length, xs)
    s = xs - u.edges[idx]
    c, sn = _cos_sinc(u.q2[idx], s)
    values = -u.u_lo[idx] * u.q2[idx] * sn + u.du_lo[idx] * c
    return complex(values) if values.ndim == 0 else values


@dataclass(frozen=True, eq=False)
class StateStack:
    """一组共振态的段系数，形状 (n_states, n_segments)，用于向量化求值"""

    edges: np.ndarray
    widths: np.ndarray
    q2: np.ndarray
    u_lo: np.ndarray
    du_lo: np.ndarray

    @classmethod
    def from_states(cls, states: Sequence[ResonantState]) -> "StateStack":
        first = states[0]
        return cls(
            edges=first.edges,
            widths=first.widths,
            q2=np.array([s.q2 for s in states]),
            u_lo=np.array([s.u_lo for s in states]),
            du_lo=np.array([s.du_lo for s in states]),
        )

    def values(self, x) -> np.ndarray:
        """形状 (n_states, n_x) 的 u_n(x_i)"""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        total = float(self.edges[-1] + self.widths[-1])
        idx = _locate_segments(self.edges, total, xs)
        s = xs - self.edges[idx]
        c, sn = _cos_sinc(self.q2[:, idx], s[None, :])
        return self.u_lo[:, idx] * c + self.du_lo[:, idx] * sn


# ---------------------------------------------------------------------------
# 极点集合
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PoleSet:
    potential: PiecewisePotential
    params: PhysicalParams
    resonances: Tuple[ResonantState, ...]  # n = 1..N，按 Re κ 递增
    imaginary: Tuple[ResonantState, ...] = ()  # 束缚态与反束缚态
    search_box: Optional[SearchBox] = None

    @cached_property
    def anti_resonances(self) -> Tuple[ResonantState, ...]:
        """n = -1..-N，κ_{-n} = -κ_n*"""
        return tuple(state.mirrored() for state in self.resonances)

    @property
    def resonance_count(self) -> int:
        return len(self.resonances)

    @property
    def lifetime_tau1(self) -> Optional[float]:
        """τ_1 = ħ/Γ_1，Γ_1 = -2 Im E_1（fs）"""
        if not self.resonances:
            return None
        gamma1 = -2.0 * self.resonances[0].energy.imag
        return self.params.hbar / gamma1

    def ordered(self, n_max: Optional[int] = None) -> List[Tuple[int, ResonantState]]:
        """求和顺序：虚轴态 (n=0)，然后 n, -n 成对"""
        n_max = self.resonance_count if n_max is None else min(n_max, self.resonance_count)
        items: List[Tuple[int, ResonantState]] = [(0, state) for state in self.imaginary]
        for i in range(n_max):
            items.append((i + 1, self.resonances[i]))
            items.append((-(i + 1), self.anti_resonances[i]))
        return items

    def stack(self, n_max: Optional[int] = None) -> StateStack:
        return StateStack.from_states([state for _, state in self.ordered(n_max)])

    def kappas(self, n_max: Optional[int] = None) -> np.ndarray:
        return np.array([state.kappa.value for _, state in self.ordered(n_max)])

    def truncated(self, n_max: int) -> "PoleSet":
        return PoleSet(
            potential=self.potential,
            params=self.params,
            resonances=self.resonances[:n_max],
            imaginary=self.imaginary,
            search_box=self.search_box,
        )


class _PoleSearch:
    """单个势场上的极点搜索过程"""

    def __init__(self, p: PiecewisePotential, params: PhysicalParams, setting: SolverSetting):
        self.p = p
        self.params = params
        self.setting = setting
        self.length = p.total_length
        # 采样步长保证相邻点 |f| 变化不超过约 e^{1/4}
        self.h0 = 0.25 / self.length
        self.logger = logging.getLogger(__name__)

    def f(self, k):
        f, _ = _jost_and_scale(self.p, self.params, k)
        return f

    def count(self, box: Tuple[float, float, float, float]) -> int:
        try:
            return _winding_number(self.f, box, self.h0)
        except _ContourTooClose:
            # 换更细的初始步长再试一次
            try:
                return _winding_number(self.f, box, self.h0 / 16)
            except _ContourTooClose:
                raise IncompleteSearchError(f"零点过于靠近搜索边界: {box}", box=box)

    def newton(self, z0: complex) -> Tuple[complex, bool]:
        z = complex(z0)
        tol = self.setting.pole_tol
        for _ in range(self.setting.newton_max_iter):
            fz, scale = _jost_and_scale(self.p, self.params, z)
            fz, scale = complex(fz), float(scale)
            if abs(fz) <= tol * scale:
                return z, True
            h = 1e-7 * max(abs(z), 1e-3)
            deriv = (self.f(z + h) - self.f(z - h)) / (2 * h)
            if deriv == 0 or not np.isfinite(deriv):
                return z, False
            step = fz / complex(deriv)
            z = z - step
            if abs(step) <= 1e-15 * max(abs(z), 1.0):
                fz, scale = _jost_and_scale(self.p, self.params, z)
                return z, bool(abs(complex(fz)) <= 1e3 * tol * float(scale))
        return z, False

    def locate(self, box: Tuple[float, float, float, float], count: int, depth: int = 0) -> List[complex]:
        """在 box 内找出全部 count 个零点：每个子框至多一个零点时用牛顿法"""
        if count == 0:
            return []
        re_lo, re_hi, im_lo, im_hi = box
        if count == 1:
            root, ok = self.newton(complex(0.5 * (re_lo + re_hi), 0.5 * (im_lo + im_hi)))
            if ok and re_lo <= root.real < re_hi and im_lo <= root.imag < im_hi:
                return [root]
        size = max(re_hi - re_lo, im_hi - im_lo)
        if count >= 2 and size < self.setting.degeneracy_tol:
            raise DegeneratePoleError(f"子框 {box} 内有 {count} 个近简并零点", pair=box)
        if depth >= self.setting.max_subdivision:
            raise IncompleteSearchError(f"细分次数超限，子框 {box} 仍有 {count} 个零点未定位", box=box)
        if re_hi - re_lo >= im_hi - im_lo:
            mid = 0.5 * (re_lo + re_hi)
            halves = [(re_lo, mid, im_lo, im_hi), (mid, re_hi, im_lo, im_hi)]
        else:
            mid = 0.5 * (im_lo + im_hi)
            halves = [(re_lo, re_hi, im_lo, mid), (re_lo, re_hi, mid, im_hi)]
        counts = [self.count(h) for h in halves]
        if sum(counts) != count:
            raise IncompleteSearchError(
                f"子框计数 {counts} 与父框计数 {count} 不一致: {box}", box=box
            )
        roots: List[complex] = []
        for half, c in zip(halves, counts):
            roots.extend(self.locate(half, c, depth + 1))
        return roots

    def strip(self, box: Tuple[float, float, float, float], seeds: Sequence[complex]) -> List[complex]:
        count = self.count(box)
        if count == 0:
            return []
        re_lo, re_hi, im_lo, im_hi = box
        if seeds:
            found: List[complex] = []
            for seed in seeds:
                root, ok = self.newton(seed)
                if not ok or not (re_lo <= root.real < re_hi and im_lo <= root.imag < im_hi):
                    continue
                if all(abs(root - other) > 1e-11 * max(1.0, abs(root)) for other in found):
                    found.append(root)
            if len(found) == count:
                return found
            self.logger.debug(f"条带 {box} 种子找到 {len(found)}/{count} 个零点，改用细分")
        return self.locate(box, count)

    def imaginary_axis(self, depth: float) -> List[complex]:
        """f(iγ) 为实数，扫描变号点"""
        g = lambda gamma: float(np.real(self.f(1j * gamma)))
        eps = 1e-6 / self.length
        v_min = min(seg.height for seg in self.p.segments)
        ranges = [(-depth, -eps)]
        if v_min < 0:
            ranges.append((eps, math.sqrt(-v_min / self.params.hbar2_over_2m) * 1.05 + eps))
        roots: List[complex] = []
        step = 0.02 / self.length
        for lo, hi in ranges:
            grid = np.linspace(lo, hi, max(16, int(math.ceil((hi - lo) / step)) + 1))
            values = np.real(self.f(1j * grid))
            sign_change = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0)[0]
            for i in sign_change:
                gamma = brentq(g, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
                roots.append(1j * gamma)
        return roots


def _check_degeneracy(roots: Sequence[complex], tol: float) -> None:
    ordered = sorted(roots, key=lambda z: (z.real, z.imag))
    for i, z in enumerate(ordered):
        for other in ordered[i + 1:]:
            if other.real - z.real > tol:
                break
            if abs(other - z) < tol:
                raise DegeneratePoleError(f"极点 {z} 与 {other} 距离小于 {tol}", pair=(z, other))


def _fit_depth_constant(roots: Sequence[complex], length: float) -> float:
    """由已找到的极点拟合 -Im κ_n ≈ c ln(n+1)/L 中的 c"""
    n = np.arange(1, len(roots) + 1)
    ratios = -np.array([z.imag for z in roots]) * length / np.log(n + 1)
    return float(np.median(ratios[len(ratios) // 2:]))


def find_poles(
    p: PiecewisePotential,
    params: PhysicalParams,
    n_poles: int,
    search_box: Optional[SearchBox] = None,
    *,
    threads: Optional[int] = None,
    setting: Optional[SolverSetting] = None,
) -> PoleSet:
    """找出至少 n_poles 个第四象限共振极点（按 Re κ 排序），附带镜像反共振和虚轴上的态"""
    if n_poles < 1:
        raise DomainError(f"n_poles 必须 >= 1: {n_poles}")
    setting = setting or SolverSetting()
    threads = threads or setting.threads
    search = _PoleSearch(p, params, setting)
    length = p.total_length
    user_box = search_box is not None
    if search_box is None:
        search_box = SearchBox(re_max=(n_poles + 2) * np.pi / length * 1.1 + 1.0, im_depth=setting.base_im_depth)
    re_min = search_box.re_min if search_box.re_min > 0 else 1e-3 * np.pi / length
    strip_width = setting.strip_width_factor * np.pi / length
    start = time.time()

    roots: List[complex] = []
    c_fit: Optional[float] = None
    re_lo = re_min
    attempts = 0
    while True:
        edges = np.arange(re_lo, search_box.re_max, strip_width)
        edges = np.append(edges, search_box.re_max)
        strips = list(zip(edges[:-1], edges[1:]))
        # 先串行处理到足够多的极点以拟合种子常数，再并行
        pending = list(strips)
        while pending and c_fit is None:
            lo, hi = pending.pop(0)
            box = (lo, hi, -search_box.im_depth, 0.0)
            roots.extend(sorted(search.strip(box, []), key=lambda z: z.real))
            if len(roots) >= setting.seed_fit_poles:
                c_fit = _fit_depth_constant(roots, length)
                logger.info(f"种子常数拟合完成: c={c_fit:.4f}（基于前 {len(roots)} 个极点）")

        def run_strip(bounds):
            lo, hi = bounds
            depth = search_box.im_depth
            seeds: List[complex] = []
            if c_fit is not None:
                if not user_box:
                    n_hi = hi * length / np.pi
                    depth = max(depth, 1.5 * c_fit * math.log(n_hi + 2) / length)
                n_range = range(int(math.floor(lo * length / np.pi)), int(math.ceil(hi * length / np.pi)) + 1)
                seeds = [complex(n * np.pi / length, -c_fit * math.log(n + 1) / length) for n in n_range if n >= 1]
            return sorted(search.strip((lo, hi, -depth, 0.0), seeds), key=lambda z: z.real)

        if pending:
            with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
                for found in pool.map(run_strip, pending):
                    roots.extend(found)
        logger.info(f"极点搜索: Re κ <= {search_box.re_max:.3f} 内找到 {len(roots)} 个共振，用时 {time.time() - start:.1f}s")

        if len(roots) >= n_poles or not np.any(p.heights):
            break
        if user_box:
            raise IncompleteSearchError(
                f"搜索矩形内只有 {len(roots)} 个共振，少于要求的 {n_poles} 个",
                box=(search_box.re_min, search_box.re_max, -search_box.im_depth, 0.0),
            )
        attempts += 1
        if attempts > 3:
            raise IncompleteSearchError(f"扩大搜索范围 3 次后仍只有 {len(roots)} 个共振")
        re_lo = search_box.re_max
        search_box = SearchBox(re_max=search_box.re_max * 1.25, im_depth=search_box.im_depth)

    roots.sort(key=lambda z: z.real)
    roots = roots[:n_poles]
    imaginary_roots = search.imaginary_axis(search_box.im_depth)
    _check_degeneracy(roots + imaginary_roots, setting.degeneracy_tol)

    resonances = tuple(build_resonant_state(p, params, z, setting=setting) for z in roots)
    imaginary = tuple(build_resonant_state(p, params, z, setting=setting) for z in sorted(imaginary_roots, key=lambda z: -z.imag))
    if imaginary:
        logger.info(f"虚轴上找到 {len(imaginary)} 个束缚/反束缚态")
    return PoleSet(
        potential=p,
        params=params,
        resonances=resonances,
        imaginary=imaginary,
        search_box=search_box,
    )
