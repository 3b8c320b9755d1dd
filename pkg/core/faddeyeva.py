"""Faddeyeva 函数 ω(z) = exp(-z²) erfc(-iz) 及其时间参数映射

分区计算：
- |z| <= 1 用幂级数 Σ (iz)^s / Γ(1 + s/2)
- Im z >= 0 且 |z| > 1 用 scipy.special.wofz
- Im z < 0 用反射公式 ω(z) = 2 exp(-z²) - ω(-z)，exp(-z²) 溢出时饱和并打标记
"""
from dataclasses import dataclass
import logging
import sys

import numpy as np
from scipy.special import rgamma, wofz

from core.errors import DomainError
from core.potential import PhysicalParams

logger = logging.getLogger(__name__)

SERIES_RADIUS = 1.0
SERIES_TERMS = 40
# 2 exp(-z²) 的可表示上限
_LOG_SATURATION = np.log(sys.float_info.max / 4.0)
_SATURATED_MODULUS = sys.float_info.max / 4.0

_RGAMMA_HALF = rgamma(1.0 + 0.5 * np.arange(SERIES_TERMS + 1))


def omega_series(u, s_max: int):
    """Σ_{s=0}^{s_max} u^s / Γ(1 + s/2)

    以 u = aκt^{1/2} 为变量时即 ω(iy) 的短时展开。
    """
    if s_max < 0:
        raise DomainError(f"s_max 不能为负: {s_max}")
    u = np.asarray(u, dtype=complex)
    coeffs = rgamma(1.0 + 0.5 * np.arange(s_max + 1)) if s_max > SERIES_TERMS else _RGAMMA_HALF[: s_max + 1]
    # Horner
    acc = np.full(u.shape, coeffs[-1], dtype=complex)
    for c in coeffs[-2::-1]:
        acc = acc * u + c
    return acc[()] if acc.ndim == 0 else acc


def faddeyeva_series(z, s_max: int):
    """ω(z) 的幂级数部分和 Σ_{s=0}^{s_max} (iz)^s / Γ(1 + s/2)

    约定：变量是 z 本身，s_max = 0 时为 1，s_max = 2 时为 1 + 2iz/√π - z²；
    以 u = iz 为变量的同一级数见 omega_series，那里 s_max = 2 给出 1 + 2u/√π + u²。
    """
    return omega_series(1j * np.asarray(z, dtype=complex), s_max)


def faddeyeva_with_overflow(z):
    """返回 (ω(z), overflow)，overflow 为 True 的位置已饱和到有限模长"""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty(z.shape, dtype=complex)
    overflow = np.zeros(z.shape, dtype=bool)

    small = np.abs(z) <= SERIES_RADIUS
    out[small] = faddeyeva_series(z[small], SERIES_TERMS)
    # ω(0) = 1 严格成立
    out[z == 0] = 1.0

    upper = ~small & (z.imag >= 0)
    out[upper] = wofz(z[upper])

    lower = ~small & (z.imag < 0)
    if np.any(lower):
        zl = z[lower]
        exponent = -zl * zl
        big = exponent.real > _LOG_SATURATION
        reflected = np.empty(zl.shape, dtype=complex)
        ok = ~big
        reflected[ok] = 2.0 * np.exp(exponent[ok]) - wofz(-zl[ok])
        # 饱和：保留 exp(-z²) 的相位
        reflected[big] = _SATURATED_MODULUS * np.exp(1j * exponent[big].imag)
        out[lower] = reflected
        overflow[lower] = big
        if np.any(big):
            logger.warning(f"Faddeyeva 反射分支溢出，{int(big.sum())} 个点已饱和")

    if scalar:
        return complex(out[0]), bool(overflow[0])
    return out, overflow


def faddeyeva(z):
    """ω(z)，溢出时返回饱和值（参见 faddeyeva_with_overflow）"""
    value, _ = faddeyeva_with_overflow(z)
    return value


@dataclass(frozen=True)
class TimeFactorArg:
    y_n: complex
    a_const: complex  # e^{-iπ/4}(ħ/2m)^{1/2}，单位 nm·fs^{-1/2}


def a_constant(params: PhysicalParams) -> complex:
    return np.exp(-0.25j * np.pi) * np.sqrt(params.hbar_over_2m)


def time_factor_arg(kappa, t: float, params: PhysicalParams) -> TimeFactorArg:
    """y_n = -a κ_n t^{1/2}"""
    if t < 0:
        raise DomainError(f"t 不能为负: {t}")
    a = a_constant(params)
    return TimeFactorArg(y_n=complex(-a * _kappa_value(kappa) * np.sqrt(t)), a_const=complex(a))


def omega_time_factor(kappa, t: float, params: PhysicalParams) -> complex:
    """ω(iy_n)；t = 0 时严格返回 1"""
    if t < 0:
        raise DomainError(f"t 不能为负: {t}")
    if t == 0:
        return 1.0 + 0.0j
    arg = time_factor_arg(kappa, t, params)
    return faddeyeva(1j * arg.y_n)


def omega_time_factors(kappas: np.ndarray, t: float, params: PhysicalParams):
    """对一组 κ 同时计算 ω(iy_n)，返回 (values, overflow)"""
    if t < 0:
        raise DomainError(f"t 不能为负: {t}")
    kappas = np.asarray(kappas, dtype=complex)
    if t == 0:
        return np.ones(kappas.shape, dtype=complex), np.zeros(kappas.shape, dtype=bool)
    # iy_n = -i a κ t^{1/2}
    z = -1j * a_constant(params) * kappas * np.sqrt(t)
    return faddeyeva_with_overflow(z)


def _kappa_value(kappa) -> complex:
    return complex(getattr(kappa, "value", kappa))


def selftest(n_lattice: int = 100, n_random: int = 1000, radius: float = 20.0, seed: int = 0) -> dict:
    """恒等式自检：单位圆内与级数的相对误差，以及反射/镜像恒等式残差"""
    rng = np.random.default_rng(seed)
    grid = np.linspace(-1.0, 1.0, n_lattice)
    lattice = (grid[:, None] + 1j * grid[None, :]).ravel()
    lattice = lattice[np.abs(lattice) <= 1.0]
    reference = faddeyeva_series(lattice, 60)
    series_err = np.max(np.abs(wofz(lattice) - reference) / np.abs(reference))

    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n_random))
    phi = rng.uniform(0.0, 2 * np.pi, n_random)
    z = r * np.exp(1j * phi)
    w_plus = faddeyeva(z)
    w_minus = faddeyeva(-z)
    twice = 2.0 * np.exp(-z * z)
    scale = np.maximum.reduce([np.abs(w_plus), np.abs(w_minus), np.abs(twice)])
    reflection = np.max(np.abs(w_plus + w_minus - twice) / scale)
    mirror = np.max(np.abs(faddeyeva(-np.conj(z)) - np.conj(w_plus)) / np.abs(w_plus))
    return {
        "series_max_rel_error": float(series_err),
        "reflection_max_residual": float(reflection),
        "mirror_max_residual": float(mirror),
    }
