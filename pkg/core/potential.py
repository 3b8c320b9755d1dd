"""有限程分段常数势场与物理单位约定

内部单位固定为 (nm, fs, eV)。
"""
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from scipy import constants

from core.errors import InvalidSpecError

# hbar，单位 eV·fs
HBAR_EV_FS = constants.hbar / constants.e * 1e15
# hbar^2 / 2m_e，单位 eV·nm^2
HBAR2_OVER_2ME = constants.hbar ** 2 / (2.0 * constants.m_e) / constants.e * 1e18
GAAS_MASS_RATIO = 0.067


@dataclass(frozen=True)
class PhysicalParams:
    hbar: float  # eV·fs
    mass_ratio: float  # m / m_e
    hbar2_over_2m: float  # eV·nm^2

    def __post_init__(self):
        if not (self.hbar > 0 and self.mass_ratio > 0 and self.hbar2_over_2m > 0):
            raise InvalidSpecError("hbar、mass_ratio、hbar2_over_2m 必须为正")
        expected = HBAR2_OVER_2ME / self.mass_ratio
        if abs(self.hbar2_over_2m - expected) > 1e-12 * expected:
            raise InvalidSpecError(
                f"hbar2_over_2m={self.hbar2_over_2m} 与 hbar^2/(2 m_e mass_ratio)={expected} 不一致"
            )

    @property
    def hbar_over_2m(self) -> float:
        """hbar/2m，单位 nm^2/fs"""
        return self.hbar2_over_2m / self.hbar


def default_physical_params(mass_ratio: float = GAAS_MASS_RATIO) -> PhysicalParams:
    """默认物理参数：有效质量 0.067 m_e"""
    if mass_ratio <= 0:
        raise InvalidSpecError(f"mass_ratio 必须为正: {mass_ratio}")
    return PhysicalParams(
        hbar=HBAR_EV_FS,
        mass_ratio=mass_ratio,
        hbar2_over_2m=HBAR2_OVER_2ME / mass_ratio,
    )


@dataclass(frozen=True)
class Segment:
    x_lo: float
    x_hi: float
    height: float  # eV

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo


@dataclass(frozen=True)
class PiecewisePotential:
    """[0, L] 上首尾相接的常数段，区间外势能恒为 0"""

    segments: Tuple[Segment, ...]
    total_length: float = field(init=False)

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise InvalidSpecError("势场至少需要一个分段")
        if segments[0].x_lo != 0.0:
            raise InvalidSpecError(f"第一段必须从 x=0 开始，实际为 {segments[0].x_lo}")
        for i, seg in enumerate(segments):
            if not np.isfinite(seg.height):
                raise InvalidSpecError(f"第 {i} 段高度不是有限实数: {seg.height}")
            if not seg.x_hi > seg.x_lo:
                raise InvalidSpecError(f"第 {i} 段宽度必须为正: ({seg.x_lo}, {seg.x_hi})")
            if i > 0 and seg.x_lo != segments[i - 1].x_hi:
                raise InvalidSpecError(f"第 {i - 1} 段与第 {i} 段不相接")
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "total_length", segments[-1].x_hi)

    @property
    def edges(self) -> np.ndarray:
        """各段左端点"""
        return np.array([seg.x_lo for seg in self.segments])

    @property
    def heights(self) -> np.ndarray:
        return np.array([seg.height for seg in self.segments])

    @property
    def widths(self) -> np.ndarray:
        return np.array([seg.width for seg in self.segments])

    @property
    def interfaces(self) -> List[float]:
        """内部界面位置"""
        return [seg.x_hi for seg in self.segments[:-1]]

    def to_dict(self) -> dict:
        return {
            "segments": [
                {"x_lo": seg.x_lo, "x_hi": seg.x_hi, "height_eV": seg.height}
                for seg in self.segments
            ]
        }


@dataclass(frozen=True)
class DoubleBarrierSpec:
    barrier_width: float  # b, nm
    well_width: float  # w, nm
    barrier_height: float  # V, eV

    def __post_init__(self):
        if not self.barrier_width > 0 or not self.well_width > 0:
            raise InvalidSpecError(
                f"垒宽和阱宽必须为正: b={self.barrier_width}, w={self.well_width}"
            )
        if not self.barrier_height >= 0:
            raise InvalidSpecError(f"垒高不能为负: V={self.barrier_height}")

    @property
    def total_length(self) -> float:
        return 2 * self.barrier_width + self.well_width


REFERENCE_DOUBLE_BARRIER = DoubleBarrierSpec(barrier_width=5.0, well_width=5.0, barrier_height=0.23)


def build_double_barrier(spec: DoubleBarrierSpec) -> PiecewisePotential:
    """双势垒：[0,b]@V, [b,b+w]@0, [b+w,2b+w]@V"""
    b, w, v = spec.barrier_width, spec.well_width, spec.barrier_height
    return PiecewisePotential(
        segments=(
            Segment(0.0, b, v),
            Segment(b, b + w, 0.0),
            Segment(b + w, 2 * b + w, v),
        )
    )


def build_piecewise(segments: Sequence[Tuple[float, float, float]]) -> PiecewisePotential:
    return PiecewisePotential(segments=tuple(Segment(float(lo), float(hi), float(h)) for lo, hi, h in segments))


def evaluate_potential(p: PiecewisePotential, x):
    """返回 x 处的势能（eV）

    界面点归右侧分段，x = L 归最后一段；区间外为 0。支持标量和数组。
    """
    xs = np.asarray(x, dtype=float)
    idx = np.searchsorted(p.edges, xs, side="right") - 1
    idx = np.clip(idx, 0, len(p.segments) - 1)
    values = np.where((xs < 0.0) | (xs > p.total_length), 0.0, p.heights[idx])
    if values.ndim == 0:
        return float(values)
    return values
