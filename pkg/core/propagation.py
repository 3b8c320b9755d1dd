"""网格上的含时薛定谔方程传播（Crank–Nicolson），作为极点展开的独立对照

(1 + iΔt H/2ħ) ψ^{n+1} = (1 - iΔt H/2ħ) ψ^n，H 为三点差分哈密顿量，两端 Dirichlet。
"""
from dataclasses import dataclass, field
from enum import StrEnum
import logging
import math
import time
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from core.errors import InvalidSpecError
from core.initial_states import InitialState
from core.potential import PhysicalParams, PiecewisePotential, evaluate_potential

logger = logging.getLogger(__name__)

CONTAMINATION_THRESHOLD = 1e-6
EDGE_FRACTION = 0.05


class BoundaryKind(StrEnum):
    LARGE_BOX = "large_box"
    ABSORBING_LAYER = "absorbing_layer"


@dataclass(frozen=True)
class Boundary:
    kind: BoundaryKind = BoundaryKind.LARGE_BOX
    width: float = 0.0  # nm
    strength: float = 0.0  # eV


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    dx: float
    dt: float
    boundary: Boundary = field(default_factory=Boundary)

    def validate(self, length: float, params: PhysicalParams) -> None:
        if not (self.x_min <= 0.0 < length <= self.x_max):
            raise InvalidSpecError(f"网格 [{self.x_min}, {self.x_max}] 必须覆盖 [0, {length}]")
        if not (self.dx > 0 and self.dt > 0):
            raise InvalidSpecError(f"dx 与 dt 必须为正: dx={self.dx}, dt={self.dt}")
        limit = 0.5 * self.dx ** 2 / params.hbar_over_2m
        if self.dt > limit * (1 + 1e-12):
            raise InvalidSpecError(f"dt={self.dt} fs 超过精度上限 0.5·(2m/ħ)·dx² = {limit:.3e} fs")
        if self.boundary.kind is BoundaryKind.ABSORBING_LAYER:
            if not (self.boundary.width > 0 and self.boundary.strength > 0):
                raise InvalidSpecError("吸收层需要正的宽度和强度")
            if self.x_min + self.boundary.width > 0 or self.x_max - self.boundary.width < length:
                raise InvalidSpecError("吸收层不能伸入 [0, L]")


def default_grid(
    length: float,
    params: PhysicalParams,
    dx: float = 0.02,
    pad_factor: float = 40.0,
    boundary: Optional[Boundary] = None,
) -> GridSpec:
    """两侧各留 pad_factor·L 的空白，dt 取精度上限"""
    pad = pad_factor * length
    return GridSpec(
        x_min=-pad,
        x_max=length + pad,
        dx=dx,
        dt=0.5 * dx ** 2 / params.hbar_over_2m,
        boundary=boundary or Boundary(),
    )


@dataclass(frozen=True, eq=False)
class OracleResult:
    times: np.ndarray
    survival: np.ndarray
    norm_in_box: np.ndarray
    total_norm: np.ndarray
    contaminated: bool = False
    contamination_time: Optional[float] = None
    x_box: Optional[np.ndarray] = None
    # 每个记录时刻 [0, L] 内的 ψ
    snapshots: Optional[np.ndarray] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t_fs": self.times, "S_oracle": self.survival})


def propagate(
    p: PiecewisePotential,
    state: InitialState,
    grid: GridSpec,
    t_max: float,
    params: PhysicalParams,
    record_every: Optional[int] = None,
    keep_snapshots: bool = False,
) -> OracleResult:
    if not t_max > 0:
        raise InvalidSpecError(f"t_max 必须为正: {t_max}")
    length = p.total_length
    grid.validate(length, params)
    start = time.time()

    n_points = int(math.floor((grid.x_max - grid.x_min) / grid.dx)) + 1
    x = grid.x_min + grid.dx * np.arange(n_points)
    # 端点为 Dirichlet 边界，只演化内点
    x = x[1:-1]
    potential = evaluate_potential(p, x).astype(complex)
    if grid.boundary.kind is BoundaryKind.ABSORBING_LAYER:
        width = grid.boundary.width
        depth = np.maximum(grid.x_min + width - x, 0.0) + np.maximum(x - (grid.x_max - width), 0.0)
        potential = potential - 1j * grid.boundary.strength * (depth / width) ** 2

    kinetic = params.hbar2_over_2m / grid.dx ** 2
    factor = 0.5j * grid.dt / params.hbar
    main = 2.0 * kinetic + potential
    off = np.full(len(x) - 1, -kinetic, dtype=complex)
    lhs = diags([factor * off, 1.0 + factor * main, factor * off], [-1, 0, 1], format="csc")
    rhs = diags([-factor * off, 1.0 - factor * main, -factor * off], [-1, 0, 1], format="csr")
    solver = splu(lhs)

    psi0 = np.asarray(state.evaluate(x), dtype=complex)
    psi0 /= math.sqrt(float(np.sum(np.abs(psi0) ** 2)) * grid.dx)
    in_box = (x >= 0.0) & (x <= length)
    edge_width = EDGE_FRACTION * (grid.x_max - grid.x_min)
    edge = (x < grid.x_min + edge_width) | (x > grid.x_max - edge_width)
    if grid.boundary.kind is BoundaryKind.ABSORBING_LAYER:
        edge = (x < grid.x_min + grid.boundary.width) | (x > grid.x_max - grid.boundary.width)
    ref = np.conj(psi0[in_box])

    n_steps = int(math.ceil(t_max / grid.dt - 1e-9))
    record_every = record_every or max(1, n_steps // 200)
    times, survival, box_norm, total_norm, snapshots = [], [], [], [], []
    contamination_time = None

    def record(step: int, psi: np.ndarray):
        nonlocal contamination_time
        t = step * grid.dt
        times.append(t)
        survival.append(abs(np.sum(ref * psi[in_box]) * grid.dx) ** 2)
        box_norm.append(float(np.sum(np.abs(psi[in_box]) ** 2) * grid.dx))
        total_norm.append(float(np.sum(np.abs(psi) ** 2) * grid.dx))
        if keep_snapshots:
            snapshots.append(psi[in_box].copy())
        if contamination_time is None and grid.boundary.kind is BoundaryKind.LARGE_BOX:
            if np.sum(np.abs(psi[edge]) ** 2) * grid.dx > CONTAMINATION_THRESHOLD:
                contamination_time = t

    psi = psi0.copy()
    record(0, psi)
    for step in range(1, n_steps + 1):
        psi = solver.solve(rhs @ psi)
        if step % record_every == 0 or step == n_steps:
            record(step, psi)

    if contamination_time is not None:
        logger.warning(f"传播在 t={contamination_time:.3f} fs 时波包到达盒子边缘，之后的结果可能受反射污染")
    logger.info(f"网格传播完成: {len(x)} 个格点，{n_steps} 步，用时 {time.time() - start:.1f}s")
    return OracleResult(
        times=np.array(times),
        survival=np.array(survival),
        norm_in_box=np.array(box_norm),
        total_norm=np.array(total_norm),
        contaminated=contamination_time is not None,
        contamination_time=contamination_time,
        x_box=x[in_box],
        snapshots=np.array(snapshots) if keep_snapshots else None,
    )


def free_gaussian_survival(t, sigma: float, params: PhysicalParams):
    """自由高斯波包 S(t) = 1/sqrt(1 + D²)，D = (ħ/2m) t / (2σ²)"""
    d = params.hbar_over_2m * np.asarray(t, dtype=float) / (2.0 * sigma ** 2)
    return 1.0 / np.sqrt(1.0 + d * d)


@dataclass(frozen=True)
class ComparisonReport:
    max_deviation: float
    median_deviation: float
    points: int
    t_range: Tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "median_deviation": self.median_deviation,
            "points": self.points,
            "t_range_fs": list(self.t_range),
        }


def compare(
    times_a: Sequence[float], survival_a: Sequence[float], times_b: Sequence[float], survival_b: Sequence[float]
) -> ComparisonReport:
    """把曲线 b 线性插值到曲线 a 的时间点（只取公共区间）后比较"""
    ta, sa = np.asarray(times_a, float), np.asarray(survival_a, float)
    tb, sb = np.asarray(times_b, float), np.asarray(survival_b, float)
    mask = (ta >= tb.min()) & (ta <= tb.max())
    if not np.any(mask):
        raise InvalidSpecError("两条曲线没有公共时间区间")
    deviation = np.abs(sa[mask] - np.interp(ta[mask], tb, sb))
    return ComparisonReport(
        max_deviation=float(deviation.max()),
        median_deviation=float(np.median(deviation)),
        points=int(mask.sum()),
        t_range=(float(ta[mask].min()), float(ta[mask].max())),
    )
