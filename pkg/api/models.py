from pydantic import BaseModel, Field, model_validator
from typing import List, Optional, Dict, Any, Literal, Tuple
from datetime import datetime

from core.errors import InvalidSpecError
from core.initial_states import InitialState, gaussian_state, sinusoidal_state
from core.potential import (
    DoubleBarrierSpec,
    PhysicalParams,
    PiecewisePotential,
    build_double_barrier,
    build_piecewise,
    default_physical_params,
)
from core.resonance import SearchBox


class DoubleBarrierModel(BaseModel):
    b_nm: float = Field(5.0, gt=0)
    w_nm: float = Field(5.0, gt=0)
    V_eV: float = Field(0.23, ge=0)

    def to_spec(self) -> DoubleBarrierSpec:
        return DoubleBarrierSpec(barrier_width=self.b_nm, well_width=self.w_nm, barrier_height=self.V_eV)


class SegmentModel(BaseModel):
    x_lo: float
    x_hi: float
    height_eV: float


class PotentialModel(BaseModel):
    """二选一：双势垒参数或任意分段"""

    double_barrier: Optional[DoubleBarrierModel] = None
    segments: Optional[List[SegmentModel]] = None

    @model_validator(mode="after")
    def exactly_one(self):
        if self.double_barrier is None and self.segments is None:
            self.double_barrier = DoubleBarrierModel()
        if self.double_barrier is not None and self.segments is not None:
            raise ValueError("double_barrier 与 segments 只能给一个")
        return self

    def build(self) -> PiecewisePotential:
        if self.segments is not None:
            return build_piecewise([(s.x_lo, s.x_hi, s.height_eV) for s in self.segments])
        return build_double_barrier(self.double_barrier.to_spec())


class StateModel(BaseModel):
    kind: Literal["gaussian", "sine"] = "gaussian"
    x0_nm: Optional[float] = None  # 默认 L/2
    sigma_nm: Optional[float] = None  # 默认 w/10
    j: int = Field(1, ge=1)


class TimeGridModel(BaseModel):
    t_max: float = Field(0.02, gt=0)
    unit: Literal["tau1", "fs"] = "tau1"
    points: int = Field(201, ge=1)


class SearchBoxModel(BaseModel):
    re_max: Optional[float] = Field(None, gt=0)
    im_depth: Optional[float] = Field(None, gt=0)


class AnalysisModel(BaseModel):
    ladder: Optional[List[int]] = None  # 默认 N/16 ... N 的 5 级几何阶梯
    fit_mode: Literal["two-point", "lsq", "free"] = "lsq"
    window: Optional[Tuple[float, float]] = None  # fs
    two_points: Optional[Tuple[float, float]] = None  # fs
    zeno_sigma_fractions: List[float] = [1 / 20, 1 / 10, 1 / 5]


class OracleModel(BaseModel):
    dx_nm: float = Field(0.02, gt=0)
    dt_fs: Optional[float] = Field(None, gt=0)  # 默认取精度上限
    pad_factor: float = Field(40.0, gt=0)
    t_max: float = Field(2.0, gt=0)
    unit: Literal["tau1", "fs"] = "tau1"
    absorbing_width_nm: Optional[float] = None
    absorbing_strength_eV: Optional[float] = None


class RunConfig(BaseModel):
    """一次运行的完整配置，默认值即双势垒 + L/2 处 σ = w/10 的高斯态 + N = 10³"""

    potential: PotentialModel = Field(default_factory=PotentialModel)
    mass_ratio: float = Field(0.067, gt=0)
    state: StateModel = Field(default_factory=StateModel)
    n_poles: int = Field(1000, ge=1)
    # figure1 的对照曲线；0 表示不算
    n_poles_reference: int = Field(20000, ge=0)
    search_box: SearchBoxModel = Field(default_factory=SearchBoxModel)
    time_grid: TimeGridModel = Field(default_factory=TimeGridModel)
    analysis: AnalysisModel = Field(default_factory=AnalysisModel)
    oracle: OracleModel = Field(default_factory=OracleModel)
    output_dir: str = "results"

    def build_potential(self) -> PiecewisePotential:
        return self.potential.build()

    def build_params(self) -> PhysicalParams:
        return default_physical_params(self.mass_ratio)

    def build_search_box(self) -> Optional[SearchBox]:
        if self.search_box.re_max is None:
            return None
        return SearchBox(re_max=self.search_box.re_max, im_depth=self.search_box.im_depth or 2.0)

    def build_state(self, sigma_nm: Optional[float] = None) -> InitialState:
        potential = self.build_potential()
        barrier = self.potential.double_barrier
        if self.state.kind == "sine":
            if barrier is None:
                raise InvalidSpecError("正弦态只定义在双势垒的阱内")
            return sinusoidal_state(self.state.j, barrier.to_spec())
        length = potential.total_length
        well = barrier.w_nm if barrier is not None else length / 3
        x0 = self.state.x0_nm if self.state.x0_nm is not None else length / 2
        sigma = sigma_nm or self.state.sigma_nm or well / 10
        return gaussian_state(x0, sigma, potential)

    def pole_key(self, n_poles: int) -> Dict[str, Any]:
        """决定极点集合的那部分配置"""
        return {
            "potential": self.build_potential().to_dict(),
            "mass_ratio": self.mass_ratio,
            "n_poles": n_poles,
            "search_box": self.search_box.model_dump(),
        }

    def coefficient_key(self, n_poles: int, state: InitialState) -> Dict[str, Any]:
        return {"poles": self.pole_key(n_poles), "state": state.describe()}


class StageResponse(BaseModel):
    success: bool
    message: str
    stage: str
    data: Optional[Dict[str, Any]] = None
    artifacts: List[str] = []
    timestamp: datetime
