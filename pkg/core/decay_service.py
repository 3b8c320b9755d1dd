from typing import Any, Dict, List, Optional, Sequence
import logging
import time

import numpy as np
import pandas as pd

from config.analysis import ClassifierSetting, FitSetting
from config.solver import SolverSetting
from core.dynamics import (
    hamiltonian_moments,
    mean_energy_quadrature,
    moment_table,
    sum_rule_report,
    survival_curve,
)
from core.errors import DecayError, InconclusiveVerdictError
from core.initial_states import CoefficientSet, InitialState, expansion_coefficients
from core.potential import PhysicalParams, PiecewisePotential
from core.propagation import GridSpec, compare, propagate
from core.resonance import PoleSet, SearchBox, find_poles
from core.short_time import (
    FitMode,
    classify_cubic_sum,
    fit_experimental,
    fit_short_time,
    fit_window_grid,
    predict_exponent,
)
from core.storage.pole_cache import PoleCache, config_hash


class DecayService:
    """衰变计算流水线的各个阶段

    每个方法返回结果字典：成功时 success=True 并附带结果对象，
    失败时 success=False，附带 message / error / stage / exit_code。
    """

    def __init__(
        self,
        cache: Optional[PoleCache] = None,
        solver: Optional[SolverSetting] = None,
        classifier: Optional[ClassifierSetting] = None,
        fit: Optional[FitSetting] = None,
    ):
        self.cache = cache or PoleCache()
        self.solver = solver or SolverSetting()
        self.classifier = classifier or ClassifierSetting()
        self.fit_setting = fit or FitSetting()
        self.logger = logging.getLogger(__name__)
        # 同一进程内按配置哈希复用的结果
        self._poles: Dict[str, PoleSet] = {}
        self._coeffs: Dict[str, CoefficientSet] = {}

    def _failure(self, stage: str, error: DecayError) -> Dict[str, Any]:
        stage = error.stage or stage
        self.logger.error(f"[{stage}] {type(error).__name__}: {error.message}")
        return {
            "success": False,
            "message": f"{stage} 阶段失败: {error.message}",
            "error": type(error).__name__,
            "stage": stage,
            "exit_code": error.exit_code,
        }

    def find_poles(
        self,
        potential: PiecewisePotential,
        params: PhysicalParams,
        n_poles: int,
        search_box: Optional[SearchBox] = None,
        threads: Optional[int] = None,
        cache_config: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        """找极点，优先读缓存

        Args:
            cache_config: 决定极点集合的配置（势场、质量、N、搜索框），用于生成缓存键

        Returns:
            Dict: 包含 PoleSet 的结果
        """
        start = time.time()
        key = config_hash(cache_config) if cache_config is not None else None
        try:
            poles = self._poles.get(key) if key else None
            cached = poles is not None
            if poles is None and key:
                poles = self.cache.load_poles(key, potential, params, self.solver)
                cached = poles is not None
            if poles is None:
                poles = find_poles(potential, params, n_poles, search_box, threads=threads, setting=self.solver)
                if key:
                    self.cache.save_poles(key, cache_config, poles)
            if key:
                self._poles[key] = poles
            elapsed = time.time() - start
            self.logger.info(f"极点阶段完成: {poles.resonance_count} 个共振，用时 {elapsed:.1f}s")
            return {
                "success": True,
                "message": f"找到 {poles.resonance_count} 个共振极点",
                "stage": "poles",
                "poles": poles,
                "key": key,
                "cached": cached,
                "tau1_fs": poles.lifetime_tau1,
                "elapsed_s": elapsed,
            }
        except DecayError as e:
            return self._failure("poles", e)

    def expansion_coefficients(
        self,
        state: InitialState,
        poles: PoleSet,
        n_max: Optional[int] = None,
        cache_config: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        start = time.time()
        key = config_hash(cache_config) if cache_config is not None else None
        try:
            coeffs = self._coeffs.get(key) if key else None
            if coeffs is None and key:
                coeffs = self.cache.load_coefficients(key, state, poles)
            if coeffs is None:
                coeffs = expansion_coefficients(state, poles, n_max)
                if key:
                    self.cache.save_coefficients(key, cache_config, coeffs)
            if key:
                self._coeffs[key] = coeffs
            report = sum_rule_report(coeffs)
            return {
                "success": True,
                "message": f"计算了 {len(coeffs.n)} 个展开系数",
                "stage": "coeffs",
                "coefficients": coeffs,
                "sum_rules": report,
                "cutoff_warning": state.cutoff_warning,
                "elapsed_s": time.time() - start,
            }
        except DecayError as e:
            return self._failure("coeffs", e)

    def survival(
        self,
        coeffs: CoefficientSet,
        poles: PoleSet,
        params: PhysicalParams,
        times: Sequence[float],
        n_max: Optional[int] = None,
        threads: int = 1,
    ) -> Dict[str, Any]:
        try:
            curve = survival_curve(coeffs, poles, params, times, n_max, threads=threads)
            return {
                "success": True,
                "message": f"在 {len(curve.times)} 个时间点上计算了 S_N(t)，N={curve.n_used}",
                "stage": "survival",
                "curve": curve,
                "overflow_points": int(np.sum(curve.overflow)) if curve.overflow is not None else 0,
            }
        except DecayError as e:
            return self._failure("survival", e)

    def moments(
        self,
        coeffs: CoefficientSet,
        params: PhysicalParams,
        ladder: Sequence[int],
        js: Sequence[int] = tuple(range(9)),
    ) -> Dict[str, Any]:
        try:
            table = moment_table(coeffs, js, ladder)
            hamiltonian = hamiltonian_moments(coeffs, params, ladder, self.classifier)
            quadrature = mean_energy_quadrature(coeffs.source_state, coeffs.poles.potential, params)
            return {
                "success": True,
                "message": "矩序列计算完成",
                "stage": "moments",
                "table": table,
                "hamiltonian": hamiltonian,
                "mean_H_quadrature": quadrature,
                "growth": {j: table.growth(j) for j in table.mu},
            }
        except DecayError as e:
            return self._failure("moments", e)

    def classify(self, coeffs: CoefficientSet, ladder: Sequence[int]) -> Dict[str, Any]:
        try:
            diagnostic = classify_cubic_sum(coeffs, ladder, self.classifier)
            try:
                exponent = predict_exponent(diagnostic)
            except InconclusiveVerdictError:
                exponent = None
            return {
                "success": True,
                "message": f"三次和判定为 {diagnostic.verdict.kind.value}",
                "stage": "classify",
                "diagnostic": diagnostic,
                "predicted_exponent": exponent,
            }
        except DecayError as e:
            return self._failure("classify", e)

    def fit(self, curve, mode: Optional[FitMode] = None) -> Dict[str, Any]:
        try:
            result = fit_short_time(curve, mode, self.fit_setting)
            return {
                "success": True,
                "message": f"短时拟合: theta={result.theta:g}, tau*={result.tau_star:.6g}",
                "stage": "fit",
                "fit": result,
            }
        except DecayError as e:
            return self._failure("fit", e)
        except RuntimeError as e:
            # curve_fit 不收敛
            return self._failure("fit", DecayError(str(e)))

    def fit_experiment(self, data: pd.DataFrame, thetas: Sequence[float] = (1.5, 2.0)) -> Dict[str, Any]:
        try:
            fits = fit_experimental(data, thetas)
            preferred = min(fits, key=lambda f: f.residual)
            return {
                "success": True,
                "message": f"实验数据拟合完成，残差较小的是 theta={preferred.theta:g}",
                "stage": "experiment",
                "fits": fits,
                "preferred_theta": preferred.theta,
            }
        except DecayError as e:
            return self._failure("experiment", e)
        except RuntimeError as e:
            return self._failure("experiment", DecayError(str(e)))

    def short_time_fit(
        self,
        coeffs: CoefficientSet,
        poles: PoleSet,
        params: PhysicalParams,
        mode: Optional[FitMode] = None,
        n_max: Optional[int] = None,
        threads: int = 1,
    ) -> Dict[str, Any]:
        """在默认窗口网格上计算 S_N(t) 后拟合"""
        if poles.lifetime_tau1 is None:
            return {
                "success": False,
                "message": "没有共振极点，无法确定拟合窗口",
                "error": "InsufficientDataError",
                "stage": "fit",
                "exit_code": 2,
            }
        times = fit_window_grid(poles.lifetime_tau1, self.fit_setting)
        result = self.survival(coeffs, poles, params, times, n_max, threads)
        if not result["success"]:
            return result
        return self.fit(result["curve"], mode)

    def zeno_table(
        self,
        states: List[InitialState],
        poles: PoleSet,
        params: PhysicalParams,
        ladder: Sequence[int],
        mode: Optional[FitMode] = None,
        threads: int = 1,
    ) -> Dict[str, Any]:
        """对一组初态比较拟合的 τ* 与 Zeno 时间 ħ/ΔE"""
        rows = []
        for state in states:
            coeff_result = self.expansion_coefficients(state, poles)
            if not coeff_result["success"]:
                return coeff_result
            coeffs = coeff_result["coefficients"]
            fit_result = self.short_time_fit(coeffs, poles, params, mode, threads=threads)
            if not fit_result["success"]:
                return fit_result
            try:
                moments = hamiltonian_moments(coeffs, params, ladder, self.classifier)
            except DecayError as e:
                return self._failure("zeno", e)
            fit = fit_result["fit"]
            zeno = moments.zeno_time.value if moments.zeno_time.is_finite else None
            rows.append(
                {
                    "sigma_nm": state.sigma,
                    "theta": fit.theta,
                    "tau_star_fs": fit.tau_star,
                    "zeno_time_fs": zeno,
                    "ratio": fit.tau_star / zeno if zeno else None,
                }
            )
        return {
            "success": True,
            "message": f"比较了 {len(rows)} 个初态的 tau* 与 Zeno 时间",
            "stage": "zeno",
            "rows": rows,
        }

    def oracle(
        self,
        potential: PiecewisePotential,
        state: InitialState,
        grid: GridSpec,
        t_max: float,
        params: PhysicalParams,
    ) -> Dict[str, Any]:
        try:
            result = propagate(potential, state, grid, t_max, params)
            return {
                "success": True,
                "message": f"网格传播到 t={t_max:g} fs",
                "stage": "oracle",
                "result": result,
                "contaminated": result.contaminated,
                "contamination_time_fs": result.contamination_time,
            }
        except DecayError as e:
            return self._failure("oracle", e)

    def compare(self, expansion: pd.DataFrame, oracle: pd.DataFrame) -> Dict[str, Any]:
        try:
            report = compare(expansion["t"], expansion["S"], oracle["t"], oracle["S"])
            return {
                "success": True,
                "message": f"最大偏差 {report.max_deviation:.3e}，中位偏差 {report.median_deviation:.3e}",
                "stage": "compare",
                "report": report,
            }
        except DecayError as e:
            return self._failure("compare", e)
