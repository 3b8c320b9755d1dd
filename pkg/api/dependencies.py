from functools import lru_cache
import logging

from config.analysis import ClassifierSetting, FitSetting
from config.cache import CacheSetting
from config.solver import SolverSetting
from core.decay_service import DecayService
from core.storage.pole_cache import PoleCache

# 全局实例缓存
_instances = {}


@lru_cache()
def get_solver_setting() -> SolverSetting:
    if 'solver' not in _instances:
        _instances['solver'] = SolverSetting()
    return _instances['solver']


@lru_cache()
def get_pole_cache() -> PoleCache:
    """获取单例的磁盘缓存"""
    if 'cache' not in _instances:
        _instances['cache'] = PoleCache(CacheSetting())
        logging.info(f"缓存目录: {_instances['cache'].directory}（启用: {_instances['cache'].enabled}）")
    return _instances['cache']


@lru_cache()
def get_decay_service() -> DecayService:
    """获取衰变计算服务实例"""
    if 'decay_service' not in _instances:
        _instances['decay_service'] = DecayService(
            cache=get_pole_cache(),
            solver=get_solver_setting(),
            classifier=ClassifierSetting(),
            fit=FitSetting(),
        )
    return _instances['decay_service']


def cleanup_instances():
    """清理所有实例"""
    _instances.clear()
    get_solver_setting.cache_clear()
    get_pole_cache.cache_clear()
    get_decay_service.cache_clear()
    logging.info("所有实例已清理")
