from .solver import SolverSetting
from .analysis import ClassifierSetting, FitSetting
from .cache import CacheSetting
