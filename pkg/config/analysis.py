from dotenv import load_dotenv
import os

load_dotenv()


class ClassifierSetting:
    """三次和判定规则的阈值"""

    def __init__(self):
        self.diverge_alpha = float(os.getenv("DECAY_DIVERGE_ALPHA", 0.2))
        self.diverge_residual = float(os.getenv("DECAY_DIVERGE_RESIDUAL", 0.1))
        self.vanish_scale = float(os.getenv("DECAY_VANISH_SCALE", 1e-6))
        self.plateau_tol = float(os.getenv("DECAY_PLATEAU_TOL", 0.05))
        # 配对项衰减不快于 N^{-tail_exponent} 时判为发散
        self.tail_exponent = float(os.getenv("DECAY_TAIL_EXPONENT", 1.2))


class FitSetting:
    """短时拟合的默认窗口与判据"""

    def __init__(self):
        # 窗口上限，以 tau_1 为单位
        self.window_tau1 = float(os.getenv("DECAY_FIT_WINDOW_TAU1", 1e-3))
        self.points = int(os.getenv("DECAY_FIT_POINTS", 50))
        # 窗口下限相对上限的比例（对数均匀取点）
        self.window_span = float(os.getenv("DECAY_FIT_WINDOW_SPAN", 1e-2))
        # 默认窗口只保留 1 - S 不超过该值的短时段
        self.max_drop = float(os.getenv("DECAY_FIT_MAX_DROP", 1e-2))
        self.noise_floor = float(os.getenv("DECAY_NOISE_FLOOR", 1e-12))
        self.ambiguous_ratio = float(os.getenv("DECAY_AMBIGUOUS_RATIO", 0.1))
