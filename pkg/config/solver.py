from dotenv import load_dotenv
import os

# 加载环境变量
load_dotenv()


# 极点搜索相关的数值参数，全部可以通过环境变量覆盖
class SolverSetting:
    def __init__(self):
        self.threads = int(os.getenv("DECAY_THREADS", 1))
        self.pole_tol = float(os.getenv("DECAY_POLE_TOL", 1e-12))
        # build_resonant_state 接受外部 kappa 时使用的宽松容差
        self.accept_tol = float(os.getenv("DECAY_ACCEPT_TOL", 1e-8))
        self.degeneracy_tol = float(os.getenv("DECAY_DEGENERACY_TOL", 1e-8))
        self.base_im_depth = float(os.getenv("DECAY_BASE_IM_DEPTH", 2.0))
        self.strip_width_factor = float(os.getenv("DECAY_STRIP_WIDTH_FACTOR", 4.0))
        self.max_subdivision = int(os.getenv("DECAY_MAX_SUBDIVISION", 24))
        self.seed_fit_poles = int(os.getenv("DECAY_SEED_FIT_POLES", 50))
        self.newton_max_iter = int(os.getenv("DECAY_NEWTON_MAX_ITER", 60))
