"""测试公共设置：--runslow 开关与双势垒上的极点/系数夹具"""
import pytest

from core.initial_states import expansion_coefficients, gaussian_state, sinusoidal_state
from core.potential import REFERENCE_DOUBLE_BARRIER, build_double_barrier, default_physical_params
from core.resonance import find_poles

# 快速测试用的极点数；高斯态 (σ = 0.5 nm) 的谱权重在这里已可忽略
FAST_POLES = 40
REFERENCE_POLES = 1000


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="运行标记为 slow 的测试")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 大 N 复现、传播对照等耗时测试（需 --runslow）")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="需要 --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def isolated_cache(tmp_path, monkeypatch):
    """每个测试使用独立的缓存目录"""
    monkeypatch.setenv("DECAY_CACHE_DIR", str(tmp_path / "cache"))


@pytest.fixture(scope="session")
def params():
    return default_physical_params()


@pytest.fixture(scope="session")
def barrier():
    return build_double_barrier(REFERENCE_DOUBLE_BARRIER)


@pytest.fixture(scope="session")
def barrier_poles(barrier, params):
    return find_poles(barrier, params, FAST_POLES)


@pytest.fixture(scope="session")
def gaussian(barrier):
    return gaussian_state(barrier.total_length / 2, REFERENCE_DOUBLE_BARRIER.well_width / 10, barrier)


@pytest.fixture(scope="session")
def sine():
    return sinusoidal_state(1, REFERENCE_DOUBLE_BARRIER)


@pytest.fixture(scope="session")
def gaussian_coeffs(gaussian, barrier_poles):
    return expansion_coefficients(gaussian, barrier_poles)


@pytest.fixture(scope="session")
def sine_coeffs(sine, barrier_poles):
    return expansion_coefficients(sine, barrier_poles)


@pytest.fixture(scope="session")
def reference_poles(barrier, params):
    return find_poles(barrier, params, REFERENCE_POLES, threads=4)


@pytest.fixture(scope="session")
def reference_gaussian_coeffs(gaussian, reference_poles):
    return expansion_coefficients(gaussian, reference_poles)


@pytest.fixture(scope="session")
def reference_sine_coeffs(sine, reference_poles):
    return expansion_coefficients(sine, reference_poles)
