"""复数的补偿求和

实部与虚部分别交给 math.fsum（Shewchuk 精确求和），结果与加数顺序无关。
"""
import math
from typing import Iterable

import numpy as np


def compensated_sum(values: Iterable[complex]) -> complex:
    arr = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=complex).ravel()
    return complex(math.fsum(arr.real), math.fsum(arr.imag))


def compensated_sum_rows(matrix: np.ndarray) -> np.ndarray:
    """对二维数组逐行补偿求和，返回长度为行数的复数组"""
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim == 1:
        return np.array([compensated_sum(matrix)])
    return np.array([complex(math.fsum(row.real), math.fsum(row.imag)) for row in matrix])
