import numpy as np

from core.summation import compensated_sum, compensated_sum_rows


def test_cancellation_is_exact():
    values = [1e16, 1.0, -1e16, 1j * 1e16, 1j, -1j * 1e16]
    assert compensated_sum(values) == complex(1.0, 1.0)
    # 顺序无关
    assert compensated_sum(values[::-1]) == complex(1.0, 1.0)


def test_accepts_arrays_and_generators():
    arr = np.full(10, 0.1 + 0.2j)
    assert compensated_sum(arr) == complex(1.0, 2.0)
    assert compensated_sum(x for x in arr) == complex(1.0, 2.0)
    assert compensated_sum([]) == 0j


def test_row_sums():
    matrix = np.array([[1e16, 1.0, -1e16], [0.5j, 0.5j, 1.0]])
    np.testing.assert_array_equal(compensated_sum_rows(matrix), [1.0 + 0j, 1.0 + 1j])
    np.testing.assert_array_equal(compensated_sum_rows(np.array([1.0, 2.0])), [3.0 + 0j])
