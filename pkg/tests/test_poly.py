import numpy as np
import pytest

from ddefloquet._poly import bary_weights, cumint_matrix, diff_matrix, interp_rows, lobatto_nodes


def test_lobatto_endpoints_and_order():
    x = lobatto_nodes(8)
    assert x[0] == -1.0 and x[-1] == 1.0
    assert np.all(np.diff(x) > 0)
    assert x.size == 9


@pytest.mark.parametrize("deg", [3, 5, 8])
def test_interp_exact_on_polynomials(deg):
    x = lobatto_nodes(deg)
    w = bary_weights(x)
    t = np.linspace(-1, 1, 17)
    rows = interp_rows(x, w, t)
    for p in range(deg + 1):
        assert np.allclose(rows @ x**p, t**p, atol=1e-12)


def test_interp_exact_node_hit():
    x = lobatto_nodes(4)
    rows = interp_rows(x, bary_weights(x), [x[2]])
    assert np.allclose(rows[0], np.eye(5)[2])


def test_diff_matrix_exact():
    x = lobatto_nodes(6)
    d = diff_matrix(x)
    for p in range(1, 7):
        assert np.allclose(d @ x**p, p * x ** (p - 1), atol=1e-10)


def test_cumint_matrix_exact():
    x = 0.3 + 0.05 * (lobatto_nodes(7) + 1.0)  # shifted, scaled interval
    q = cumint_matrix(x)
    for p in range(8):
        exact = (x ** (p + 1) - x[0] ** (p + 1)) / (p + 1)
        assert np.allclose(q @ x**p, exact, atol=1e-13)
    assert np.allclose(q[0], 0.0)
