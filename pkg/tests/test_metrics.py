import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lrpc import metrics


def test_psnr_cap():
    a = np.zeros((4, 4, 3), np.uint8)
    assert metrics.psnr(a, a) == 99.0


def test_psnr_zero():
    assert metrics.psnr(np.zeros((4, 4, 3), np.uint8), np.full((4, 4, 3), 255, np.uint8)) == 0.0


def test_psnr_single_pixel():
    a = np.zeros((512, 768, 3), np.uint8)
    b = a.copy()
    b[100, 200, 1] = 255
    assert metrics.psnr(a, b) == pytest.approx(10 * math.log10(768 * 512 * 3))
    assert metrics.psnr(a, b) == pytest.approx(60.72, abs=0.005)


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        metrics.psnr(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


def test_bpp():
    assert metrics.bpp(0, (512, 768)) == 0
    assert metrics.bpp(6636, (512, 768)) == pytest.approx(0.135, abs=5e-4)
    assert metrics.bpp(2 * 6636, (512, 768)) == 2 * metrics.bpp(6636, (512, 768))


def test_rd_cost():
    assert metrics.rd_cost(0.3, 0.0, 0.0018) == 0.3
    assert metrics.rd_cost(0.21, 100, 0.0035) == pytest.approx(0.56)
    with pytest.raises(ValueError):
        metrics.rd_cost(0.2, 1.0, 0.0)


@given(st.floats(0, 5), st.floats(0, 1e4), st.floats(1e-4, 1), st.floats(0, 1))
def test_rd_cost_monotone(rate, mse, lam, delta):
    base = metrics.rd_cost(rate, mse, lam)
    assert metrics.rd_cost(rate + delta, mse, lam) >= base
    assert metrics.rd_cost(rate, mse + delta, lam) >= base
    assert metrics.rd_cost(rate, mse, lam + delta) >= base


def test_sample_variance():
    assert metrics.sample_variance([1.0, 2.0, 3.0, 4.0]) == pytest.approx(np.var([1, 2, 3, 4], ddof=1))
    assert math.isnan(metrics.sample_variance([5.0]))
    assert metrics.sample_variance([2.0] * 10) == 0.0
