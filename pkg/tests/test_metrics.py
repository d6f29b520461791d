import math

import numpy as np
import pytest

from lattkm.metrics import gaussian_nll, rmse


def test_nll_closed_forms():
    y = np.array([0.3, -1.2, 4.0])
    assert gaussian_nll(y, y, np.ones(3)) == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-12)
    assert gaussian_nll(y, y, np.full(3, 1 / (2 * math.pi))) == pytest.approx(0.0, abs=1e-12)


def test_nll_matches_scipy(rng):
    from scipy.stats import norm
    y, m, v = rng.standard_normal(20), rng.standard_normal(20), rng.uniform(0.1, 2, 20)
    assert gaussian_nll(y, m, v) == pytest.approx(-np.mean(norm.logpdf(y, m, np.sqrt(v))), abs=1e-12)


def test_nll_rejects_bad_variance():
    with pytest.raises(ValueError):
        gaussian_nll(np.zeros(2), np.zeros(2), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        gaussian_nll(np.zeros(2), np.zeros(3), np.ones(2))


def test_rmse_constant_offset():
    y = np.linspace(-1, 1, 7)
    assert rmse(y, y + 0.25) == pytest.approx(0.25)
