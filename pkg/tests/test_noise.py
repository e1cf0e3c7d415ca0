import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from latticedp.errors import ParameterDomain
from latticedp.intlinalg import IntMatrix, lattice_basis, smith_normal_form
from latticedp.noise import (
    DoubleGeometric,
    NoiseKind,
    NoiseTarget,
    calibration_constant,
    gaussian_sigma,
    log_target,
    sample_double_geometric,
    tail_constant_K,
    unit_ball_volume,
)

from conftest import dgeom_pmf


def test_log_target_examples():
    l1 = NoiseTarget(kind=NoiseKind.LAPLACE_L1, epsilon=0.25)
    assert log_target(l1, (0, 0, 0)) == 0.0
    assert log_target(l1, (1, -1, 0)) == pytest.approx(-0.5)
    gauss = NoiseTarget(kind=NoiseKind.GAUSSIAN, sigma=2.0)
    assert log_target(gauss, (2, 0)) == pytest.approx(-0.5)
    l2 = NoiseTarget(kind=NoiseKind.LAPLACE_L2, epsilon=0.25)
    assert log_target(l2, (3, 4)) == pytest.approx(-0.25 * 5.0)


def test_log_target_center():
    gauss = NoiseTarget(kind=NoiseKind.GAUSSIAN, sigma=1.0, center=(1, 1))
    assert log_target(gauss, (1, 1)) == 0.0
    assert log_target(gauss, (2, 1)) == pytest.approx(-0.5)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=-10**9, max_value=10**9), min_size=1, max_size=12))
def test_log_target_even_function(z):
    for target in (
        NoiseTarget(kind=NoiseKind.LAPLACE_L1, epsilon=0.7),
        NoiseTarget(kind=NoiseKind.LAPLACE_L2, epsilon=0.7),
        NoiseTarget(kind=NoiseKind.GAUSSIAN, sigma=3.0),
    ):
        neg = [-v for v in z]
        assert log_target(target, z) == log_target(target, neg)


def test_target_validation():
    with pytest.raises(ParameterDomain):
        NoiseTarget(kind=NoiseKind.LAPLACE_L1, epsilon=0.0)
    with pytest.raises(ParameterDomain):
        NoiseTarget(kind=NoiseKind.GAUSSIAN, sigma=-1.0)
    with pytest.raises(ParameterDomain):
        DoubleGeometric(1.0)


def test_double_geometric_mass_at_zero():
    a = math.exp(-1.0)
    dg = DoubleGeometric(a)
    assert dg.pmf(0) == pytest.approx((1 - a) / (1 + a))
    assert dg.pmf(0) == pytest.approx(0.46211715726, abs=1e-9)
    assert dg.pmf(3) == dg.pmf(-3)
    total = sum(dg.pmf(e) for e in range(-80, 81))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_double_geometric_tiny_ratio_always_zero():
    dg = DoubleGeometric(1e-12)
    rng = np.random.default_rng(0)
    assert all(sample_double_geometric(dg, rng) == 0 for _ in range(2000))


def test_double_geometric_empirical_pmf_chi_square():
    a = math.exp(-1.0)
    dg = DoubleGeometric(a)
    rng = np.random.default_rng(1234)
    n = 1_000_000
    draws = np.array([sample_double_geometric(dg, rng) for _ in range(n)])

    mean = draws.mean()
    se = draws.std(ddof=1) / math.sqrt(n)
    assert abs(mean) <= 4 * se

    # Bin |e| <= 8 individually, pool the two tails.
    lo, hi = -8, 8
    edges = list(range(lo, hi + 1))
    observed = [(draws == e).sum() for e in edges]
    observed = [int((draws < lo).sum())] + observed + [int((draws > hi).sum())]
    expected = [n * dg.cdf(lo - 1)] + [n * dgeom_pmf(e, a) for e in edges]
    expected.append(n * (1.0 - dg.cdf(hi)))
    chi2, p = stats.chisquare(observed, f_exp=expected)
    assert p > 0.01, f"chi-square p={p}"


def test_unit_ball_volume_values():
    assert unit_ball_volume(0) == pytest.approx(1.0)
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


def test_tail_constant_for_d2_basis():
    snf = smith_normal_form(IntMatrix.from_rows([[1, 1]]))
    basis = lattice_basis(snf)
    # 4 * 2^1 * V_1 / sqrt(2) with V_1 = 2.
    assert tail_constant_K(basis) == pytest.approx(16.0 / math.sqrt(2.0))


def test_gaussian_sigma_monotone_in_delta():
    s_small = gaussian_sigma(0.25, 1e-8, 3, 20.0)
    s_large = gaussian_sigma(0.25, 1e-4, 3, 20.0)
    assert s_small > s_large


def test_gaussian_sigma_domain():
    with pytest.raises(ParameterDomain):
        gaussian_sigma(0.5, 0.6, 3, 20.0)
    with pytest.raises(ParameterDomain):
        gaussian_sigma(0.5, 0.5, 3, 20.0)
    with pytest.raises(ParameterDomain):
        gaussian_sigma(1.2, 1e-6, 3, 20.0)  # eps >= 1/e


def test_gaussian_sigma_regression_value():
    # m = 1, K = 16/sqrt(2), eps = 0.25, delta = 1e-6.  Independent spell-out
    # of the documented closed form; locks this library's calibration choice.
    K = 16.0 / math.sqrt(2.0)
    c = 3.0 * max(1 * math.log(2), math.log(K), 1.0)
    expected = math.sqrt(2.0 * c * math.log(1e6)) / 0.25
    assert gaussian_sigma(0.25, 1e-6, 1, K) == pytest.approx(expected, rel=1e-12)
    assert calibration_constant(1, K) == pytest.approx(c, rel=1e-12)


def test_gaussian_sigma_custom_constant():
    assert gaussian_sigma(0.25, 1e-6, 9, 100.0, c=10.0) == pytest.approx(
        math.sqrt(20.0 * math.log(1e6)) / 0.25
    )
