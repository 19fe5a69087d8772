import numpy as np
import pytest
from scipy import stats

from eesampler import (
    TemperatureLadder,
    importance_log_weight,
    make_finite_target,
    make_gaussian_target,
    tempered_log_density,
)

SIGMA = np.array([[0.96, 2.44], [2.44, 7.04]])


def test_finite_log_density_difference_is_log_two():
    target = make_finite_target([0.0, np.log(2.0)])
    ladder = TemperatureLadder((2.0, 1.0))
    d0 = tempered_log_density(target, ladder, 1, 0)
    d1 = tempered_log_density(target, ladder, 1, 1)
    assert d0 - d1 == pytest.approx(np.log(2.0), abs=1e-15)


def test_gaussian_mode_at_origin_on_grid():
    target = make_gaussian_target(SIGMA)
    ladder = TemperatureLadder((2.0, 1.0))
    at_origin = tempered_log_density(target, ladder, 1, np.zeros(2))
    grid = np.linspace(-3.0, 3.0, 13)
    for a in grid:
        for b in grid:
            if a == 0.0 and b == 0.0:
                continue
            assert tempered_log_density(target, ladder, 1, np.array([a, b])) < at_origin


def test_tempering_halves_log_density():
    target = make_gaussian_target(SIGMA)
    ladder = TemperatureLadder((2.0, 1.0))
    x = np.array([1.0, 1.0])
    cold = tempered_log_density(target, ladder, 1, x)
    hot = tempered_log_density(target, ladder, 0, x)
    assert hot == pytest.approx(0.5 * cold, rel=1e-14)


def test_level_differences_match_energy_scaling_exactly():
    target = make_gaussian_target(SIGMA)
    ladder = TemperatureLadder((10.0, 5.0, 2.0, 1.0))
    rng = np.random.default_rng(7)
    for _ in range(20):
        x = rng.normal(size=2) * 3
        e = target.energy(x)
        for m in range(4):
            for l in range(4):
                diff = tempered_log_density(target, ladder, l, x) - tempered_log_density(
                    target, ladder, m, x
                )
                expected = -e * (1.0 / ladder.temperatures[l] - 1.0 / ladder.temperatures[m])
                assert diff == pytest.approx(expected, abs=1e-12)


def test_importance_log_weight_values():
    ladder = TemperatureLadder((2.0, 1.0))
    zero = make_finite_target([0.0, 0.0])
    assert importance_log_weight(zero, ladder, 1, 0) == 0.0
    three = make_finite_target([3.0])
    assert importance_log_weight(three, ladder, 1, 0) == pytest.approx(-1.5)


def test_importance_weight_is_log_density_increment():
    target = make_gaussian_target(SIGMA)
    ladder = TemperatureLadder((10.0, 5.0, 2.0, 1.0))
    rng = np.random.default_rng(3)
    for level in (1, 2, 3):
        x, y = rng.normal(size=2), rng.normal(size=2)
        lhs = importance_log_weight(target, ladder, level, x) - importance_log_weight(
            target, ladder, level, y
        )
        rhs = (
            tempered_log_density(target, ladder, level, x)
            - tempered_log_density(target, ladder, level - 1, x)
        ) - (
            tempered_log_density(target, ladder, level, y)
            - tempered_log_density(target, ladder, level - 1, y)
        )
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_equal_energy_acceptance_ratio_is_one():
    target = make_finite_target([1.7, 1.7])
    ladder = TemperatureLadder((3.0, 1.0))
    r0 = importance_log_weight(target, ladder, 1, 0)
    r1 = importance_log_weight(target, ladder, 1, 1)
    assert np.exp(r1 - r0) == 1.0


def test_importance_weight_rejects_level_zero():
    target = make_finite_target([0.0, 1.0])
    ladder = TemperatureLadder((2.0, 1.0))
    with pytest.raises(ValueError):
        importance_log_weight(target, ladder, 0, 0)


def test_log_density_rejects_bad_level_and_nonfinite_state():
    target = make_gaussian_target(np.eye(2))
    ladder = TemperatureLadder((2.0, 1.0))
    with pytest.raises(ValueError):
        tempered_log_density(target, ladder, 2, np.zeros(2))
    with pytest.raises(ValueError):
        tempered_log_density(target, ladder, 1, np.array([np.nan, 0.0]))


def test_gaussian_identity_sampler_moments():
    target = make_gaussian_target(np.eye(2))
    rng = np.random.default_rng(11)
    draws = target.sample_tempered(1.0, rng, size=100_000)
    n = draws.shape[0]
    # second-moment s.e. for a unit Gaussian is sqrt(2/n)
    for i in range(2):
        assert abs(draws[:, i].mean()) < 3.0 / np.sqrt(n)
        assert abs((draws[:, i] ** 2).mean() - 1.0) < 3.0 * np.sqrt(2.0 / n)


def test_gaussian_paper_covariance_moments():
    target = make_gaussian_target(SIGMA)
    rng = np.random.default_rng(12)
    draws = target.sample_tempered(1.0, rng, size=200_000)
    n = draws.shape[0]
    for i in range(2):
        var = SIGMA[i, i]
        se = var * np.sqrt(2.0 / n)
        assert abs((draws[:, i] ** 2).mean() - var) < 4.0 * se
    cross_se = np.sqrt((SIGMA[0, 0] * SIGMA[1, 1] + SIGMA[0, 1] ** 2) / n)
    assert abs((draws[:, 0] * draws[:, 1]).mean() - SIGMA[0, 1]) < 4.0 * cross_se


def test_tempered_gaussian_scales_covariance_by_temperature():
    # the t*Sigma rescaling is a derived fact: validate it against moments
    # of one million exact draws before anything else relies on it
    target = make_gaussian_target(SIGMA)
    rng = np.random.default_rng(13)
    t = 10.0
    draws = target.sample_tempered(t, rng, size=1_000_000)
    n = draws.shape[0]
    for i in range(2):
        var = t * SIGMA[i, i]
        se = var * np.sqrt(2.0 / n)
        assert abs((draws[:, i] ** 2).mean() - var) < 4.0 * se
    cross = t * SIGMA[0, 1]
    cross_se = np.sqrt((t * SIGMA[0, 0] * t * SIGMA[1, 1] + cross**2) / n)
    assert abs((draws[:, 0] * draws[:, 1]).mean() - cross) < 4.0 * cross_se


def test_finite_target_uniform_when_energies_equal():
    target = make_finite_target([2.5, 2.5, 2.5])
    for t in (0.3, 1.0, 7.0):
        assert target.tempered_probabilities(t) == pytest.approx(np.full(3, 1 / 3))


def test_finite_target_two_state_probabilities():
    target = make_finite_target([0.0, np.log(2.0)])
    assert target.tempered_probabilities(1.0) == pytest.approx([2 / 3, 1 / 3])


def test_finite_target_three_state_probabilities_by_direct_normalization():
    energies = np.array([0.0, 1.0, 2.0])
    weights = np.exp(-energies / 2.0)
    expected = weights / weights.sum()
    target = make_finite_target(energies)
    assert target.tempered_probabilities(2.0) == pytest.approx(expected, abs=1e-15)


def test_finite_sampler_chi_square_goodness_of_fit():
    target = make_finite_target([0.0, 0.7, 1.3, 2.9])
    rng = np.random.default_rng(14)
    n = 1_000_000
    draws = target.sample_tempered(1.0, rng, size=n)
    counts = np.bincount(draws, minlength=4)
    expected = target.tempered_probabilities(1.0) * n
    _, p_value = stats.chisquare(counts, expected)
    assert p_value > 0.001


def test_ladder_validation():
    with pytest.raises(ValueError):
        TemperatureLadder((1.0, 2.0))
    with pytest.raises(ValueError):
        TemperatureLadder((2.0, 1.5))
    with pytest.raises(ValueError):
        TemperatureLadder((2.0, -1.0))
    with pytest.raises(ValueError):
        TemperatureLadder((4.0, 2.0, 1.0), (0.5,))
    with pytest.raises(ValueError):
        TemperatureLadder((4.0, 2.0, 1.0), (0.5, 0.0))
    ladder = TemperatureLadder((4.0, 2.0, 1.0), (0.5, 1.0))
    assert ladder.theta(1) == 0.5
    assert ladder.theta(2) == 1.0
    with pytest.raises(ValueError):
        TemperatureLadder((4.0, 1.0)).theta(1)


def test_target_construction_errors():
    with pytest.raises(ValueError):
        make_gaussian_target([[1.0, 2.0], [2.0, 1.0]])  # not positive definite
    with pytest.raises(ValueError):
        make_gaussian_target([[1.0, 0.5], [0.4, 1.0]])  # not symmetric
    with pytest.raises(ValueError):
        make_finite_target([])
    with pytest.raises(ValueError):
        make_finite_target([0.0, np.inf])
