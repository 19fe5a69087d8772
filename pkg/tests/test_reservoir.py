import numpy as np
import pytest
from scipy import stats

from eesampler import EmptyReservoirError, NonFiniteWeightError, Reservoir


def test_first_push_defines_point_mass():
    r = Reservoir(dimension=2)
    x = np.array([1.5, -0.5])
    r.push(x)
    assert r.count == 1
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert np.array_equal(r.sample_uniform(rng), x)


def test_push_same_state_twice_keeps_full_mass_there():
    r = Reservoir()
    r.push(3)
    r.push(3)
    assert r.count == 2
    assert r.empirical_distribution(5)[3] == 1.0


def test_two_point_empirical_mean():
    r = Reservoir(dimension=1)
    r.push(np.array([2.0]))
    r.push(np.array([4.0]))
    f = lambda xs: xs[:, 0] ** 2
    assert r.empirical_mean(f) == pytest.approx((4.0 + 16.0) / 2.0)


def test_empirical_mean_matches_direct_recomputation_exactly():
    rng = np.random.default_rng(1)
    r = Reservoir(dimension=3)
    pushed = []
    for _ in range(257):  # crosses the buffer-doubling boundary
        x = rng.normal(size=3)
        r.push(x)
        pushed.append(x)
    direct = np.stack(pushed).mean(axis=0)
    assert np.array_equal(r.empirical_mean(), direct)
    assert r.count == 257


def test_uniform_sampling_frequencies():
    r = Reservoir()
    for s in range(4):
        r.push(s)
    rng = np.random.default_rng(2)
    n = 100_000
    draws = np.array([r.sample_uniform(rng) for _ in range(n)])
    counts = np.bincount(draws, minlength=4)
    _, p_value = stats.chisquare(counts, np.full(4, n / 4))
    assert p_value > 0.001


def test_two_element_frequencies_within_four_se():
    r = Reservoir()
    r.push(0)
    r.push(1)
    rng = np.random.default_rng(3)
    n = 100_000
    freq = np.mean([r.sample_uniform(rng) for _ in range(n)])
    se = np.sqrt(0.25 / n)
    assert abs(freq - 0.5) < 4.0 * se


def test_equal_weights_behave_uniformly():
    r = Reservoir()
    for s in range(3):
        r.push(s)
    rng = np.random.default_rng(4)
    n = 60_000
    draws = np.array([r.sample_weighted(lambda xs: np.full(len(xs), 5.0), rng) for _ in range(n)])
    counts = np.bincount(draws, minlength=3)
    _, p_value = stats.chisquare(counts, np.full(3, n / 3))
    assert p_value > 0.001


def test_weighted_frequencies_match_explicit_normalization():
    r = Reservoir()
    for s in range(3):
        r.push(s)
    log_w = np.log(np.array([1.0, 2.0, 3.0]))
    expected = np.array([1.0, 2.0, 3.0]) / 6.0  # normalized by direct summation
    rng = np.random.default_rng(5)
    n = 100_000
    draws = np.array([r.sample_weighted(lambda xs: log_w[xs], rng) for _ in range(n)])
    counts = np.bincount(draws, minlength=3)
    _, p_value = stats.chisquare(counts, expected * n)
    assert p_value > 0.001


def test_dominant_log_weight_never_overflows():
    r = Reservoir()
    for s in range(3):
        r.push(s)
    log_w = np.array([0.0, 10.0, 710.0])  # exp(710) overflows a float64
    rng = np.random.default_rng(6)
    draws = [r.sample_weighted(lambda xs: log_w[xs], rng) for _ in range(10_000)]
    assert set(draws) == {2}


def test_draws_reproducible_and_shift_invariant():
    values = np.array([0.2, -1.0, 3.0, 0.5, 2.0])
    log_w = np.array([0.1, 1.2, -0.7, 0.0, 2.2])

    def draw_sequence(shift, seed):
        r = Reservoir()
        for s in range(5):
            r.push(s)
        rng = np.random.default_rng(seed)
        return [r.sample_weighted(lambda xs: log_w[xs] + shift, rng) for _ in range(200)]

    assert draw_sequence(0.0, 42) == draw_sequence(0.0, 42)
    assert draw_sequence(0.0, 42) == draw_sequence(123.456, 42)
    assert values is not None  # silence linters about unused helper data


def test_empty_reservoir_errors():
    r = Reservoir()
    rng = np.random.default_rng(7)
    with pytest.raises(EmptyReservoirError):
        r.sample_uniform(rng)
    with pytest.raises(EmptyReservoirError):
        r.sample_weighted(lambda xs: np.zeros(len(xs)), rng)
    with pytest.raises(EmptyReservoirError):
        r.empirical_mean()


def test_non_finite_weights_rejected():
    r = Reservoir()
    r.push(0)
    r.push(1)
    rng = np.random.default_rng(8)
    with pytest.raises(NonFiniteWeightError):
        r.sample_weighted(lambda xs: np.array([0.0, np.inf]), rng)


def test_states_are_copies_not_views():
    r = Reservoir(dimension=2)
    x = np.array([1.0, 2.0])
    r.push(x)
    x[0] = 99.0  # caller-side mutation must not reach the stored state
    rng = np.random.default_rng(9)
    drawn = r.sample_uniform(rng)
    assert drawn[0] == 1.0
    drawn[1] = -5.0  # and mutating a drawn copy must not corrupt the store
    assert r.samples[0, 1] == 2.0


def test_csv_dump(tmp_path):
    r = Reservoir(dimension=2)
    r.push(np.array([0.1, 0.2]))
    r.push(np.array([0.3, 0.4]))
    path = tmp_path / "res.csv"
    r.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x0,x1"
    assert [float(v) for v in lines[1].split(",")] == [0.1, 0.2]
