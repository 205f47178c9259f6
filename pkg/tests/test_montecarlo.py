from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from steppingstones.chain import build_ea_chain, expected_hitting_time, transition_pmf
from steppingstones.fitness import build_dss, build_needle, build_onemax
from steppingstones.montecarlo import (
    EstimateUnavailable,
    TrajectoryStats,
    estimate_runtime,
    run_trajectory,
    sample_offspring_unitation,
)


def exact(fitness, q):
    return float(expected_hitting_time(build_ea_chain(fitness, Fraction(q))))


@pytest.mark.parametrize("q", [0, 1, 1.5])
def test_rate_must_be_interior(q):
    with pytest.raises(ValueError):
        run_trajectory(build_onemax(1), q, seed=0)


def test_cap_validation():
    with pytest.raises(ValueError):
        run_trajectory(build_onemax(3), 0.5, seed=0, cap=0)


def test_needle_n1_distribution():
    steps = [run_trajectory(build_needle(1), 0.5, seed=7, run=r) for r in range(4000)]
    steps = np.array(steps)
    zero = np.mean(steps == 0)
    assert abs(zero - 0.5) < 4 * np.sqrt(0.25 / 4000)
    # the nonzero part is geometric(1/2): mean 2
    positive = steps[steps > 0]
    assert abs(positive.mean() - 2) < 4 * positive.std() / np.sqrt(len(positive))


def test_trajectory_is_a_pure_function_of_seed_and_run():
    fitness, _ = build_dss(0.3, 10)
    a = [run_trajectory(fitness, 0.3, seed=99, run=r) for r in range(20)]
    b = [run_trajectory(fitness, 0.3, seed=99, run=r) for r in reversed(range(20))]
    assert a == b[::-1]
    c = [run_trajectory(fitness, 0.3, seed=100, run=r) for r in range(20)]
    assert a != c


def test_estimate_is_deterministic_and_worker_independent():
    fitness, _ = build_dss(0.3, 8)
    s1 = estimate_runtime(fitness, 0.3, 600, seed=2024)
    s2 = estimate_runtime(fitness, 0.3, 600, seed=2024)
    s3 = estimate_runtime(fitness, 0.3, 600, seed=2024, workers=3)
    assert s1 == s2 == s3


def test_censoring_is_reported():
    fitness, _ = build_dss(0.3, 12)
    s = estimate_runtime(fitness, 0.3, 200, cap=50, seed=1)
    assert s.censored == s.runs - s.hits > 0
    assert s.to_dict()["censored"] == s.censored


def test_all_censored_raises():
    fitness, _ = build_dss(0.3, 20)
    with pytest.raises(EstimateUnavailable) as info:
        estimate_runtime(fitness, 0.3, 5, cap=1, seed=3)
    # any runs that happened to start at the optimum would have hit; none do at n=20
    assert info.value.stats.hits == 0


def test_single_run_has_no_standard_error():
    s = estimate_runtime(build_onemax(4), 0.25, 1, seed=5)
    assert s.runs == 1 and s.standard_error is None


def test_onemax_mean_matches_exact():
    fitness = build_onemax(8)
    s = estimate_runtime(fitness, Fraction(1, 8), 10_000, seed=11)
    assert s.hits == 10_000
    assert abs(s.mean_steps - exact(fitness, Fraction(1, 8))) < 4 * s.standard_error


def test_dss_half_mean_matches_uniform_sampling():
    fitness, _ = build_dss(0.5, 10)
    s = estimate_runtime(fitness, 0.5, 10_000, cap=10**6, seed=3)
    target = (1 - 2**-10) * 2**10
    assert abs(s.mean_steps - target) < 4 * s.standard_error


@pytest.mark.parametrize("n, i, q", [(3, 1, 0.3), (6, 2, 0.5), (8, 8, 0.2), (10, 4, 0.7), (10, 0, 0.1)])
def test_one_step_unitation_matches_kernel(n, i, q):
    samples = 100_000
    counts = sample_offspring_unitation(n, i, q, samples, seed=n * 100 + i)
    expected = np.asarray(transition_pmf(n, i, q, "float")) * samples
    keep = expected > 5  # pool sparse cells so the chi-square approximation holds
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    if exp[-1] == 0:
        obs, exp = obs[:-1], exp[:-1]
    exp *= obs.sum() / exp.sum()
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_stats_serialization():
    s = TrajectoryStats(10, 9, 4.5, 0.3, 100, 1)
    assert s.to_dict() == {
        "runs": 10, "hits": 9, "censored": 1, "mean_steps": 4.5,
        "standard_error": 0.3, "cap": 100, "seed": 1,
    }
