"""End-to-end experiment checks; each takes seconds to minutes.

Run with ``pytest -m slow``.
"""
import itertools
import math
import numpy as np
import pytest
from scipy.stats import norm
from app.schemas.clustering import CenterEstimates
from app.schemas.experiment import RunConfig, SweepRequest
from app.services import harness
from app.services.metrics import matched_error
from app.services.mixture_gen import make_model
from app.services.offline_oracle import mc_em_contraction, mc_floor, mc_misclassification
from app.services.stream_lloyd import assign, step

pytestmark = pytest.mark.slow


def mean_final_error(seeds, **config):
    return float(np.mean([harness.execute_run(RunConfig(seed=s, **config)).summary.final_error for s in seeds]))

def test_initialization_lands_near_means():
    """Integration test: InitAlg puts every center within C sigma / 20 on at least 18 of 20 seeds"""
    passed = 0
    for seed in range(20):
        report = harness.init_check(RunConfig(k=4, d=20, C=8.0, sigma=1.0, seed=seed, block_size_B=2000,
                                              retained_count=1600, N0=40 * 2000 + 1600))
        passed += report.passed
    assert passed >= 18

def test_variance_rate_in_n():
    base = RunConfig(algorithm="hard", k=2, d=10, C=8.0, sigma=1.0, init_mode="true-means", seed=100)
    report = harness.sweep(SweepRequest(base=base, axis="N", values=[25_000, 50_000, 100_000, 200_000], repeats=10))
    assert all(cell.status == "ok" for cell in report.cells)
    assert -1.05 < report.rate_fit.exponent < -0.75

def test_approximation_floor_at_small_separation():
    """Integration test: the C=3 asymptote sits well above the C=8 one on the same seeds"""
    common = dict(algorithm="hard", k=2, d=10, sigma=1.0, N=800_000, init_mode="true-means")
    seeds = range(5)
    assert mean_final_error(seeds, C=3.0, **common) >= 5 * mean_final_error(seeds, C=8.0, **common)

    C = 4.0
    floor = mc_floor(make_model(2, 2, C, 1.0, "axis-aligned"), seed=0).total
    assert 0 < floor <= math.exp(-C ** 2 / 8) * (C ** 2 + 2)

def test_em_is_consistent_where_lloyd_floors():
    seeds = range(20)
    common = dict(k=2, d=10, C=3.0, sigma=1.0, init_mode="true-means", placement="axis-aligned")
    soft_short = mean_final_error(seeds, algorithm="soft", N=200_000, **common)
    soft_long = mean_final_error(seeds, algorithm="soft", N=800_000, **common)
    hard_short = mean_final_error(seeds, algorithm="hard", N=200_000, **common)
    hard_long = mean_final_error(seeds, algorithm="hard", N=800_000, **common)
    assert 2.5 <= soft_short / soft_long <= 6
    assert hard_short / hard_long < 1.5

def test_proximity_flag_survives_whole_stream():
    flags = [
        harness.execute_run(RunConfig(k=2, d=10, C=8.0, sigma=1.0, N=200_000, seed=seed,
                                      init_mode="perturbed", delta=0.4)).summary.it_flag
        for seed in range(20)
    ]
    assert sum(flags) >= 19

@pytest.mark.parametrize("C", [4.0, 6.0, 8.0])
def test_misclassification_matches_tail(C):
    model = make_model(2, 1, C, 1.0, "axis-aligned")
    p = norm.cdf(-C / 2)
    estimate = mc_misclassification(model, model.means, 0, 1, trials=100_000, seed=int(C))
    assert abs(estimate.estimate - p) <= 4 * math.sqrt(p * (1 - p) / 100_000)

def test_em_contraction_factor():
    C = 8.0
    model = make_model(2, 10, C, 1.0, "axis-aligned")
    direction = np.zeros(10)
    direction[1] = 1.0
    estimate = mc_em_contraction(model, model.means[0] + (C / 10) * direction, trials=1_000_000, seed=3)
    assert estimate.estimate <= 1 / (8 * C ** 2) + 3 * estimate.std_error

def test_oracle_equivalence():
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        centers = rng.standard_normal((3, 4))
        x = rng.standard_normal(4)
        brute = min(range(3), key=lambda i: float(np.sum((x - centers[i]) ** 2)))
        assert assign(x, centers) == brute

    centers = rng.standard_normal((3, 4))
    x = rng.standard_normal(4)
    moved, record = step(CenterEstimates(centers=centers, t=0, eta=0.5), x, eta=1.0)
    assert np.array_equal(moved.centers[record.winner], x)

    for trial in range(1000):
        k = 2 + trial % 4
        truth, estimates = rng.standard_normal((k, 3)), rng.standard_normal((k, 3))
        brute = min(
            sum(float(np.sum((estimates[p[i]] - truth[i]) ** 2)) for i in range(k))
            for p in itertools.permutations(range(k))
        )
        assert matched_error(estimates, truth)[0] == pytest.approx(brute, rel=1e-12)

def test_determinism_and_accounting(tmp_path):
    config = RunConfig(k=2, d=10, C=8.0, sigma=1.0, N=50_000, seed=42)
    first = harness.execute_run(config, out_dir=str(tmp_path / "a"))
    harness.execute_run(config, out_dir=str(tmp_path / "b"))
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    assert first.summary.samples_consumed == first.summary.init_samples + config.N
