import math
import os
import pytest
from pydantic import ValidationError
from app.core.errors import ConfigError
from app.schemas.experiment import RunConfig, SweepRequest
from app.services import harness
from app.services.stream_em import eta_soft


def noise_free(**overrides):
    values = {"algorithm": "hard", "k": 2, "d": 5, "C": 8.0, "sigma": 0.0, "N": 200,
              "seed": 1, "init_mode": "true-means", "placement": "axis-aligned"}
    values.update(overrides)
    return RunConfig(**values)

def test_derive_seeds_is_deterministic():
    assert harness.derive_seeds(7) == harness.derive_seeds(7)
    assert len(set(harness.derive_seeds(7))) == 3
    assert harness.derive_seeds(7) != harness.derive_seeds(8)

def test_config_rejects_bad_combinations():
    with pytest.raises(ValidationError):
        RunConfig(algorithm="soft", k=3)
    with pytest.raises(ValidationError):
        RunConfig(init_mode="perturbed")
    with pytest.raises(ValidationError):
        RunConfig(init_mode="true-means", sigma_known=False)
    with pytest.raises(ValidationError):
        RunConfig(k=3, weights=[0.5, 0.5])
    with pytest.raises(ValidationError):
        RunConfig(eta=1.5)

def test_resolve_n0_defaults():
    assert harness.resolve_n0(RunConfig(k=2, d=5)) == 40 * 9 + 50
    assert harness.resolve_n0(RunConfig(k=2, d=5, N0=1234)) == 1234

def test_noise_free_hard_run_is_exact():
    """Unit test: sigma = 0 started at the means never moves"""
    summary = harness.execute_run(noise_free()).summary
    assert summary.final_error == 0.0
    assert summary.it_flag
    assert summary.samples_consumed == 200
    assert summary.init_samples == 0
    assert summary.N0 == 0

def test_noise_free_soft_run_uses_unit_scale():
    summary = harness.execute_run(noise_free(algorithm="soft")).summary
    assert summary.sigma_used == 1.0
    assert summary.final_error <= 1e-8

def test_run_accounting_with_initalg(small_run_config):
    config = RunConfig(**{**small_run_config, "init_mode": "initalg"})
    summary = harness.execute_run(config).summary
    assert summary.samples_consumed == summary.init_samples + config.N
    assert summary.init_samples >= harness.resolve_n0(config)
    assert summary.init_attempts >= 1

def test_perturbed_init_distance(small_run_config):
    config = RunConfig(**{**small_run_config, "init_mode": "perturbed", "delta": 0.5, "N": 10})
    summary = harness.execute_run(config).summary
    assert summary.init_max_distance == pytest.approx(0.5, rel=1e-9)

def test_run_writes_reproducible_artifacts(tmp_path, small_run_config):
    """Integration test: the same configuration writes byte-identical traces"""
    config = RunConfig(**small_run_config)
    first = harness.execute_run(config, out_dir=str(tmp_path / "a"))
    second = harness.execute_run(config, out_dir=str(tmp_path / "b"))
    trace_a = open(tmp_path / "a" / "trace.csv").read()
    assert trace_a == open(tmp_path / "b" / "trace.csv").read()
    assert os.path.exists(tmp_path / "a" / "summary.json")
    assert first.summary.trace_path.endswith("trace.csv")
    assert first.summary.final_error == second.summary.final_error
    assert trace_a.splitlines()[0] == "t,e2_0,e2_1,vmax,it_flag,winner"

def test_sweep_over_n(tmp_path):
    request = SweepRequest(base=noise_free(), axis="N", values=[100, 300], repeats=2, workers=2)
    report = harness.sweep(request, out_dir=str(tmp_path))
    assert [c.index for c in report.cells] == [0, 1, 2, 3]
    assert [c.seed for c in report.cells] == [1, 2, 3, 4]
    assert all(c.status == "ok" and c.final_error == 0.0 for c in report.cells)
    assert [p.n_ok for p in report.summary] == [2, 2]
    # two values are too few for a rate fit
    assert report.rate_fit is None
    rows = harness.read_sweep_csv(str(tmp_path / "sweep.csv"))
    assert [r["kind"] for r in rows] == ["cell"] * 4 + ["summary"] * 2
    assert [p.conditional_mean for p in report.summary] == [0.0, 0.0]
    assert [p.it_rate for p in report.summary] == [1.0, 1.0]
    assert rows[-1]["conditional_mean"] == "0"

def test_sweep_keeps_failed_cells():
    """Unit test: an infeasible cell is reported failed and the others still run"""
    base = noise_free(k=3, placement="simplex-scaled")
    report = harness.sweep(SweepRequest(base=base, axis="d", values=[1, 5], repeats=1))
    failed, ok = report.cells
    assert failed.status == "failed"
    assert failed.error_code == ConfigError.code
    assert ok.status == "ok"
    assert report.summary[0].n_failed == 1
    assert report.summary[0].mean is None
    assert report.summary[0].conditional_mean is None
    assert report.summary[0].it_rate is None
    assert report.summary[1].n_ok == 1

def test_compare_requires_pair():
    with pytest.raises(ConfigError):
        harness.compare(noise_free(k=3), repeats=2)

def test_compare_noise_free_is_all_ties():
    report = harness.compare(noise_free(N=100), repeats=3, workers=1)
    assert [p.seed for p in report.pairs] == [1, 2, 3]
    assert report.ties == 3
    assert report.soft_wins == report.hard_wins == 0
    assert report.sign_test_p == 1.0

def test_init_check_noise_free():
    report = harness.init_check(noise_free(C=4.0))
    assert report.passed
    assert report.threshold == pytest.approx(4.0 / 20)
    assert report.samples_consumed == 40 * 9 + 50

def test_floor_report():
    report = harness.floor(RunConfig(k=2, d=2, C=12.0, placement="simplex-scaled"), trials=20_000)
    assert report.total <= 1e-8
    assert report.reference == pytest.approx(math.exp(-18.0) * 146.0)

def test_decomposition_noise_free_is_all_zero(tmp_path):
    """Unit test: sigma = 0 gives zero floor, variance and bias on paired runs"""
    report = harness.decomposition(noise_free(), [200, 100], repeats=2, workers=1, out_dir=str(tmp_path))
    assert report.N_values == [100, 200]
    assert report.seeds == [1, 2]
    assert report.delta == harness.DEFAULT_DELTA
    assert report.true_init == {100: [0.0, 0.0], 200: [0.0, 0.0]}
    assert report.perturbed_init == [0.0, 0.0]
    result = report.decomposition
    assert result.floor == pytest.approx(0.0, abs=1e-12)
    assert result.variance == pytest.approx(0.0, abs=1e-12)
    assert result.bias == 0.0
    assert result.conditional_mean == 0.0
    assert result.it_rate == 1.0
    assert os.path.exists(tmp_path / "decomposition.json")

def test_decomposition_needs_two_values_of_n():
    with pytest.raises(ConfigError):
        harness.decomposition(noise_free(), [100, 100], repeats=2)

@pytest.mark.slow
def test_compare_soft_wins_at_c3():
    config = RunConfig(k=2, d=5, C=3.0, N=50_000, seed=0, init_mode="true-means", placement="axis-aligned")
    report = harness.compare(config, repeats=20)
    assert report.soft_wins >= 16

@pytest.mark.slow
def test_compare_agrees_at_c12_with_a_shared_rate():
    """Integration test: without a floor hard and soft errors stay within 2x at equal step sizes"""
    config = RunConfig(k=2, d=5, C=12.0, N=50_000, seed=0, init_mode="true-means", placement="axis-aligned",
                       eta=eta_soft(50_000))
    report = harness.compare(config, repeats=20)
    hard = sum(p.hard_error for p in report.pairs)
    soft = sum(p.soft_error for p in report.pairs)
    assert 0.5 <= hard / soft <= 2.0

@pytest.mark.slow
def test_decomposition_soft_floor_vanishes():
    config = RunConfig(algorithm="soft", k=2, d=5, C=8.0, init_mode="true-means", placement="axis-aligned")
    result = harness.decomposition(config, [10_000, 20_000, 40_000, 80_000], repeats=20).decomposition
    assert abs(result.floor) <= 3 * result.floor_std_error

@pytest.mark.slow
def test_decomposition_hard_floor_orders_with_separation():
    """Integration test: the fitted hard floor at C=3 sits above the one at C=8 on the same seeds"""
    Ns = [25_000, 50_000, 100_000, 200_000]
    floors = {}
    for C in (3.0, 8.0):
        config = RunConfig(k=2, d=5, C=C, init_mode="true-means", placement="axis-aligned")
        floors[C] = harness.decomposition(config, Ns, repeats=5).decomposition.floor
    assert floors[3.0] > floors[8.0]
