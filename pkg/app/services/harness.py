"""Experiment orchestration shared by the CLI and the HTTP service.

Seeds: ``SeedSequence(config.seed).spawn(3)`` gives the placement, stream and init
seeds of a run; sweep cell i runs with ``base.seed + i``.
"""
import csv
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple
import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError
from scipy.stats import binomtest
from app.core.config import settings
from app.core.errors import AccountingError, ConfigError, StreamixError
from app.schemas.clustering import InitConfig, InitResult
from app.schemas.experiment import (
    ComparePair, CompareReport, DecompositionReport, FloorReport, InitCheckReport, RunConfig, RunSummary,
    SweepCellResult, SweepPoint, SweepReport, SweepRequest
)
from app.schemas.metrics import ErrorTrace
from app.schemas.mixture import MixtureModel
from app.services import artifacts
from app.services.init_pca import default_block_size, default_retained_count, estimate_sigma, init_alg
from app.services.metrics import decompose, fit_rate, matched_error
from app.services.mixture_gen import PointStream, make_model, point_stream
from app.services.offline_oracle import mc_floor
from app.services.stream_em import run_soft
from app.services.stream_lloyd import run

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
# perturbation radius, in units of sigma, for the bias proxy
DEFAULT_DELTA = 0.4


class RunOutcome(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    summary: RunSummary
    trace: ErrorTrace
    centers: np.ndarray
    model: MixtureModel


def derive_seeds(seed: int) -> Tuple[int, int, int]:
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(int(child.generate_state(1)[0]) for child in children)


def build_model(config: RunConfig) -> MixtureModel:
    placement_seed, _, _ = derive_seeds(config.seed)
    return make_model(config.k, config.d, config.C, config.sigma, config.placement, placement_seed,
                      weights=config.weights)


def resolve_n0(config: RunConfig) -> int:
    if config.N0 is not None:
        return config.N0
    B = config.block_size_B or default_block_size(config.d)
    m = config.retained_count or default_retained_count(config.k)
    return 40 * B + m


def initialize(config: RunConfig, model: MixtureModel, stream: PointStream) -> InitResult:
    _, _, init_seed = derive_seeds(config.seed)
    if config.init_mode == "initalg":
        return init_alg(
            stream, config.d, config.k, resolve_n0(config),
            InitConfig(block_size_B=config.block_size_B, retained_count=config.retained_count,
                       max_init_retries=config.max_init_retries, seed=init_seed),
        )
    centers = model.means.copy()
    if config.init_mode == "perturbed" and model.sigma > 0:
        directions = np.random.default_rng(init_seed).standard_normal(centers.shape)
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        centers = centers + config.delta * model.sigma * directions
    return InitResult(centers=centers, cluster_sizes=[0] * config.k, samples_consumed=0, retained_count=0, attempts=0)


def _max_matched_distance(centers: np.ndarray, model: MixtureModel) -> float:
    _, perm = matched_error(centers, model.means)
    return float(np.linalg.norm(centers[perm] - model.means, axis=1).max())


def execute_run(config: RunConfig, out_dir: Optional[str] = None) -> RunOutcome:
    """Generate, initialize, stream and account for one configured run.

    When ``out_dir`` is given the trace CSV and summary JSON are written there.
    """
    started = time.perf_counter()
    model = build_model(config)
    _, stream_seed, _ = derive_seeds(config.seed)
    stream = point_stream(model, stream_seed, config.noise_kind)
    logger.info(f"Run start: {config.algorithm} k={config.k} d={config.d} C={config.C} N={config.N} seed={config.seed}")

    init = initialize(config, model, stream)
    init_distance = _max_matched_distance(init.centers, model)

    if config.algorithm == "hard":
        estimates, trace = run(stream, init, config.N, eta=config.eta, truth=model, trace_stride=config.trace_stride)
        centers, eta = estimates.centers, estimates.eta
        sigma_used = model.sigma
    else:
        if config.sigma_known:
            # a noise-free model keeps the unit length scale its means were laid out on
            sigma_used = model.sigma if model.sigma > 0 else 1.0
        else:
            sigma_used = estimate_sigma(init, config.d, config.k)
        _, perm = matched_error(init.centers, model.means)
        init_nu = (init.centers[perm[0]] - init.centers[perm[1]]) / 2.0
        pair, trace = run_soft(stream, init_nu, config.N, sigma_used, eta=config.eta, truth=model,
                               temperature=config.temperature, trace_stride=config.trace_stride)
        centers, eta = pair.pair(), pair.eta

    expected = init.samples_consumed + config.N
    if stream.consumed != expected:
        raise AccountingError(f"stream supplied {stream.consumed} samples, expected {expected}",
                              {"consumed": stream.consumed, "expected": expected})

    final_error, perm = matched_error(centers, model.means)
    per_cluster = np.einsum("ij,ij->i", centers[perm] - model.means, centers[perm] - model.means)
    wall = time.perf_counter() - started
    summary = RunSummary(
        algorithm=config.algorithm, k=config.k, d=config.d, C=config.C, sigma=config.sigma,
        N=config.N, N0=init.samples_consumed, seed=config.seed, init_mode=config.init_mode,
        final_error=final_error, final_per_cluster=per_cluster.tolist(), it_flag=trace.final_it_flag,
        eta=eta, samples_consumed=stream.consumed, init_samples=init.samples_consumed,
        init_attempts=init.attempts, init_max_distance=init_distance, sigma_used=sigma_used, wall_time_s=wall,
    )
    if out_dir:
        summary.trace_path = artifacts.write_trace_csv(trace, os.path.join(out_dir, "trace.csv"))
        artifacts.write_json(summary.model_dump(), os.path.join(out_dir, "summary.json"))
    logger.info(f"Run finished: final matched error {final_error:.12g}, proximity flag {summary.it_flag}, {wall:.2f}s")
    return RunOutcome(summary=summary, trace=trace, centers=centers, model=model)


def _cell_config(base: RunConfig, axis: str, value: float, seed: int) -> RunConfig:
    update: Dict[str, Any] = {"seed": seed}
    update[axis] = float(value) if axis == "C" else int(value)
    return RunConfig(**{**base.model_dump(), **update})


def _run_cell(base: RunConfig, axis: str, index: int, value: float, repeat: int) -> SweepCellResult:
    seed = base.seed + index
    try:
        outcome = execute_run(_cell_config(base, axis, value, seed))
        return SweepCellResult(index=index, value=value, repeat=repeat, seed=seed, status="ok",
                               final_error=outcome.summary.final_error, it_flag=outcome.summary.it_flag)
    except ValidationError as e:
        logger.warning(f"Sweep cell {index} rejected: {e}")
        return SweepCellResult(index=index, value=value, repeat=repeat, seed=seed, status="failed",
                               error_code=ConfigError.code)
    except StreamixError as e:
        logger.warning(f"Sweep cell {index} failed: {e.message}")
        return SweepCellResult(index=index, value=value, repeat=repeat, seed=seed, status="failed", error_code=e.code)
    except Exception as e:
        logger.error(f"Sweep cell {index} crashed: {e}", exc_info=True)
        return SweepCellResult(index=index, value=value, repeat=repeat, seed=seed, status="failed", error_code="internal")


def _mean_se(values: List[float]) -> Tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    arr = np.asarray(values)
    se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return float(arr.mean()), se


def sweep(request: SweepRequest, out_dir: Optional[str] = None) -> SweepReport:
    if len(request.values) < 2:
        raise ConfigError("a sweep needs at least 2 values")
    jobs = [(value, repeat) for value in request.values for repeat in range(request.repeats)]
    workers = request.workers or settings.STREAMIX_THREADS
    logger.info(f"Sweep over {request.axis} with {len(jobs)} cells on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_cell, request.base, request.axis, index, value, repeat)
                   for index, (value, repeat) in enumerate(jobs)]
        cells = sorted((future.result() for future in futures), key=lambda cell: cell.index)

    summary = []
    for value in request.values:
        ok_cells = [c for c in cells if c.value == value and c.status == "ok"]
        ok = [c.final_error for c in ok_cells]
        flagged = [c.final_error for c in ok_cells if c.it_flag]
        failed = sum(1 for c in cells if c.value == value and c.status != "ok")
        mean, se = _mean_se(ok)
        summary.append(SweepPoint(
            value=value, mean=mean, std_error=se, n_ok=len(ok), n_failed=failed,
            conditional_mean=float(np.mean(flagged)) if flagged else None,
            it_rate=len(flagged) / len(ok) if ok else None,
        ))

    rate = None
    if request.axis == "N":
        points = [(p.value, p.mean) for p in summary if p.mean is not None]
        try:
            rate = fit_rate(points)
        except StreamixError as e:
            logger.info(f"No rate fit for this sweep: {e.message}")

    report = SweepReport(axis=request.axis, cells=cells, summary=summary, rate_fit=rate)
    if out_dir:
        write_sweep_csv(report, os.path.join(out_dir, "sweep.csv"))
        artifacts.write_json(report.model_dump(), os.path.join(out_dir, "sweep.json"))
    return report


SWEEP_COLUMNS = [
    "kind", "index", "value", "repeat", "seed", "status", "final_error", "it_flag", "mean", "std_error", "n_ok",
    "conditional_mean",
]


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else artifacts.format_number(value)


def write_sweep_csv(report: SweepReport, path: str) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for c in report.cells:
            flag = "" if c.it_flag is None else ("1" if c.it_flag else "0")
            writer.writerow(["cell", c.index, _fmt(c.value), c.repeat, c.seed, c.status, _fmt(c.final_error), flag, "", "", "", ""])
        for p in report.summary:
            writer.writerow(["summary", "", _fmt(p.value), "", "", "ok" if p.n_ok else "failed", "", "", _fmt(p.mean), _fmt(p.std_error), p.n_ok,
                             _fmt(p.conditional_mean)])
    return path


def read_sweep_csv(path: str) -> List[Dict[str, str]]:
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def _outcome(hard: float, soft: float) -> str:
    if abs(hard - soft) <= TIE_TOL * max(1.0, abs(hard), abs(soft)):
        return "tie"
    return "soft" if soft < hard else "hard"


def compare(config: RunConfig, repeats: int = 20, workers: Optional[int] = None, out_dir: Optional[str] = None) -> CompareReport:
    """Hard and soft updates on identical streams and inits, one pair per seed."""
    if config.k != 2:
        raise ConfigError("compare requires k=2")
    seeds = [config.seed + i for i in range(repeats)]

    def one_pair(seed: int) -> ComparePair:
        base = config.model_dump()
        hard = execute_run(RunConfig(**{**base, "algorithm": "hard", "seed": seed})).summary.final_error
        soft = execute_run(RunConfig(**{**base, "algorithm": "soft", "seed": seed})).summary.final_error
        return ComparePair(seed=seed, hard_error=hard, soft_error=soft, outcome=_outcome(hard, soft))

    with ThreadPoolExecutor(max_workers=workers or settings.STREAMIX_THREADS) as pool:
        pairs = list(pool.map(one_pair, seeds))

    soft_wins = sum(p.outcome == "soft" for p in pairs)
    hard_wins = sum(p.outcome == "hard" for p in pairs)
    decided = soft_wins + hard_wins
    p_value = binomtest(soft_wins, decided, 0.5).pvalue if decided else 1.0
    ratios = [p.hard_error / p.soft_error for p in pairs if p.soft_error > 0]
    report = CompareReport(
        pairs=pairs, soft_wins=soft_wins, hard_wins=hard_wins, ties=len(pairs) - decided,
        sign_test_p=float(p_value), mean_ratio=float(np.mean(ratios)) if ratios else None,
    )
    logger.info(f"Compare: soft {soft_wins}, hard {hard_wins}, ties {report.ties}, p={report.sign_test_p:.4g}")
    if out_dir:
        artifacts.write_json(report.model_dump(), os.path.join(out_dir, "compare.json"))
    return report


def decomposition(config: RunConfig, n_values: Sequence[float], repeats: int = 20, workers: Optional[int] = None,
                  out_dir: Optional[str] = None) -> DecompositionReport:
    """Floor, variance and bias proxies from paired runs.

    Seeds ``config.seed + r`` run from the true means at every N, and again from
    means displaced by delta sigma (``config.delta``, default 0.4) at the largest
    N, so every pair shares its stream. Run failures propagate.
    """
    Ns = sorted({int(n) for n in n_values})
    if len(Ns) < 2:
        raise ConfigError("a decomposition needs at least 2 distinct values of N")
    if repeats < 1:
        raise ConfigError(f"repeats must be at least 1, got {repeats}")
    delta = config.delta if config.delta is not None else DEFAULT_DELTA
    seeds = [config.seed + r for r in range(repeats)]
    base = config.model_dump()
    jobs = [(n, seed, "true-means") for n in Ns for seed in seeds]
    jobs += [(Ns[-1], seed, "perturbed") for seed in seeds]

    def one(job: Tuple[int, int, str]) -> RunSummary:
        n, seed, init_mode = job
        return execute_run(RunConfig(**{**base, "N": n, "seed": seed, "init_mode": init_mode, "delta": delta})).summary

    logger.info(f"Decomposition over N={Ns} with {repeats} seeds ({len(jobs)} runs)")
    with ThreadPoolExecutor(max_workers=workers or settings.STREAMIX_THREADS) as pool:
        summaries = list(pool.map(one, jobs))

    true_init: Dict[int, List[float]] = {n: [] for n in Ns}
    perturbed: List[float] = []
    flags: List[bool] = []
    for (n, _, init_mode), summary in zip(jobs, summaries):
        if init_mode == "perturbed":
            perturbed.append(summary.final_error)
            continue
        true_init[n].append(summary.final_error)
        if n == Ns[-1]:
            flags.append(summary.it_flag)

    result = decompose(true_init, {Ns[-1]: perturbed}, {Ns[-1]: flags})
    report = DecompositionReport(algorithm=config.algorithm, C=config.C, N_values=Ns, seeds=seeds, delta=delta,
                                 decomposition=result, true_init=true_init, perturbed_init=perturbed)
    logger.info(f"Decomposition: floor {result.floor:.6g} +- {result.floor_std_error:.3g}, "
                f"variance {result.variance:.6g}, bias {result.bias:.6g}")
    if out_dir:
        artifacts.write_json(report.model_dump(), os.path.join(out_dir, "decomposition.json"))
    return report


def init_check(config: RunConfig) -> InitCheckReport:
    """Run InitAlg alone and compare the worst matched center distance with C sigma / 20."""
    model = build_model(config)
    _, stream_seed, _ = derive_seeds(config.seed)
    stream = point_stream(model, stream_seed, config.noise_kind)
    init = initialize(config.model_copy(update={"init_mode": "initalg"}), model, stream)
    distance = _max_matched_distance(init.centers, model)
    threshold = model.min_distance() / 20.0
    return InitCheckReport(max_distance=distance, threshold=threshold, passed=distance <= threshold,
                           samples_consumed=init.samples_consumed, cluster_sizes=init.cluster_sizes,
                           attempts=init.attempts)


def floor(config: RunConfig, trials: int = 200_000) -> FloorReport:
    model = build_model(config)
    estimate = mc_floor(model, trials=trials, seed=config.seed)
    reference = math.exp(-config.C ** 2 / 8.0) * (config.C ** 2 + config.k) * config.sigma ** 2
    return FloorReport(C=config.C, k=config.k, d=config.d, per_center=estimate.per_center,
                       total=estimate.total, iterations=estimate.iterations, reference=reference)
