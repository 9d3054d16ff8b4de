"""Batch baselines and Monte-Carlo probes used to check the streaming engines.

Monte-Carlo draws are split into blocks of ``MC_BLOCK`` samples, block b seeded by
``SeedSequence(seed).spawn(...)[b]``, and the per-block sums are added in block order.
"""
import logging
import math
from typing import Iterator, Optional, Tuple
import numpy as np
from scipy.spatial.distance import cdist
from app.core.config import settings
from app.core.errors import (
    ConfigError, EmptyClusterError, InvariantViolation, NonConvergenceError
)
from app.schemas.clustering import FloorEstimate, MonteCarloEstimate, OracleReport
from app.schemas.mixture import MixtureModel
from app.services.stream_em import POSTERIOR_TEMPERATURE

logger = logging.getLogger(__name__)

MC_BLOCK = 65536
MIN_MC_TRIALS = 10_000
FLOOR_TOL = 1e-7


def _objective(points: np.ndarray, centers: np.ndarray) -> Tuple[float, np.ndarray]:
    d2 = cdist(points, centers, "sqeuclidean")
    labels = np.argmin(d2, axis=1)
    return float(d2[np.arange(len(points)), labels].sum()), labels


def _converged(old: np.ndarray, new: np.ndarray, tol: float) -> bool:
    movement = float(np.max(np.linalg.norm(new - old, axis=-1)))
    return movement <= tol * (1.0 + float(np.max(np.linalg.norm(new, axis=-1))))


def offline_lloyd(points: np.ndarray, init_centers: np.ndarray, max_iters: int = 100,
                  tol: float = settings.ORACLE_TOL) -> OracleReport:
    """Classical batch Lloyd's; an empty cluster halts the run instead of being reseeded."""
    if max_iters < 1:
        raise ConfigError(f"max_iters must be at least 1, got {max_iters}")
    X = np.asarray(points, dtype=np.float64)
    centers = np.array(init_centers, dtype=np.float64, copy=True)
    k = len(centers)
    history = []
    converged = False
    iteration = 0
    for iteration in range(1, max_iters + 1):
        objective, labels = _objective(X, centers)
        if history and objective > history[-1] * (1 + 1e-12) + 1e-12:
            raise InvariantViolation(
                f"objective increased from {history[-1]:.17g} to {objective:.17g}",
                {"iteration": iteration},
            )
        history.append(objective)
        counts = np.bincount(labels, minlength=k)
        if np.any(counts == 0):
            raise EmptyClusterError(
                f"cluster(s) {np.flatnonzero(counts == 0).tolist()} received no points",
                {"iteration": iteration, "counts": counts.tolist()},
            )
        updated = np.zeros_like(centers)
        np.add.at(updated, labels, X)
        updated /= counts[:, None]
        done = _converged(centers, updated, tol)
        centers = updated
        if done:
            converged = True
            break
    final_objective, _ = _objective(X, centers)
    logger.debug(f"Offline Lloyd's stopped after {iteration} iterations (converged={converged})")
    return OracleReport(final_centers=centers, iterations=iteration, converged=converged,
                        final_objective=final_objective, objective_history=history)


def offline_em2(points: np.ndarray, init_nu: np.ndarray, sigma: float, max_iters: int = 100,
                tol: float = settings.ORACLE_TOL, temperature: float = POSTERIOR_TEMPERATURE) -> OracleReport:
    """Batch symmetric two-component EM: nu <- mean((2w - 1) x)."""
    if max_iters < 1:
        raise ConfigError(f"max_iters must be at least 1, got {max_iters}")
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    X = np.asarray(points, dtype=np.float64)
    nu = np.asarray(init_nu, dtype=np.float64).copy()
    scale = temperature * sigma * sigma
    converged = False
    iteration = 0
    for iteration in range(1, max_iters + 1):
        signed = np.tanh(2.0 * (X @ nu) / scale)
        updated = (signed[:, None] * X).mean(axis=0)
        done = _converged(nu, updated, tol)
        nu = updated
        if done:
            converged = True
            break
    pair = np.vstack([nu, -nu])
    objective, _ = _objective(X, pair)
    return OracleReport(final_centers=pair, iterations=iteration, converged=converged, final_objective=objective)


def _mc_blocks(trials: int, seed: int) -> Iterator[Tuple[np.random.Generator, int]]:
    n_blocks = math.ceil(trials / MC_BLOCK)
    for b, child in enumerate(np.random.SeedSequence(seed).spawn(n_blocks)):
        yield np.random.default_rng(child), min(MC_BLOCK, trials - b * MC_BLOCK)


def _draw_component(model: MixtureModel, j: int, rng: np.random.Generator, n: int) -> np.ndarray:
    return model.means[j] + model.noise_scales()[j] * rng.standard_normal((n, model.d))


def _draw_mixture(model: MixtureModel, rng: np.random.Generator, n: int) -> np.ndarray:
    labels = rng.choice(model.k, size=n, p=model.weights)
    return model.means[labels] + model.noise_scales()[labels][:, None] * rng.standard_normal((n, model.d))


def mc_misclassification(model: MixtureModel, centers: np.ndarray, i: int, j: int,
                         trials: int = 100_000, seed: int = 0) -> MonteCarloEstimate:
    """Fraction of component-j samples at least as close to centers[i] as to centers[j]."""
    if i == j:
        raise ConfigError("misclassification needs two distinct components")
    if trials < MIN_MC_TRIALS:
        raise ConfigError(f"need at least {MIN_MC_TRIALS} trials, got {trials}")
    centers = np.asarray(centers, dtype=np.float64)
    hits = 0
    for rng, n in _mc_blocks(trials, seed):
        X = _draw_component(model, j, rng, n)
        to_i = np.einsum("ij,ij->i", X - centers[i], X - centers[i])
        to_j = np.einsum("ij,ij->i", X - centers[j], X - centers[j])
        hits += int(np.count_nonzero(to_i <= to_j))
    p = hits / trials
    return MonteCarloEstimate(estimate=p, std_error=math.sqrt(p * (1 - p) / trials), trials=trials)


def mc_floor(model: MixtureModel, trials: int = 200_000, seed: int = 0, damping: float = 0.5,
             max_iters: int = 100, tol: float = FLOOR_TOL) -> FloorEstimate:
    """Per-center squared error at the fixed point of population Lloyd's started from the true means.

    The population is approximated by ``trials`` samples per component whose
    noise is drawn once, centered to zero mean, and reused every iteration.
    """
    if model.k < 2:
        raise ConfigError("the floor needs k >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    noise = [rng.standard_normal((trials, model.d)) for _ in range(model.k)]
    X = np.concatenate([model.means[j] + model.noise_scales()[j] * (z - z.mean(axis=0))
                        for j, z in enumerate(noise)])
    sample_weight = np.repeat(model.weights, trials)
    centers = model.means.copy()
    for iteration in range(1, max_iters + 1):
        labels = np.argmin(cdist(X, centers, "sqeuclidean"), axis=1)
        mass = np.bincount(labels, weights=sample_weight, minlength=model.k)
        if np.any(mass == 0):
            raise EmptyClusterError("a center lost every sample during the floor iteration")
        population = np.zeros_like(centers)
        np.add.at(population, labels, X * sample_weight[:, None])
        population /= mass[:, None]
        updated = centers + damping * (population - centers)
        done = _converged(centers, updated, tol)
        centers = updated
        if done:
            per_center = np.einsum("ij,ij->i", centers - model.means, centers - model.means)
            logger.debug(f"Population Lloyd's converged after {iteration} damped iterations")
            return FloorEstimate(per_center=per_center.tolist(), total=float(per_center.sum()),
                                 iterations=iteration, trials=trials)
    raise NonConvergenceError(f"population Lloyd's did not settle within {max_iters} damped iterations")


def mc_em_contraction(model: MixtureModel, nu: np.ndarray, trials: int = 1_000_000, seed: int = 0,
                      temperature: float = POSTERIOR_TEMPERATURE) -> MonteCarloEstimate:
    """gamma in y = 2 gamma (nu - mu) + mu for the population soft update y = E[(2w - 1) x]."""
    if not model.is_symmetric_pair():
        raise ConfigError("contraction needs a two-component mixture with means +mu and -mu")
    if not model.sigma > 0:
        raise ConfigError("contraction needs sigma > 0")
    mu = model.means[0]
    nu = np.asarray(nu, dtype=np.float64)
    gap = nu - mu
    norm2 = float(gap @ gap)
    if norm2 == 0:
        raise ConfigError("nu must differ from the true mean")
    scale = temperature * model.sigma ** 2
    total, total_sq = 0.0, 0.0
    for rng, n in _mc_blocks(trials, seed):
        X = _draw_mixture(model, rng, n)
        signed = np.tanh(2.0 * (X @ nu) / scale)
        contrib = ((signed[:, None] * X - mu) @ gap) / (2.0 * norm2)
        total += float(contrib.sum())
        total_sq += float(contrib @ contrib)
    gamma = total / trials
    variance = max(total_sq / trials - gamma * gamma, 0.0)
    return MonteCarloEstimate(estimate=gamma, std_error=math.sqrt(variance / trials), trials=trials)


def mc_one_step_error(model: MixtureModel, centers: np.ndarray, eta: float, trials: int = 100_000,
                      seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Expected per-center squared error after one hard update from fixed centers.

    centers[i] is compared with means[i]. Returns (means, standard errors).
    """
    centers = np.asarray(centers, dtype=np.float64)
    k = model.k
    sums, sums_sq = np.zeros(k), np.zeros(k)
    before = np.einsum("ij,ij->i", centers - model.means, centers - model.means)
    for rng, n in _mc_blocks(trials, seed):
        X = _draw_mixture(model, rng, n)
        winners = np.argmin(cdist(X, centers, "sqeuclidean"), axis=1)
        after = np.tile(before, (n, 1))
        moved = centers[winners] + eta * (X - centers[winners]) - model.means[winners]
        after[np.arange(n), winners] = np.einsum("ij,ij->i", moved, moved)
        sums += after.sum(axis=0)
        sums_sq += (after * after).sum(axis=0)
    mean = sums / trials
    std_error = np.sqrt(np.maximum(sums_sq / trials - mean * mean, 0.0) / trials)
    return mean, std_error


def mc_selection_frequency(model: MixtureModel, centers: np.ndarray, trials: int = 100_000,
                           seed: int = 0) -> np.ndarray:
    """Fraction of mixture samples each center wins."""
    centers = np.asarray(centers, dtype=np.float64)
    wins = np.zeros(len(centers), dtype=np.int64)
    for rng, n in _mc_blocks(trials, seed):
        X = _draw_mixture(model, rng, n)
        wins += np.bincount(np.argmin(cdist(X, centers, "sqeuclidean"), axis=1), minlength=len(centers))
    return wins / trials
