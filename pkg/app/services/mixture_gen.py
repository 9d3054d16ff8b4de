"""Seeded synthetic samples from spherical mixtures.

Samples are generated in fixed chunks of ``CHUNK_SIZE``; chunk ``c`` draws from a
PCG64 generator seeded with ``SeedSequence(seed, spawn_key=(c,))``. Any index
range can therefore be produced independently and partitions of a range
concatenate to the serial stream. Inside a chunk the labels are drawn first,
then the noise (ziggurat normals for the Gaussian law).
"""
import logging
import math
from typing import Callable, Iterator, Optional, Sequence
import numpy as np
from scipy import linalg
from scipy.stats import ortho_group
from app.core.errors import ConfigError, StreamExhaustedError
from app.schemas.mixture import LabeledBatch, MixtureModel

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
PLACEMENTS = ("simplex-scaled", "random-rotated", "axis-aligned")
NOISE_KINDS = ("gaussian", "uniform-ball", "rademacher-scaled")


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)))


def _check_seed(seed: int) -> None:
    if seed < 0:
        raise ConfigError(f"seed must be nonnegative, got {seed}")


def _regular_simplex(k: int) -> np.ndarray:
    """k vertices of a centered regular simplex with unit edge, in k-1 coordinates."""
    centered = np.eye(k) - 1.0 / k
    basis = linalg.orth(centered)
    return centered @ basis / math.sqrt(2.0)


def make_model(
    k: int,
    d: int,
    C_target: float,
    sigma: float,
    placement: str = "simplex-scaled",
    seed: int = 0,
    weights: Optional[Sequence[float]] = None,
    component_sigmas: Optional[Sequence[float]] = None,
) -> MixtureModel:
    """Build a mixture whose closest pair of means sits C_target * sigma apart.

    With sigma = 0 the geometry is laid out at a unit length scale, so the
    means are still C_target apart and the model is noise free.
    """
    if k < 2 or d < 1:
        raise ConfigError(f"need k >= 2 and d >= 1, got k={k}, d={d}")
    if not C_target > 0 or sigma < 0:
        raise ConfigError(f"need C_target > 0 and sigma >= 0, got C_target={C_target}, sigma={sigma}")
    if placement not in PLACEMENTS:
        raise ConfigError(f"unknown placement '{placement}'", {"allowed": list(PLACEMENTS)})
    _check_seed(seed)

    length = C_target * sigma if sigma > 0 else C_target
    means = np.zeros((k, d))
    if placement == "axis-aligned":
        if k == 2:
            means[0, 0] = -length / 2.0
            means[1, 0] = length / 2.0
        else:
            if d < k:
                raise ConfigError(f"axis-aligned placement needs d >= k, got d={d}, k={k}")
            means[:, :k] = np.eye(k) * (length / math.sqrt(2.0))
    else:
        if d < k - 1:
            raise ConfigError(f"d={d} < k-1={k - 1} is infeasible for equal separation")
        means[:, : k - 1] = _regular_simplex(k) * length
        if placement == "random-rotated":
            rng = np.random.default_rng(seed)
            rotation = ortho_group.rvs(d, random_state=rng) if d > 1 else np.array([[rng.choice([-1.0, 1.0])]])
            means = means @ rotation.T

    if weights is None:
        weights = np.full(k, 1.0 / k)
    if component_sigmas is not None:
        component_sigmas = np.asarray(component_sigmas, dtype=np.float64)
        if component_sigmas.shape != (k,) or abs(float(component_sigmas.max()) - sigma) > 1e-12 * max(1.0, sigma):
            raise ConfigError("component_sigmas must list k values whose maximum equals sigma")
    try:
        model = MixtureModel(k=k, d=d, means=means, sigma=sigma, weights=weights, component_sigmas=component_sigmas)
    except ValueError as e:
        raise ConfigError(f"invalid mixture: {e}")
    logger.debug(f"Built {placement} mixture k={k} d={d} C={model.separation():.6g}")
    return model


def _unit_noise(rng: np.random.Generator, n: int, d: int, noise_kind: str) -> np.ndarray:
    # every law has zero mean and unit per-coordinate variance
    if noise_kind == "gaussian":
        return rng.standard_normal((n, d))
    if noise_kind == "uniform-ball":
        direction = rng.standard_normal((n, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = rng.random(n) ** (1.0 / d)
        return direction * (radius * math.sqrt(d + 2.0))[:, None]
    if noise_kind == "rademacher-scaled":
        return rng.integers(0, 2, size=(n, d)).astype(np.float64) * 2.0 - 1.0
    raise ConfigError(f"unknown noise kind '{noise_kind}'", {"allowed": list(NOISE_KINDS)})


def _draw_chunk(model: MixtureModel, seed: int, chunk: int, noise_kind: str):
    rng = chunk_generator(seed, chunk)
    labels = rng.choice(model.k, size=CHUNK_SIZE, p=model.weights)
    noise = _unit_noise(rng, CHUNK_SIZE, model.d, noise_kind)
    points = model.means[labels] + noise * model.noise_scales()[labels][:, None]
    return points, labels


def sample_range(model: MixtureModel, start: int, stop: int, seed: int, noise_kind: str = "gaussian") -> LabeledBatch:
    """Samples with indices in [start, stop) of the stream identified by seed."""
    if start < 0 or stop < start:
        raise ConfigError(f"invalid index range [{start}, {stop})")
    if noise_kind not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind '{noise_kind}'", {"allowed": list(NOISE_KINDS)})
    _check_seed(seed)
    if stop == start:
        return LabeledBatch(points=np.empty((0, model.d)), labels=np.empty(0, dtype=np.int64), start=start)
    first, last = start // CHUNK_SIZE, (stop - 1) // CHUNK_SIZE
    points, labels = [], []
    for chunk in range(first, last + 1):
        chunk_points, chunk_labels = _draw_chunk(model, seed, chunk, noise_kind)
        points.append(chunk_points)
        labels.append(chunk_labels)
    offset = start - first * CHUNK_SIZE
    points = np.concatenate(points)[offset: offset + stop - start]
    labels = np.concatenate(labels)[offset: offset + stop - start]
    return LabeledBatch(points=points, labels=labels, start=start)


def sample_stream(model: MixtureModel, n: int, seed: int) -> LabeledBatch:
    if n < 1:
        raise ConfigError(f"n must be at least 1, got {n}")
    return sample_range(model, 0, n, seed, "gaussian")


def sample_subgaussian_stream(model: MixtureModel, n: int, noise_kind: str, seed: int) -> LabeledBatch:
    if noise_kind not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind '{noise_kind}'", {"allowed": list(NOISE_KINDS)})
    if n < 1:
        raise ConfigError(f"n must be at least 1, got {n}")
    return sample_range(model, 0, n, seed, noise_kind)


class PointStream:
    """Pull-based source of d-vectors; labels never pass through it.

    ``consumed`` counts every sample handed out, which is what the single-pass
    accounting checks.
    """

    def __init__(self, d: int, chunks: Iterator[np.ndarray]):
        self.d = d
        self._chunks = chunks
        self._buffer: Optional[np.ndarray] = None
        self._position = 0
        self._consumed = 0

    @classmethod
    def from_array(cls, points: np.ndarray) -> "PointStream":
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls(points.shape[1], iter([points]))

    @classmethod
    def from_function(cls, d: int, make_chunk: Callable[[int], np.ndarray]) -> "PointStream":
        def chunks():
            chunk = 0
            while True:
                yield make_chunk(chunk)
                chunk += 1
        return cls(d, chunks())

    @property
    def consumed(self) -> int:
        return self._consumed

    def take(self, n: int) -> np.ndarray:
        if n < 0:
            raise ConfigError(f"cannot take {n} samples")
        parts = []
        needed = n
        while needed > 0:
            if self._buffer is None or self._position >= len(self._buffer):
                try:
                    self._buffer = next(self._chunks)
                except StopIteration:
                    raise StreamExhaustedError(
                        f"stream exhausted after {self._consumed} samples",
                        {"consumed": self._consumed, "requested": n},
                    )
                self._position = 0
            count = min(needed, len(self._buffer) - self._position)
            parts.append(self._buffer[self._position: self._position + count])
            self._position += count
            self._consumed += count
            needed -= count
        if not parts:
            return np.empty((0, self.d))
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def batches(self, n: int, size: int = CHUNK_SIZE) -> Iterator[np.ndarray]:
        """Yield exactly n samples in consecutive blocks of at most size rows."""
        remaining = n
        while remaining > 0:
            block = self.take(min(size, remaining))
            remaining -= len(block)
            yield block

    def __iter__(self) -> "PointStream":
        return self

    def __next__(self) -> np.ndarray:
        try:
            return self.take(1)[0]
        except StreamExhaustedError:
            raise StopIteration


def point_stream(model: MixtureModel, seed: int, noise_kind: str = "gaussian") -> PointStream:
    """The label-stripped, unbounded stream of the same samples sample_range produces."""
    if noise_kind not in NOISE_KINDS:
        raise ConfigError(f"unknown noise kind '{noise_kind}'", {"allowed": list(NOISE_KINDS)})
    _check_seed(seed)
    return PointStream.from_function(model.d, lambda chunk: _draw_chunk(model, seed, chunk, noise_kind)[0])
