"""Streaming Lloyd's: every sample pulls its nearest center toward itself by a fixed rate.

The engine sees points and eta only.
"""
import logging
import math
from typing import Any, Dict, Optional, Tuple, Union
import numpy as np
from app.core.errors import ConfigError
from app.schemas.clustering import CenterEstimates, InitResult, StepRecord
from app.schemas.metrics import ErrorTrace
from app.schemas.mixture import MixtureModel
from app.services.metrics import TraceRecorder
from app.services.mixture_gen import PointStream

logger = logging.getLogger(__name__)


def eta_hard(k: int, N: int) -> float:
    """3 k ln(3N) / N."""
    if k < 1 or N < 1:
        raise ConfigError(f"need k >= 1 and N >= 1, got k={k}, N={N}")
    eta = 3 * k * math.log(3 * N) / N
    if eta >= 1:
        raise ConfigError(f"eta = {eta:.6g} >= 1: N={N} is too small for k={k}", {"eta": eta, "k": k, "N": N})
    return eta


def assign(x: np.ndarray, centers: np.ndarray) -> int:
    """Index of the nearest center; the lowest index wins ties."""
    diff = np.asarray(centers) - x
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def _move(centers: np.ndarray, winner: int, x: np.ndarray, eta: float) -> float:
    """Move centers[winner] to (1 - eta) * center + eta * x in place; returns the distance moved."""
    delta = x - centers[winner]
    if eta == 1.0:
        centers[winner] = x
    else:
        centers[winner] = centers[winner] + eta * delta
    return eta * math.sqrt(float(delta @ delta))


def step(estimates: CenterEstimates, x: np.ndarray, eta: Optional[float] = None) -> Tuple[CenterEstimates, StepRecord]:
    eta = estimates.eta if eta is None else eta
    if not 0 < eta <= 1:
        raise ConfigError(f"eta must lie in (0, 1], got {eta}")
    x = np.asarray(x, dtype=np.float64)
    centers = estimates.centers.copy()
    winner = assign(x, centers)
    moved = _move(centers, winner, x, eta)
    updated = CenterEstimates(centers=centers, t=estimates.t + 1, eta=eta)
    record = StepRecord(t=updated.t, winner=winner, moved_delta=moved, point_norm=float(np.linalg.norm(x)))
    return updated, record


class StreamingLloyd:
    """Mutable engine state for long runs; ``step`` is the same update one sample at a time."""

    def __init__(self, centers: np.ndarray, eta: float, t: int = 0):
        if not 0 < eta <= 1:
            raise ConfigError(f"eta must lie in (0, 1], got {eta}")
        self.centers = np.array(centers, dtype=np.float64, copy=True)
        self.eta = eta
        self.t = t

    def partial_fit(self, X: np.ndarray, recorder: Optional[TraceRecorder] = None) -> None:
        centers, eta = self.centers, self.eta
        for x in X:
            diff = centers - x
            winner = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
            _move(centers, winner, x, eta)
            self.t += 1
            if recorder is not None:
                recorder.observe(self.t, centers, winner, moved=winner)

    def estimates(self) -> CenterEstimates:
        return CenterEstimates(centers=self.centers.copy(), t=self.t, eta=self.eta)

    def checkpoint(self) -> Dict[str, Any]:
        return {"t": self.t, "eta": self.eta, "centers": self.centers.tolist()}

    @classmethod
    def from_checkpoint(cls, data: Dict[str, Any]) -> "StreamingLloyd":
        return cls(np.asarray(data["centers"], dtype=np.float64), float(data["eta"]), int(data["t"]))


def run(
    stream: PointStream,
    init: Union[InitResult, np.ndarray],
    N: int,
    eta: Optional[float] = None,
    truth: Optional[MixtureModel] = None,
    trace_stride: Optional[int] = None,
    engine: Optional[StreamingLloyd] = None,
) -> Tuple[CenterEstimates, ErrorTrace]:
    """Apply N single-sample updates in stream order.

    With ``truth`` the trace carries per-cluster errors and the proximity flag
    (radius one tenth of the closest pair distance); otherwise only t and winners.
    Passing ``engine`` resumes a checkpointed run instead of starting from ``init``.
    """
    if N < 1:
        raise ConfigError(f"N must be at least 1, got {N}")
    if engine is None:
        centers = init.centers if isinstance(init, InitResult) else np.asarray(init, dtype=np.float64)
        engine = StreamingLloyd(centers, eta if eta is not None else eta_hard(len(centers), N))
    recorder = TraceRecorder(
        engine.centers,
        engine.t + N,
        truth=None if truth is None else truth.means,
        radius=math.inf if truth is None else truth.min_distance() / 10.0,
        stride=trace_stride,
        start=engine.t,
    )
    logger.info(f"Streaming Lloyd's: k={len(engine.centers)} N={N} eta={engine.eta:.6g}")
    for X in stream.batches(N):
        engine.partial_fit(X, recorder)
    return engine.estimates(), recorder.trace()
