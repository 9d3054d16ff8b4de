"""Streaming soft-update EM for a balanced pair of spherical Gaussians at +mu and -mu."""
import logging
import math
from typing import Any, Dict, Optional, Tuple
import numpy as np
from scipy.special import expit
from app.core.errors import ConfigError, InvalidInputError
from app.schemas.clustering import SymmetricPairEstimate
from app.schemas.metrics import ErrorTrace
from app.schemas.mixture import MixtureModel
from app.services.metrics import TraceRecorder
from app.services.mixture_gen import PointStream

logger = logging.getLogger(__name__)

# soft_weight at this temperature is the exact Gaussian posterior, whose population fixed point is mu
POSTERIOR_TEMPERATURE = 2.0


def eta_soft(N: int) -> float:
    """3 ln(N) / N."""
    if N < 2:
        raise ConfigError(f"N must be at least 2, got {N}")
    eta = 3 * math.log(N) / N
    if eta >= 1:
        raise ConfigError(f"eta = {eta:.6g} >= 1: N={N} is too small", {"eta": eta, "N": N})
    return eta


def soft_weight(x: np.ndarray, nu: np.ndarray, sigma: float, temperature: float = 1.0) -> float:
    """Responsibility of +nu for x, in logistic form 1 / (1 + exp(-4 <x, nu> / (temperature sigma^2))).

    temperature 1 is the weight exp(-|x-nu|^2/sigma^2) normalized against -nu;
    temperature 2 is the exact Gaussian posterior and the engines' default.
    Large arguments saturate to 0 or 1.
    """
    x = np.asarray(x, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(nu))):
        raise InvalidInputError("x and nu must be finite")
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    return float(expit(4.0 * float(x @ nu) / (temperature * sigma * sigma)))


def _soft_move(nu: np.ndarray, x: np.ndarray, eta: float, scale: float) -> np.ndarray:
    # 2w - 1 == tanh(2 <x, nu> / (temperature sigma^2)), odd in nu
    return (1.0 - eta) * nu + (eta * math.tanh(2.0 * float(x @ nu) / scale)) * x


def soft_step(est: SymmetricPairEstimate, x: np.ndarray, eta: Optional[float] = None) -> SymmetricPairEstimate:
    eta = est.eta if eta is None else eta
    if not 0 < eta < 1:
        raise ConfigError(f"eta must lie in (0, 1), got {eta}")
    nu = _soft_move(est.nu, np.asarray(x, dtype=np.float64), eta, est.temperature * est.sigma ** 2)
    return est.model_copy(update={"nu": nu, "t": est.t + 1, "eta": eta})


class StreamingSoftEM:
    def __init__(self, nu: np.ndarray, sigma: float, eta: float, temperature: float = POSTERIOR_TEMPERATURE, t: int = 0):
        if not 0 < eta < 1:
            raise ConfigError(f"eta must lie in (0, 1), got {eta}")
        if not sigma > 0:
            raise ConfigError(f"sigma must be positive, got {sigma}")
        self.nu = np.array(nu, dtype=np.float64, copy=True)
        if not np.any(self.nu != 0):
            raise ConfigError("zero initialization is a fixed point of the soft update")
        self.sigma = sigma
        self.eta = eta
        self.temperature = temperature
        self.t = t

    def partial_fit(self, X: np.ndarray, recorder: Optional[TraceRecorder] = None) -> None:
        eta, scale = self.eta, self.temperature * self.sigma * self.sigma
        nu = self.nu
        for x in X:
            g = math.tanh(2.0 * float(x @ nu) / scale)
            nu = (1.0 - eta) * nu + (eta * g) * x
            self.t += 1
            if recorder is not None:
                recorder.observe(self.t, np.vstack([nu, -nu]), 0 if g >= 0 else 1)
        self.nu = nu

    def estimate(self) -> SymmetricPairEstimate:
        return SymmetricPairEstimate(nu=self.nu.copy(), t=self.t, sigma=self.sigma, eta=self.eta, temperature=self.temperature)

    def checkpoint(self) -> Dict[str, Any]:
        return {
            "t": self.t,
            "eta": self.eta,
            "sigma": self.sigma,
            "temperature": self.temperature,
            "symmetric_pair": True,
            "centers": [self.nu.tolist(), (-self.nu).tolist()],
        }

    @classmethod
    def from_checkpoint(cls, data: Dict[str, Any]) -> "StreamingSoftEM":
        if not data.get("symmetric_pair"):
            raise ConfigError("checkpoint does not hold a symmetric pair")
        return cls(np.asarray(data["centers"][0], dtype=np.float64), float(data["sigma"]),
                   float(data["eta"]), float(data.get("temperature", POSTERIOR_TEMPERATURE)), int(data["t"]))


def run_soft(
    stream: PointStream,
    init_nu: np.ndarray,
    N: int,
    sigma_est: float,
    eta: Optional[float] = None,
    truth: Optional[MixtureModel] = None,
    temperature: float = POSTERIOR_TEMPERATURE,
    trace_stride: Optional[int] = None,
    engine: Optional[StreamingSoftEM] = None,
) -> Tuple[SymmetricPairEstimate, ErrorTrace]:
    """N soft steps over the stream.

    With ``truth`` (a pair at +mu, -mu) the trace compares +nu and -nu against the
    sign-aligned true means; the alignment is fixed from init_nu. The winner column
    holds 0 when the sample's weight for +nu is at least one half.
    """
    if N < 1:
        raise ConfigError(f"N must be at least 1, got {N}")
    if engine is None:
        engine = StreamingSoftEM(init_nu, sigma_est, eta if eta is not None else eta_soft(N), temperature)
    if truth is not None and not truth.is_symmetric_pair():
        raise ConfigError("soft updates need a two-component mixture with means +mu and -mu")
    recorder = TraceRecorder(
        np.vstack([engine.nu, -engine.nu]),
        engine.t + N,
        truth=None if truth is None else truth.means,
        radius=math.inf if truth is None else truth.min_distance() / 10.0,
        stride=trace_stride,
        symmetric_pair=True,
        start=engine.t,
    )
    logger.info(f"Streaming soft EM: N={N} eta={engine.eta:.6g} sigma={engine.sigma:.6g} temperature={engine.temperature}")
    for X in stream.batches(N):
        engine.partial_fit(X, recorder)
    return engine.estimate(), recorder.trace()
