import itertools
import logging
import math
from typing import Mapping, Optional, Sequence, Tuple
import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import linregress
from app.core.config import settings
from app.core.errors import ConfigError, InsufficientDataError
from app.schemas.metrics import Decomposition, ErrorTrace, RateFit

logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX_K = 8


def matched_error(estimates: np.ndarray, truth: np.ndarray) -> Tuple[float, np.ndarray]:
    """Minimum over relabelings of sum_i ||estimates[perm[i]] - truth[i]||^2.

    perm[i] is the estimate index matched to true mean i. Ties keep the
    lexicographically first permutation.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=np.float64))
    truth = np.atleast_2d(np.asarray(truth, dtype=np.float64))
    if estimates.shape != truth.shape:
        raise ConfigError(f"estimates {estimates.shape} and truth {truth.shape} do not match")
    k = len(truth)
    cost = cdist(truth, estimates, "sqeuclidean")
    rows = np.arange(k)
    if k <= EXHAUSTIVE_MAX_K:
        perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
        perm = perms[int(np.argmin(cost[rows, perms].sum(axis=1)))]
    else:
        _, perm = linear_sum_assignment(cost)
    return float(cost[rows, perm].sum()), perm.astype(np.int64)


class ProximityMonitor:
    """Running check that every matched estimate stays within radius of its true mean.

    The matching is taken from the first checked estimates and then frozen; the
    flag is a cumulative AND, so once false it stays false.
    """

    def __init__(self, truth: np.ndarray, radius: float, permutation: Optional[np.ndarray] = None):
        self.truth = np.asarray(truth, dtype=np.float64)
        self.radius = radius
        self.permutation = permutation
        self.holds = True

    def check(self, estimates: np.ndarray) -> bool:
        estimates = np.asarray(estimates, dtype=np.float64)
        if self.permutation is None:
            _, self.permutation = matched_error(estimates, self.truth)
        diff = estimates[self.permutation] - self.truth
        return self.observe(float(np.einsum("ij,ij->i", diff, diff).max()))

    def observe(self, max_sq_error: float) -> bool:
        self.holds = self.holds and max_sq_error <= self.radius * self.radius
        return self.holds


def it_monitor(
    estimates: np.ndarray,
    truth: np.ndarray,
    C: float,
    sigma: float,
    monitor: Optional[ProximityMonitor] = None,
) -> bool:
    """Proximity condition with radius C*sigma/10, inclusive.

    Pass the same ``monitor`` across steps to get the frozen matching and the
    cumulative flag; without one the check stands alone.
    """
    if monitor is None:
        monitor = ProximityMonitor(truth, C * sigma / 10.0)
    return monitor.check(estimates)


def trace_stride(n_steps: int, max_records: int = settings.TRACE_MAX_RECORDS) -> int:
    return 1 if n_steps <= max_records else math.ceil(n_steps / max_records)


class TraceRecorder:
    """Fills an ErrorTrace while an engine runs.

    Records the starting state (winner -1) and then every ``stride`` steps; the last step is always kept.
    Per-cluster errors are indexed by true mean, through the matching frozen at t = 0.
    """

    def __init__(
        self,
        initial_centers: np.ndarray,
        n_steps: int,
        truth: Optional[np.ndarray] = None,
        radius: float = math.inf,
        stride: Optional[int] = None,
        symmetric_pair: bool = False,
        start: int = 0,
    ):
        self.n_steps = n_steps
        self.stride = stride or trace_stride(n_steps)
        self.symmetric_pair = symmetric_pair
        self.has_truth = truth is not None
        k = len(initial_centers)
        capacity = n_steps // self.stride + 2
        self._t = np.zeros(capacity, dtype=np.int64)
        self._winner = np.zeros(capacity, dtype=np.int64)
        self._vmax = np.full(capacity, np.nan)
        self._flag = np.ones(capacity, dtype=bool)
        self._errors = np.zeros((capacity, k if self.has_truth else 0))
        self._count = 0

        if self.has_truth:
            self.truth = np.asarray(truth, dtype=np.float64)
            _, self.permutation = matched_error(initial_centers, self.truth)
            self.truth_of = np.empty(k, dtype=np.int64)
            self.truth_of[self.permutation] = np.arange(k)
            self.monitor = ProximityMonitor(self.truth, radius, self.permutation)
            self.current = np.zeros(k)
            self._refresh_all(np.asarray(initial_centers))
        self._store(start, np.asarray(initial_centers), -1)

    def _refresh_all(self, centers: np.ndarray) -> None:
        diff = centers[self.permutation] - self.truth
        self.current = np.einsum("ij,ij->i", diff, diff)
        self.monitor.observe(float(self.current.max()))

    def _store(self, t: int, centers: np.ndarray, winner: int) -> None:
        row = self._count
        self._t[row] = t
        self._winner[row] = winner
        if self.has_truth:
            self._errors[row] = self.current
            self._vmax[row] = self.current.max()
            self._flag[row] = self.monitor.holds
        self._count += 1

    def observe(self, t: int, centers: np.ndarray, winner: int, moved: Optional[int] = None) -> None:
        """Account for step t; ``moved`` names the only center that changed, if just one did."""
        if self.has_truth:
            if moved is None:
                self._refresh_all(centers)
            else:
                i = self.truth_of[moved]
                diff = centers[moved] - self.truth[i]
                self.current[i] = diff @ diff
                self.monitor.observe(float(self.current.max()))
        if t % self.stride == 0 or t == self.n_steps:
            self._store(t, centers, winner)

    def trace(self) -> ErrorTrace:
        n = self._count
        return ErrorTrace(
            t=self._t[:n],
            errors=self._errors[:n],
            vmax=self._vmax[:n],
            it_flag=self._flag[:n],
            winner=self._winner[:n],
            has_truth=self.has_truth,
            symmetric_pair=self.symmetric_pair,
        )


def fit_rate(sweep: Sequence[Tuple[float, float]]) -> RateFit:
    """Least squares slope of ln(error) against ln(N)."""
    if len(sweep) < 4:
        raise InsufficientDataError(f"need at least 4 sweep points, got {len(sweep)}")
    N = np.array([float(n) for n, _ in sweep])
    errors = np.array([float(e) for _, e in sweep])
    if np.any(N <= 0) or N.max() < 8 * N.min():
        raise InsufficientDataError("sweep must span at least a factor of 8 in N")
    if np.any(~(errors > 0)):
        raise ConfigError("errors must be positive to fit a rate", {"errors": errors.tolist()})
    x, y = np.log(N), np.log(errors)
    result = linregress(x, y)
    if np.ptp(y) == 0:
        r_squared = 1.0
    else:
        r_squared = float(min(1.0, max(0.0, result.rvalue ** 2)))
    return RateFit(
        exponent=float(result.slope),
        intercept=float(result.intercept),
        r_squared=r_squared,
        exponent_std_error=float(result.stderr),
        n_points=len(sweep),
    )


def _mean_and_se(values: np.ndarray) -> Tuple[float, float]:
    if len(values) < 2:
        return float(values.mean()), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def decompose(
    true_init: Mapping[int, Sequence[float]],
    perturbed_init: Optional[Mapping[int, Sequence[float]]] = None,
    it_flags: Optional[Mapping[int, Sequence[bool]]] = None,
) -> Decomposition:
    """Split final errors into floor, variance and bias proxies.

    ``true_init`` maps N to per-seed final errors of runs started at the true
    means, with the same seeds at every N. Each seed's errors are fitted as
    floor + slope * ln N / N; the floor proxy is the mean intercept. The variance
    proxy is the mean error at the largest N minus that floor, and the bias proxy
    the mean paired excess of ``perturbed_init`` over ``true_init`` at the largest
    N both cover. ``it_flags`` (per seed, at the largest N) adds the mean
    conditional on the proximity flag.
    """
    if len(true_init) < 2:
        raise InsufficientDataError("need true-mean runs at two or more N values")
    Ns = sorted(true_init)
    table = np.array([np.asarray(true_init[n], dtype=np.float64) for n in Ns])
    if table.ndim != 2 or table.shape[1] < 1:
        raise InsufficientDataError("need the same number of seeds at every N")
    x = np.array([math.log(n) / n for n in Ns])
    _, intercepts = np.polyfit(x, table, 1)
    floor, floor_se = _mean_and_se(np.atleast_1d(intercepts))

    largest = table[-1]
    unconditional = float(largest.mean())
    decomposition = Decomposition(
        variance=unconditional - floor,
        floor=floor,
        floor_std_error=floor_se,
        unconditional_mean=unconditional,
    )

    if perturbed_init:
        common = sorted(set(perturbed_init) & set(true_init))
        if not common:
            raise InsufficientDataError("perturbed and true-mean runs share no N")
        n = common[-1]
        paired = np.asarray(perturbed_init[n], dtype=np.float64) - np.asarray(true_init[n], dtype=np.float64)
        decomposition.bias, decomposition.bias_std_error = _mean_and_se(paired)

    if it_flags is not None:
        flags = np.asarray(it_flags[Ns[-1]], dtype=bool)
        decomposition.it_rate = float(flags.mean())
        if flags.any():
            decomposition.conditional_mean = float(largest[flags].mean())
    return decomposition
