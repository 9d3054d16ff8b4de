"""Initial centers from a stream: block power-method PCA, then threshold-graph clustering
of a few retained points projected onto the learned k-dimensional subspace."""
import logging
import math
from typing import Optional
import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components, minimum_spanning_tree
from scipy.spatial.distance import pdist, squareform
from scipy.stats import chi2
from app.core.errors import (
    ConfigError, DegenerateInputError, InitFailureError, InsufficientDataError
)
from app.schemas.clustering import InitConfig, InitResult, ProjectionBasis
from app.services.mixture_gen import PointStream

logger = logging.getLogger(__name__)

RANK_TOL = 1e-10


def default_block_size(d: int) -> int:
    return max(8, math.ceil(d * math.log(d)))


def default_retained_count(k: int) -> int:
    return max(50, math.ceil(10 * k * math.log(k)))


def _signed_qr(M: np.ndarray):
    Q, R = linalg.qr(M, mode="economic")
    diag = np.diag(R)
    signs = np.where(diag < 0, -1.0, 1.0)
    return Q * signs, np.abs(diag)


def qr_orthonormalize(M: np.ndarray) -> ProjectionBasis:
    """Q factor of M with the diagonal of R made nonnegative."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] > M.shape[0]:
        raise DegenerateInputError(f"expected a tall matrix, got shape {M.shape}")
    Q, diag = _signed_qr(M)
    scale = diag.max() if diag.size else 0.0
    if scale == 0 or np.any(diag <= RANK_TOL * scale):
        raise DegenerateInputError("matrix is rank deficient", {"r_diagonal": diag.tolist()})
    return ProjectionBasis(U=Q, blocks_consumed=0)


def _power_update(W: np.ndarray, U_prev: np.ndarray) -> np.ndarray:
    """QR(S U) for the accumulated W = S U, completing a rank-deficient span from U_prev."""
    k = W.shape[1]
    Q, diag = _signed_qr(W)
    scale = diag.max()
    if scale == 0:
        raise DegenerateInputError("block carried no energy")
    if np.all(diag > RANK_TOL * scale):
        return Q

    # keep the directions carrying energy, fill the rest from the previous basis
    Qp, Rp, _ = linalg.qr(W, mode="economic", pivoting=True)
    pivots = np.abs(np.diag(Rp))
    rank = int(np.sum(pivots > RANK_TOL * pivots[0]))
    kept = Qp[:, :rank]
    remainder = U_prev - kept @ (kept.T @ U_prev)
    Qr, _, _ = linalg.qr(remainder, mode="economic", pivoting=True)
    logger.debug(f"Rank {rank} block product completed from previous basis")
    return qr_orthonormalize(np.hstack([kept, Qr[:, : k - rank]])).U


class BlockPowerPCA:
    """Streaming top-k subspace tracker.

    Holds only the d x k basis and the d x k accumulator W = sum x (x^T U), which
    equals S U for the block's second-moment sum S.
    """

    def __init__(self, basis: ProjectionBasis, block_size: int):
        self.U = basis.U.copy()
        self.block_size = block_size
        self.accumulator = np.zeros_like(self.U)
        self.in_block = 0
        self.blocks = 0

    def partial_fit(self, X: np.ndarray) -> None:
        start = 0
        while start < len(X):
            stop = min(len(X), start + self.block_size - self.in_block)
            rows = X[start:stop]
            self.accumulator += rows.T @ (rows @ self.U)
            self.in_block += len(rows)
            start = stop
            if self.in_block == self.block_size:
                self.U = _power_update(self.accumulator, self.U)
                self.accumulator[:] = 0.0
                self.in_block = 0
                self.blocks += 1

    def basis(self) -> ProjectionBasis:
        return ProjectionBasis(U=self.U, blocks_consumed=self.blocks)


def streaming_pca(
    stream: PointStream,
    d: int,
    k: int,
    block_size_B: Optional[int] = None,
    num_samples: Optional[int] = None,
    seed: int = 0,
    initial_basis: Optional[np.ndarray] = None,
) -> ProjectionBasis:
    """Consume num_samples points; a trailing partial block is read but discarded."""
    if k > d:
        raise ConfigError(f"cannot track k={k} directions in d={d} dimensions")
    B = block_size_B or default_block_size(d)
    if num_samples is None:
        num_samples = 40 * B
    if num_samples < B:
        raise InsufficientDataError(f"need at least one block of {B} samples, got {num_samples}")

    if initial_basis is not None:
        initial_basis = np.asarray(initial_basis, dtype=np.float64)
        if initial_basis.shape != (d, k):
            raise ConfigError(f"initial basis must have shape ({d}, {k})")
        basis = qr_orthonormalize(initial_basis)
    else:
        basis = qr_orthonormalize(np.random.default_rng(seed).standard_normal((d, k)))

    tracker = BlockPowerPCA(basis, B)
    full = (num_samples // B) * B
    for X in stream.batches(full):
        tracker.partial_fit(X)
    for _ in stream.batches(num_samples - full):
        pass
    logger.debug(f"Streaming PCA finished {tracker.blocks} blocks of {B}")
    return tracker.basis()


def _largest_gap_threshold(sq_dists: np.ndarray) -> Optional[float]:
    values = np.unique(sq_dists[sq_dists > 0])
    if len(values) < 2:
        return float(values[0]) if len(values) else None
    ratios = values[1:] / values[:-1]
    return float(values[int(np.argmax(ratios))])


def _components(sq_matrix: np.ndarray, theta: float):
    adjacency = (sq_matrix <= theta).astype(np.int8)
    return connected_components(adjacency, directed=False)


def _relabel(labels: np.ndarray) -> np.ndarray:
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    mapping = np.empty(len(order), dtype=np.int64)
    mapping[labels[first[order]]] = np.arange(len(order))
    return mapping[labels]


def nn_graph_cluster(projected_points: np.ndarray, k: int) -> np.ndarray:
    """Partition points into k groups by connected components of a threshold graph.

    The threshold sits at the largest multiplicative gap of the sorted pairwise
    squared distances when that gap isolates k components. Otherwise it sits at
    the single-linkage cut, the only band of thresholds giving k components.
    Returns group labels 0..k-1 numbered by first appearance.
    """
    P = np.asarray(projected_points, dtype=np.float64)
    m = len(P)
    if m < 2 * k:
        raise InsufficientDataError(f"need at least {2 * k} points to form {k} groups, got {m}")
    sq = pdist(P, "sqeuclidean")
    if not np.any(sq > 0):
        raise DegenerateInputError("all points coincide; cannot form k >= 2 components")
    sq_matrix = squareform(sq)

    theta = _largest_gap_threshold(sq)
    count, labels = _components(sq_matrix, theta)
    if count != k:
        # zero weights mean "no edge" to csgraph, so coincident points get the smallest positive weight
        weights = sq_matrix + np.finfo(np.float64).tiny * (1.0 - np.eye(m))
        rows, cols = minimum_spanning_tree(weights).nonzero()
        edges = np.sort(sq_matrix[rows, cols])
        below, above = edges[m - k - 1], edges[m - k]
        if not below < above:
            raise InitFailureError(f"no threshold separates exactly {k} components", {"tie": float(below)})
        logger.debug(f"Gap threshold gave {count} components; using single-linkage cut {below:.6g}")
        theta = float(below)
        count, labels = _components(sq_matrix, theta)

    sizes = np.bincount(labels)
    if count != k or sizes.min() < 2:
        raise InitFailureError(
            f"threshold graph has {count} components with sizes {sizes.tolist()}, need {k} of size >= 2",
            {"components": int(count), "sizes": sizes.tolist()},
        )
    return _relabel(labels)


def init_alg(
    stream: PointStream,
    d: int,
    k: int,
    N0: Optional[int] = None,
    config: Optional[InitConfig] = None,
    initial_basis: Optional[np.ndarray] = None,
) -> InitResult:
    """Initial centers from the first N0 samples (plus retained_count per retry)."""
    config = config or InitConfig()
    B = config.block_size_B or default_block_size(d)
    m = config.retained_count or default_retained_count(k)
    if N0 is None:
        N0 = 40 * B + m
    if N0 < m + B:
        raise InsufficientDataError(f"N0={N0} is below retained_count + B = {m + B}")

    basis = streaming_pca(stream, d, k, B, N0 - m, seed=config.seed, initial_basis=initial_basis)
    consumed = N0 - m
    attempts = 0
    while True:
        X = stream.take(m)
        consumed += m
        attempts += 1
        projected = basis.project(X)
        try:
            labels = nn_graph_cluster(projected, k)
            break
        except InitFailureError as e:
            if attempts > config.max_init_retries:
                raise InitFailureError(
                    f"initialization failed after {attempts} attempts: {e.message}",
                    {**e.detail, "attempts": attempts, "samples_consumed": consumed},
                )
            logger.warning(f"Init attempt {attempts} failed ({e.message}); retrying with fresh samples")

    projected_means = np.vstack([projected[labels == j].mean(axis=0) for j in range(k)])
    centers = projected_means @ basis.U.T
    residual = np.clip(np.einsum("ij,ij->i", X, X) - np.einsum("ij,ij->i", projected, projected), 0.0, None)
    logger.info(f"InitAlg produced {k} centers from {consumed} samples in {attempts} attempt(s)")
    return InitResult(
        centers=centers,
        cluster_sizes=np.bincount(labels, minlength=k).tolist(),
        samples_consumed=consumed,
        retained_count=m,
        attempts=attempts,
        basis=basis,
        residual_energy=residual,
    )


def estimate_sigma(init: InitResult, d: int, k: int) -> float:
    """Noise scale from the residual energy of the retained points.

    Off the k-dimensional signal subspace each residual is sigma^2 times a
    chi-square with d - k degrees of freedom; its median is matched to that law's.
    """
    if init.residual_energy is None or len(init.residual_energy) == 0:
        raise ConfigError("sigma estimation needs the residuals of an InitAlg run")
    if d <= k:
        raise ConfigError(f"sigma estimation needs d > k, got d={d}, k={k}")
    sigma2 = float(np.median(init.residual_energy)) / float(chi2.ppf(0.5, d - k))
    if not sigma2 > 0:
        raise DegenerateInputError("retained points carry no residual noise")
    return math.sqrt(sigma2)
