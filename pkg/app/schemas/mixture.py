from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Any, Dict, Iterator, List, Optional
import numpy as np

WEIGHT_TOL = 1e-12


def as_float_array(value: Any) -> Any:
    if value is None:
        return None
    return np.asarray(value, dtype=np.float64)


class MixtureModel(BaseModel):
    """Ground truth of a spherical mixture: k means in d dimensions, a shared sigma and weights.

    ``component_sigmas`` optionally gives each component its own noise scale; the
    shared ``sigma`` is then their maximum and drives every separation statistic.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    k: int = Field(..., ge=1)
    d: int = Field(..., ge=1)
    means: np.ndarray
    sigma: float = Field(..., ge=0)
    weights: np.ndarray
    component_sigmas: Optional[np.ndarray] = None

    @field_validator("means", "weights", "component_sigmas", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return as_float_array(value)

    @model_validator(mode="after")
    def _check_shapes(self) -> "MixtureModel":
        if self.means.shape != (self.k, self.d):
            raise ValueError(f"means must have shape ({self.k}, {self.d}), got {self.means.shape}")
        if not np.all(np.isfinite(self.means)) or not np.isfinite(self.sigma):
            raise ValueError("means and sigma must be finite")
        if self.weights.shape != (self.k,):
            raise ValueError(f"weights must have shape ({self.k},), got {self.weights.shape}")
        if np.any(self.weights < 0) or abs(float(self.weights.sum()) - 1.0) > WEIGHT_TOL:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.component_sigmas is not None:
            if self.component_sigmas.shape != (self.k,) or np.any(self.component_sigmas < 0):
                raise ValueError("component_sigmas must be k nonnegative values")
            if abs(float(self.component_sigmas.max()) - self.sigma) > WEIGHT_TOL * max(1.0, self.sigma):
                raise ValueError("sigma must equal the largest component sigma")
        return self

    def noise_scales(self) -> np.ndarray:
        if self.component_sigmas is not None:
            return self.component_sigmas
        return np.full(self.k, self.sigma)

    def pairwise_distances(self) -> np.ndarray:
        diff = self.means[:, None, :] - self.means[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def min_distance(self) -> float:
        """Smallest distance between two distinct means (C times sigma)."""
        if self.k < 2:
            return float("inf")
        dist = self.pairwise_distances()
        return float(dist[~np.eye(self.k, dtype=bool)].min())

    def separation(self) -> float:
        if self.sigma == 0:
            return float("inf")
        return self.min_distance() / self.sigma

    def pairwise_separation(self, i: int, j: int) -> float:
        if i == j:
            raise ValueError("pairwise separation needs two distinct components")
        dist = float(np.linalg.norm(self.means[i] - self.means[j]))
        if self.sigma == 0:
            return float("inf")
        return dist / self.sigma

    def rotated(self, rotation: np.ndarray) -> "MixtureModel":
        return self.model_copy(update={"means": self.means @ np.asarray(rotation).T})

    def is_symmetric_pair(self, tol: float = 1e-12) -> bool:
        if self.k != 2:
            return False
        scale = max(1.0, float(np.abs(self.means).max()))
        return bool(np.all(np.abs(self.means[0] + self.means[1]) <= tol * scale))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "d": self.d,
            "means": self.means.tolist(),
            "sigma": self.sigma,
            "weights": self.weights.tolist(),
            "component_sigmas": None if self.component_sigmas is None else self.component_sigmas.tolist(),
        }


class LabeledSample(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    point: np.ndarray
    label: int = Field(..., ge=0)

    @field_validator("point", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return as_float_array(value)


class LabeledBatch(BaseModel):
    """A contiguous block of samples with their component labels kept alongside."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: np.ndarray
    labels: np.ndarray
    start: int = Field(0, ge=0)

    @field_validator("points", mode="before")
    @classmethod
    def _points(cls, value: Any) -> Any:
        return np.atleast_2d(as_float_array(value))

    @field_validator("labels", mode="before")
    @classmethod
    def _labels(cls, value: Any) -> Any:
        return np.asarray(value, dtype=np.int64)

    @model_validator(mode="after")
    def _check_lengths(self) -> "LabeledBatch":
        if len(self.points) != len(self.labels):
            raise ValueError("points and labels must have equal length")
        return self

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index: int) -> LabeledSample:
        return LabeledSample(point=self.points[index], label=int(self.labels[index]))

    def samples(self) -> Iterator[LabeledSample]:
        for index in range(len(self)):
            yield self[index]

    def component_counts(self, k: int) -> List[int]:
        return np.bincount(self.labels, minlength=k).tolist()
