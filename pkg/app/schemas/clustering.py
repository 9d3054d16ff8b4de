from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Any, Dict, List, Optional
import json
import numpy as np
from app.core.config import settings
from app.schemas.mixture import as_float_array

ORTHONORMAL_TOL = 1e-10


class ProjectionBasis(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    U: np.ndarray
    blocks_consumed: int = Field(0, ge=0)

    @field_validator("U", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return as_float_array(value)

    @model_validator(mode="after")
    def _check_orthonormal(self) -> "ProjectionBasis":
        if self.U.ndim != 2 or self.U.shape[1] > self.U.shape[0]:
            raise ValueError(f"U must be a tall d x k matrix, got shape {self.U.shape}")
        gram = self.U.T @ self.U
        if np.abs(gram - np.eye(self.U.shape[1])).max() > ORTHONORMAL_TOL:
            raise ValueError("U must have orthonormal columns")
        return self

    @property
    def d(self) -> int:
        return self.U.shape[0]

    @property
    def k(self) -> int:
        return self.U.shape[1]

    def project(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.U


class InitConfig(BaseModel):
    block_size_B: Optional[int] = Field(None, ge=1)
    retained_count: Optional[int] = Field(None, ge=2)
    max_init_retries: int = Field(settings.MAX_INIT_RETRIES, ge=0)
    seed: int = Field(0, ge=0)


class InitResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    centers: np.ndarray
    cluster_sizes: List[int]
    samples_consumed: int = Field(..., ge=0)
    retained_count: int = Field(..., ge=0)
    attempts: int = Field(1, ge=0)
    basis: Optional[ProjectionBasis] = None
    residual_energy: Optional[np.ndarray] = None

    @field_validator("centers", "residual_energy", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return as_float_array(value)

    @model_validator(mode="after")
    def _check_sizes(self) -> "InitResult":
        if self.centers.ndim != 2 or len(self.cluster_sizes) != self.centers.shape[0]:
            raise ValueError("need one cluster size per center")
        if sum(self.cluster_sizes) != self.retained_count:
            raise ValueError("cluster sizes must sum to the retained count")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "centers": self.centers.tolist(),
            "cluster_sizes": list(self.cluster_sizes),
            "samples_consumed": self.samples_consumed,
            "retained_count": self.retained_count,
            "attempts": self.attempts,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class CenterEstimates(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    centers: np.ndarray
    t: int = Field(0, ge=0)
    # eta = 1 is accepted so a single step can move the winner onto the sample
    eta: float = Field(..., gt=0, le=1)

    @field_validator("centers", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return as_float_array(value)

    @model_validator(mode="after")
    def _check_centers(self) -> "CenterEstimates":
        if self.centers.ndim != 2 or self.centers.shape[0] < 2:
            raise ValueError("need at least two centers as a k x d matrix")
        return self

    @property
    def k(self) -> int:
        return self.centers.shape[0]


class StepRecord(BaseModel):
    t: int = Field(..., ge=1)
    winner: int = Field(..., ge=0)
    moved_delta: float = Field(..., ge=0)
    point_norm: float = Field(..., ge=0)


class SymmetricPairEstimate(BaseModel):
    """Estimate nu of the pair {+mu, -mu}."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    nu: np.ndarray
    t: int = Field(0, ge=0)
    sigma: float = Field(..., gt=0)
    eta: float = Field(..., gt=0, lt=1)
    temperature: float = Field(2.0, gt=0)

    @field_validator("nu", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return as_float_array(value)

    def pair(self) -> np.ndarray:
        return np.vstack([self.nu, -self.nu])


class OracleReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    final_centers: np.ndarray
    iterations: int = Field(..., ge=0)
    converged: bool
    final_objective: float = Field(..., ge=0)
    objective_history: List[float] = []

    @field_validator("final_centers", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return as_float_array(value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "final_centers": self.final_centers.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "final_objective": self.final_objective,
        }


class MonteCarloEstimate(BaseModel):
    estimate: float
    std_error: float = Field(..., ge=0)
    trials: int = Field(..., ge=1)


class FloorEstimate(BaseModel):
    per_center: List[float]
    total: float = Field(..., ge=0)
    iterations: int = Field(..., ge=0)
    trials: int = Field(..., ge=1)
