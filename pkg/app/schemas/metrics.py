from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Any, Dict, Optional
import numpy as np


class ErrorTrace(BaseModel):
    """Recorded per-cluster squared errors, their max, the running proximity flag and the winner.

    ``has_truth`` is false for runs without ground truth; those traces carry
    only ``t`` and ``winner`` (errors has zero columns, vmax is NaN).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    t: np.ndarray
    errors: np.ndarray
    vmax: np.ndarray
    it_flag: np.ndarray
    winner: np.ndarray
    has_truth: bool = True
    symmetric_pair: bool = False

    @field_validator("t", "winner", mode="before")
    @classmethod
    def _as_int(cls, value: Any) -> Any:
        return np.asarray(value, dtype=np.int64)

    @field_validator("errors", "vmax", mode="before")
    @classmethod
    def _as_float(cls, value: Any) -> Any:
        return np.asarray(value, dtype=np.float64)

    @field_validator("it_flag", mode="before")
    @classmethod
    def _as_bool(cls, value: Any) -> Any:
        return np.asarray(value, dtype=bool)

    @model_validator(mode="after")
    def _check_records(self) -> "ErrorTrace":
        n = len(self.t)
        if self.errors.ndim != 2 or self.errors.shape[0] != n:
            raise ValueError("errors must have one row per record")
        if len(self.vmax) != n or len(self.it_flag) != n or len(self.winner) != n:
            raise ValueError("all trace columns must have one entry per record")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing")
        return self

    def __len__(self) -> int:
        return len(self.t)

    @property
    def k(self) -> int:
        return self.errors.shape[1]

    @property
    def final_error(self) -> float:
        return float(self.errors[-1].sum()) if self.has_truth and len(self) else float("nan")

    @property
    def final_it_flag(self) -> bool:
        return bool(self.it_flag[-1]) if len(self) else True


class RateFit(BaseModel):
    exponent: float
    intercept: float
    r_squared: float = Field(..., ge=0, le=1)
    exponent_std_error: float = 0.0
    n_points: int = Field(..., ge=2)

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump()


class Decomposition(BaseModel):
    bias: Optional[float] = None
    bias_std_error: Optional[float] = None
    variance: float
    floor: float
    floor_std_error: float = Field(..., ge=0)
    unconditional_mean: float
    conditional_mean: Optional[float] = None
    it_rate: Optional[float] = None
