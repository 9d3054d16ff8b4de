from pydantic import BaseModel, Field, model_validator
from typing import Any, Dict, List, Literal, Optional
from datetime import datetime
from app.core.config import settings
from app.schemas.metrics import Decomposition, RateFit

Algorithm = Literal["hard", "soft"]
InitMode = Literal["initalg", "true-means", "perturbed"]
Placement = Literal["simplex-scaled", "random-rotated", "axis-aligned"]
NoiseKind = Literal["gaussian", "uniform-ball", "rademacher-scaled"]
SweepAxis = Literal["N", "C", "d"]


class RunConfig(BaseModel):
    algorithm: Algorithm = "hard"
    k: int = Field(2, ge=2)
    d: int = Field(10, ge=1)
    C: float = Field(8.0, gt=0)
    sigma: float = Field(1.0, ge=0)
    N: int = Field(100_000, ge=1)
    N0: Optional[int] = Field(None, ge=1)
    seed: int = Field(0, ge=0)
    init_mode: InitMode = "initalg"
    delta: Optional[float] = Field(None, ge=0)
    placement: Placement = "random-rotated"
    noise_kind: NoiseKind = "gaussian"
    weights: Optional[List[float]] = None
    block_size_B: Optional[int] = Field(None, ge=1)
    retained_count: Optional[int] = Field(None, ge=2)
    trace_stride: Optional[int] = Field(None, ge=1)
    max_init_retries: int = Field(settings.MAX_INIT_RETRIES, ge=0)
    eta: Optional[float] = Field(None, gt=0, lt=1)
    sigma_known: bool = True
    temperature: float = Field(2.0, gt=0)
    out_dir: Optional[str] = None

    @model_validator(mode="after")
    def _check_combinations(self) -> "RunConfig":
        if self.algorithm == "soft" and self.k != 2:
            raise ValueError("soft requires k=2")
        if self.init_mode == "perturbed" and self.delta is None:
            raise ValueError("perturbed init requires delta >= 0")
        if self.weights is not None and len(self.weights) != self.k:
            raise ValueError("weights must list one value per component")
        if not self.sigma_known and self.init_mode != "initalg":
            raise ValueError("estimating sigma needs the initalg init")
        return self


class RunSummary(BaseModel):
    algorithm: Algorithm
    k: int
    d: int
    C: float
    sigma: float
    N: int
    N0: int
    seed: int
    init_mode: InitMode
    final_error: float
    final_per_cluster: List[float]
    it_flag: bool
    eta: float
    samples_consumed: int
    init_samples: int
    init_attempts: int
    init_max_distance: float
    sigma_used: float
    wall_time_s: float
    trace_path: Optional[str] = None
    status: str = "ok"


class SweepRequest(BaseModel):
    base: RunConfig
    axis: SweepAxis
    values: List[float] = Field(..., min_length=2)
    repeats: int = Field(1, ge=1)
    workers: Optional[int] = Field(None, ge=1)


class SweepCellResult(BaseModel):
    index: int
    value: float
    repeat: int
    seed: int
    status: str
    final_error: Optional[float] = None
    it_flag: Optional[bool] = None
    error_code: Optional[str] = None


class SweepPoint(BaseModel):
    value: float
    mean: Optional[float] = None
    std_error: Optional[float] = None
    n_ok: int
    n_failed: int
    conditional_mean: Optional[float] = None
    it_rate: Optional[float] = None


class SweepReport(BaseModel):
    axis: SweepAxis
    cells: List[SweepCellResult]
    summary: List[SweepPoint]
    rate_fit: Optional[RateFit] = None


class ComparePair(BaseModel):
    seed: int
    hard_error: float
    soft_error: float
    outcome: Literal["soft", "hard", "tie"]


class CompareRequest(BaseModel):
    config: RunConfig
    repeats: int = Field(20, ge=1)
    workers: Optional[int] = Field(None, ge=1)


class CompareReport(BaseModel):
    pairs: List[ComparePair]
    soft_wins: int
    hard_wins: int
    ties: int
    sign_test_p: float
    mean_ratio: Optional[float] = None


class DecompositionReport(BaseModel):
    algorithm: Algorithm
    C: float
    N_values: List[int]
    seeds: List[int]
    delta: float
    decomposition: Decomposition
    true_init: Dict[int, List[float]]
    perturbed_init: List[float]


class InitCheckReport(BaseModel):
    max_distance: float
    threshold: float
    passed: bool
    samples_consumed: int
    cluster_sizes: List[int]
    attempts: int


class FloorReport(BaseModel):
    C: float
    k: int
    d: int
    per_center: List[float]
    total: float
    iterations: int
    reference: float


# Persistence views

class ExperimentRun(BaseModel):
    id: int
    algorithm: str
    k: int
    d: int
    separation: float
    sigma: float
    n_steps: int
    n_init: int
    seed: int
    init_mode: str
    eta: float
    final_error: float
    it_flag: bool
    samples_consumed: int
    wall_time_s: float
    status: str
    created_at: Optional[datetime] = None

    class Config:
        from_attributes = True


class SweepCell(BaseModel):
    id: int
    sweep_id: int
    cell_index: int
    value: float
    repeat: int
    seed: int
    status: str
    final_error: Optional[float] = None
    it_flag: Optional[bool] = None
    error_code: Optional[str] = None

    class Config:
        from_attributes = True


class ExperimentSweep(BaseModel):
    id: int
    axis: str
    repeats: int
    rate_exponent: Optional[float] = None
    created_at: Optional[datetime] = None
    cells: List[SweepCell] = []

    class Config:
        from_attributes = True
