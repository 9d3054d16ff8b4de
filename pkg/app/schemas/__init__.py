from .mixture import MixtureModel, LabeledSample, LabeledBatch
from .clustering import (
    ProjectionBasis, InitConfig, InitResult, CenterEstimates, StepRecord,
    SymmetricPairEstimate, OracleReport, MonteCarloEstimate, FloorEstimate
)
from .metrics import ErrorTrace, RateFit, Decomposition
from .experiment import (
    RunConfig, RunSummary, SweepRequest, SweepCellResult, SweepPoint, SweepReport,
    ComparePair, CompareRequest, CompareReport, DecompositionReport, InitCheckReport, FloorReport,
    ExperimentRun, ExperimentSweep, SweepCell
)

__all__ = [
    "MixtureModel", "LabeledSample", "LabeledBatch",
    "ProjectionBasis", "InitConfig", "InitResult", "CenterEstimates", "StepRecord",
    "SymmetricPairEstimate", "OracleReport", "MonteCarloEstimate", "FloorEstimate",
    "ErrorTrace", "RateFit", "Decomposition",
    "RunConfig", "RunSummary", "SweepRequest", "SweepCellResult", "SweepPoint", "SweepReport",
    "ComparePair", "CompareRequest", "CompareReport", "DecompositionReport", "InitCheckReport", "FloorReport",
    "ExperimentRun", "ExperimentSweep", "SweepCell"
]
