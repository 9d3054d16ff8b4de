from .experiment import ExperimentRun, ExperimentSweep, SweepCell

__all__ = ["ExperimentRun", "ExperimentSweep", "SweepCell"]
