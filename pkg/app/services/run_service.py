import hashlib
import json
from sqlalchemy.orm import Session
from typing import List, Optional
from app.models.experiment import ExperimentRun, ExperimentSweep, SweepCell
from app.schemas.experiment import RunConfig, RunSummary, SweepReport, SweepRequest

def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON of everything that shapes a run's numbers."""
    payload = config.model_dump(exclude={"out_dir"})
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()

class RunService:
    @staticmethod
    def get_runs(db: Session, skip: int = 0, limit: int = 100) -> List[ExperimentRun]:
        return db.query(ExperimentRun).order_by(ExperimentRun.id).offset(skip).limit(limit).all()

    @staticmethod
    def get_run(db: Session, run_id: int) -> Optional[ExperimentRun]:
        return db.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()

    @staticmethod
    def create_run(db: Session, config: RunConfig, summary: RunSummary) -> ExperimentRun:
        db_run = ExperimentRun(
            config_hash=config_hash(config),
            algorithm=summary.algorithm,
            k=summary.k,
            d=summary.d,
            separation=summary.C,
            sigma=summary.sigma,
            n_steps=summary.N,
            n_init=summary.init_samples,
            seed=summary.seed,
            init_mode=summary.init_mode,
            eta=summary.eta,
            final_error=summary.final_error,
            it_flag=summary.it_flag,
            samples_consumed=summary.samples_consumed,
            wall_time_s=summary.wall_time_s,
            status=summary.status,
            config_json=config.model_dump_json(),
        )
        db.add(db_run)
        db.commit()
        db.refresh(db_run)
        return db_run

    @staticmethod
    def get_sweep(db: Session, sweep_id: int) -> Optional[ExperimentSweep]:
        return db.query(ExperimentSweep).filter(ExperimentSweep.id == sweep_id).first()

    @staticmethod
    def get_sweep_cells(db: Session, sweep_id: int, skip: int = 0, limit: int = 1000) -> List[SweepCell]:
        return (db.query(SweepCell).filter(SweepCell.sweep_id == sweep_id)
                .order_by(SweepCell.cell_index).offset(skip).limit(limit).all())

    @staticmethod
    def create_sweep(db: Session, request: SweepRequest, report: SweepReport) -> ExperimentSweep:
        db_sweep = ExperimentSweep(
            axis=request.axis,
            repeats=request.repeats,
            values_json=json.dumps(request.values),
            base_config_json=request.base.model_dump_json(),
            rate_exponent=report.rate_fit.exponent if report.rate_fit else None,
        )
        db_sweep.cells = [
            SweepCell(cell_index=c.index, value=c.value, repeat=c.repeat, seed=c.seed, status=c.status,
                      final_error=c.final_error, it_flag=c.it_flag, error_code=c.error_code)
            for c in report.cells
        ]
        db.add(db_sweep)
        db.commit()
        db.refresh(db_sweep)
        return db_sweep
