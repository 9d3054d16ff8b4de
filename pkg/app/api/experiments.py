from typing import List
from fastapi import APIRouter, Depends, HTTPException, Query
from pydantic import ValidationError
from sqlalchemy.orm import Session
from app.core.errors import (
    ConfigError, DegenerateInputError, InitFailureError, InsufficientDataError, InvalidInputError, StreamixError
)
from app.db.database import get_db
from app.schemas.experiment import (
    CompareReport, CompareRequest, ExperimentRun, ExperimentSweep, FloorReport, RunConfig, SweepCell, SweepRequest
)
from app.services import harness
from app.services.cache import cache_service
from app.services.run_service import RunService, config_hash
import logging

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/experiments", tags=["experiments"])

CLIENT_ERRORS = (ConfigError, InsufficientDataError, DegenerateInputError, InvalidInputError)


def to_http_exception(e: StreamixError) -> HTTPException:
    if isinstance(e, InitFailureError):
        return HTTPException(status_code=409, detail=e.to_dict())
    if isinstance(e, CLIENT_ERRORS):
        return HTTPException(status_code=400, detail=e.to_dict())
    logger.error(f"Experiment failed: {e}", exc_info=True)
    return HTTPException(status_code=500, detail=e.to_dict())


@router.get("/runs", response_model=List[ExperimentRun])
async def get_runs(
    skip: int = Query(0, ge=0),
    limit: int = Query(100, ge=1, le=1000),
    db: Session = Depends(get_db)
):
    """
    List executed runs, oldest first.

    - **skip**: Number of runs to skip (for pagination)
    - **limit**: Maximum number of runs to return
    """
    try:
        cached_runs = cache_service.get_run_list(skip, limit)
        if cached_runs is not None:
            logger.info(f"Returning {len(cached_runs)} runs from cache")
            return cached_runs
        
        runs = RunService.get_runs(db, skip=skip, limit=limit)
        runs_data = [ExperimentRun.model_validate(run).model_dump(mode="json") for run in runs]
        if not cache_service.set_run_list(skip, limit, runs_data):
            logger.warning("Failed to cache run list")
        return runs
        
    except Exception as e:
        # a broken cache must not fail the listing
        logger.error(f"Error in get_runs: {str(e)}")
        try:
            return RunService.get_runs(db, skip=skip, limit=limit)
        except Exception as db_error:
            logger.error(f"Database error: {str(db_error)}")
            raise HTTPException(status_code=500, detail=f"Internal server error: {str(db_error)}")


@router.post("/runs", response_model=ExperimentRun, status_code=201)
async def create_run(
    config: RunConfig,
    db: Session = Depends(get_db)
):
    """
    Execute one run synchronously and persist its summary.

    A configuration already executed (same canonical JSON) is answered from the cache.
    """
    run_hash = config_hash(config)
    cached_run = cache_service.get_run_summary(run_hash)
    if cached_run is not None:
        logger.info(f"Run {cached_run.get('id')} answered from cache")
        return cached_run
    
    try:
        outcome = harness.execute_run(config, out_dir=config.out_dir)
    except StreamixError as e:
        raise to_http_exception(e)
    
    try:
        db_run = RunService.create_run(db, config, outcome.summary)
    except Exception as e:
        logger.error(f"Error persisting run: {str(e)}", exc_info=True)
        db.rollback()
        raise HTTPException(status_code=500, detail="Failed to persist run")
    
    try:
        cache_service.set_run_summary(run_hash, ExperimentRun.model_validate(db_run).model_dump(mode="json"))
        cache_service.invalidate_run_lists()
    except Exception as cache_error:
        logger.warning(f"Cache update failed: {cache_error}")
    
    return db_run


@router.get("/runs/{run_id}", response_model=ExperimentRun)
async def get_run(run_id: int, db: Session = Depends(get_db)):
    run = RunService.get_run(db, run_id)
    if not run:
        raise HTTPException(status_code=404, detail="Run not found")
    return run


@router.post("/sweeps", response_model=ExperimentSweep, status_code=201)
async def create_sweep(
    request: SweepRequest,
    db: Session = Depends(get_db)
):
    """
    Run every (value, repeat) cell of a sweep and persist the cells.

    - **axis**: N, C or d
    - **values**: at least two values of the axis
    - **repeats**: seeds per value; cell i runs with seed base.seed + i
    """
    try:
        report = harness.sweep(request, out_dir=request.base.out_dir)
    except StreamixError as e:
        raise to_http_exception(e)
    
    try:
        return RunService.create_sweep(db, request, report)
    except Exception as e:
        logger.error(f"Error persisting sweep: {str(e)}", exc_info=True)
        db.rollback()
        raise HTTPException(status_code=500, detail="Failed to persist sweep")


@router.get("/sweeps/{sweep_id}/cells", response_model=List[SweepCell])
async def get_sweep_cells(
    sweep_id: int,
    skip: int = Query(0, ge=0),
    limit: int = Query(1000, ge=1, le=10000),
    db: Session = Depends(get_db)
):
    sweep = RunService.get_sweep(db, sweep_id)
    if not sweep:
        raise HTTPException(status_code=404, detail="Sweep not found")
    
    try:
        return RunService.get_sweep_cells(db, sweep_id, skip=skip, limit=limit)
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")


@router.post("/compare", response_model=CompareReport)
async def compare_updates(request: CompareRequest):
    """Hard against soft updates on identical streams; the mixture must have k=2."""
    try:
        return harness.compare(request.config, repeats=request.repeats, workers=request.workers)
    except StreamixError as e:
        raise to_http_exception(e)


@router.get("/floor", response_model=FloorReport)
async def approximation_floor(
    C: float = Query(..., gt=0),
    k: int = Query(2, ge=2),
    d: int = Query(2, ge=1),
    sigma: float = Query(1.0, gt=0),
    trials: int = Query(200_000, ge=10_000, le=5_000_000),
    seed: int = Query(0, ge=0),
):
    """Per-center error at the fixed point of population Lloyd's started from the true means."""
    try:
        config = RunConfig(k=k, d=d, C=C, sigma=sigma, seed=seed, placement="simplex-scaled")
        return harness.floor(config, trials=trials)
    except ValidationError as e:
        raise HTTPException(status_code=400, detail="; ".join(err["msg"] for err in e.errors()))
    except StreamixError as e:
        raise to_http_exception(e)
