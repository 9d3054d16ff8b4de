#!/usr/bin/env python3
"""
Database initialization script

    python scripts/init_db.py            # create tables
    python scripts/init_db.py --demo     # also execute and store one small run
"""
import sys
import os

# Add the app directory to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from app.core.config import settings
from app.db.database import Base
from app.models import ExperimentRun, ExperimentSweep, SweepCell
from app.schemas.experiment import RunConfig
from app.services import harness
from app.services.run_service import RunService

DEMO_CONFIG = RunConfig(algorithm="hard", k=2, d=5, C=8.0, sigma=1.0, N=20_000, init_mode="true-means")

def init_database(demo: bool = False):
    """Initialize the database with tables"""
    engine = create_engine(settings.database_url)
    
    print("Creating database tables...")
    Base.metadata.create_all(bind=engine)
    print("Database tables created successfully!")
    
    if demo:
        session = sessionmaker(bind=engine)()
        try:
            outcome = harness.execute_run(DEMO_CONFIG)
            run = RunService.create_run(session, DEMO_CONFIG, outcome.summary)
            print(f"Stored demo run {run.id}: final matched error {run.final_error:.6g}")
        finally:
            session.close()

if __name__ == "__main__":
    init_database(demo="--demo" in sys.argv[1:])
