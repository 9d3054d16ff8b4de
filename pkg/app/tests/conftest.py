import pytest
import sys
import os
import numpy as np
from fastapi.testclient import TestClient
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker

# Add the project root to Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../'))

from app.main import app
from app.db.database import get_db, Base
from app.schemas.mixture import MixtureModel
from app.services.mixture_gen import make_model

# Test database URL
SQLALCHEMY_DATABASE_URL = "sqlite:///./test.db"

engine = create_engine(
    SQLALCHEMY_DATABASE_URL, connect_args={"check_same_thread": False}
)
TestingSessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

def override_get_db():
    try:
        db = TestingSessionLocal()
        yield db
    finally:
        db.close()

app.dependency_overrides[get_db] = override_get_db

@pytest.fixture(scope="session")
def db_engine():
    Base.metadata.create_all(bind=engine)
    yield engine
    Base.metadata.drop_all(bind=engine)

@pytest.fixture(scope="function")
def db_session(db_engine):
    connection = db_engine.connect()
    transaction = connection.begin()
    session = TestingSessionLocal(bind=connection)
    
    yield session
    
    session.close()
    transaction.rollback()
    connection.close()

@pytest.fixture(scope="function")
def client(db_engine):
    with TestClient(app) as test_client:
        yield test_client

@pytest.fixture
def pair_model() -> MixtureModel:
    """Balanced pair at +-4 e1 in 5 dimensions, sigma 1 (C = 8)."""
    return make_model(2, 5, 8.0, 1.0, "axis-aligned")

@pytest.fixture
def simplex_model() -> MixtureModel:
    """Four equally separated means in 10 dimensions, C = 8."""
    return make_model(4, 10, 8.0, 1.0, "simplex-scaled")

@pytest.fixture
def noise_free_model() -> MixtureModel:
    return make_model(2, 2, 4.0, 0.0, "axis-aligned")

@pytest.fixture
def small_run_config():
    return {
        "algorithm": "hard",
        "k": 2,
        "d": 5,
        "C": 8.0,
        "sigma": 1.0,
        "N": 2000,
        "seed": 3,
        "init_mode": "true-means",
    }

@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
