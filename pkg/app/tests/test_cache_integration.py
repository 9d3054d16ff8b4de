import pytest
from fastapi.testclient import TestClient
from unittest.mock import patch
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from app.db.database import Base, get_db
from app.main import app
from app.services import harness
from app.services.cache import RunCache

# Create test database
SQLALCHEMY_DATABASE_URL = "sqlite:///./test_cache.db"
engine = create_engine(SQLALCHEMY_DATABASE_URL, connect_args={"check_same_thread": False})
TestingSessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

def override_get_db():
    try:
        db = TestingSessionLocal()
        yield db
    finally:
        db.close()

@pytest.fixture(scope="function")
def setup_database():
    """Setup test database"""
    Base.metadata.create_all(bind=engine)
    previous = app.dependency_overrides.get(get_db)
    app.dependency_overrides[get_db] = override_get_db
    yield
    app.dependency_overrides[get_db] = previous
    Base.metadata.drop_all(bind=engine)

@pytest.fixture
def client(setup_database):
    """Test client fixture"""
    with TestClient(app) as test_client:
        yield test_client

@pytest.fixture
def run_config():
    """Noise-free run that finishes in milliseconds"""
    return {
        "k": 2,
        "d": 3,
        "C": 6.0,
        "sigma": 0.0,
        "N": 50,
        "init_mode": "true-means",
        "placement": "axis-aligned"
    }

def test_cache_miss_integration_flow(client: TestClient, run_config):
    """Integration test: Complete cache-miss flow from API to database"""
    
    with patch('app.api.experiments.cache_service.get_run_summary', return_value=None), \
         patch('app.api.experiments.cache_service.set_run_summary', return_value=True), \
         patch('app.api.experiments.cache_service.invalidate_run_lists', return_value=0):
        create_response = client.post("/api/v1/experiments/runs", json=run_config)
        assert create_response.status_code == 201
        created_run = create_response.json()
    
    # Mock cache service to simulate cache miss for the listing
    with patch('app.api.experiments.cache_service.get_run_list', return_value=None) as mock_cache_get, \
         patch('app.api.experiments.cache_service.set_run_list', return_value=True) as mock_cache_set:
        
        response = client.get("/api/v1/experiments/runs")
        
        assert response.status_code == 200
        runs = response.json()
        assert len(runs) == 1
        assert runs[0]["id"] == created_run["id"]
        
        mock_cache_get.assert_called_once_with(0, 100)
        mock_cache_set.assert_called_once()
        cached_payload = mock_cache_set.call_args[0][2]
        assert cached_payload[0]["id"] == created_run["id"]

def test_repeated_config_hits_summary_cache(client: TestClient, run_config):
    """Integration test: the second POST of one configuration is served from the summary cache"""
    store = {}
    
    with patch('app.api.experiments.cache_service.get_run_summary', side_effect=store.get), \
         patch('app.api.experiments.cache_service.set_run_summary', side_effect=store.__setitem__), \
         patch('app.api.experiments.cache_service.invalidate_run_lists', return_value=0), \
         patch('app.api.experiments.harness.execute_run', wraps=harness.execute_run) as mock_execute:
        first = client.post("/api/v1/experiments/runs", json=run_config)
        second = client.post("/api/v1/experiments/runs", json=run_config)
        
        assert first.status_code == second.status_code == 201
        assert second.json()["id"] == first.json()["id"]
        assert mock_execute.call_count == 1
        assert len(store) == 1

def test_run_cache_without_redis():
    """Unit test: every operation degrades quietly when Redis is unreachable"""
    with patch('app.services.cache.redis.Redis') as mock_redis:
        mock_redis.return_value.ping.side_effect = Exception("Connection refused")
        cache = RunCache()
    
    assert not cache.is_available()
    assert cache.get_run_list(0, 100) is None
    assert cache.set_run_list(0, 100, []) is False
    assert cache.get_run_summary("abc") is None
    assert cache.invalidate_run_lists() == 0

def test_run_cache_round_trip_through_redis_client():
    with patch('app.services.cache.redis.Redis') as mock_redis:
        client = mock_redis.return_value
        cache = RunCache()
    
    assert cache.set_run_summary("abc", {"id": 3})
    key, ttl, payload = client.setex.call_args[0]
    assert key == "streamix:v1:runs:summary:abc"
    client.get.return_value = payload
    assert cache.get_run_summary("abc") == {"id": 3}

def test_invalidate_run_lists_scans_prefix():
    with patch('app.services.cache.redis.Redis') as mock_redis:
        client = mock_redis.return_value
        client.scan_iter.return_value = ["streamix:v1:runs:list:0:100", "streamix:v1:runs:list:5:10"]
        cache = RunCache()
    
    assert cache.invalidate_run_lists() == 2
    client.scan_iter.assert_called_once_with(match="streamix:v1:runs:list:*")
    client.delete.assert_called_once_with("streamix:v1:runs:list:0:100", "streamix:v1:runs:list:5:10")
