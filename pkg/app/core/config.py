from pydantic_settings import BaseSettings
from typing import Optional

class Settings(BaseSettings):
    # Database (empty DATABASE_URL falls back to the POSTGRES_* parts)
    DATABASE_URL: str = "sqlite:///./streamix.db"
    POSTGRES_USER: str = "streamix"
    POSTGRES_PASSWORD: str = "streamix"
    POSTGRES_HOST: str = "localhost"
    POSTGRES_PORT: int = 5432
    POSTGRES_DB: str = "streamix"
    
    # Redis
    REDIS_HOST: Optional[str] = "localhost"
    REDIS_PORT: Optional[int] = 6379
    REDIS_PASSWORD: Optional[str] = None
    REDIS_DB: int = 0
    CACHE_TTL_SECONDS: int = 300
    
    # App
    APP_NAME: str = "Streamix Streaming Clustering Service"
    DEBUG: bool = True
    LOG_LEVEL: str = "INFO"
    OUT_DIR: str = "./artifacts"
    
    # Engines
    STREAMIX_THREADS: int = 4
    MAX_INIT_RETRIES: int = 3
    TRACE_MAX_RECORDS: int = 1_000_000
    ORACLE_TOL: float = 1e-9
    
    @property
    def database_url(self) -> str:
        if self.DATABASE_URL:
            return self.DATABASE_URL
        return f"postgresql://{self.POSTGRES_USER}:{self.POSTGRES_PASSWORD}@{self.POSTGRES_HOST}:{self.POSTGRES_PORT}/{self.POSTGRES_DB}"
    
    class Config:
        env_file = ".env"

settings = Settings()
