import redis
import json
import logging
from typing import Any, Dict, List, Optional
from app.core.config import settings

logger = logging.getLogger(__name__)

KEY_PREFIX = "streamix:v1"
RUN_LIST_PREFIX = f"{KEY_PREFIX}:runs:list:"


def run_list_key(skip: int, limit: int) -> str:
    return f"{RUN_LIST_PREFIX}{skip}:{limit}"


def run_summary_key(config_hash: str) -> str:
    return f"{KEY_PREFIX}:runs:summary:{config_hash}"


class RunCache:
    """Redis cache of stored-run listings and of run summaries keyed by config hash.

    Every method degrades to a miss (or a no-op) when Redis is unreachable, so
    callers never need to guard against the cache.
    """

    def __init__(self):
        self.redis_client = None
        self._connect()

    def _connect(self):
        try:
            self.redis_client = redis.Redis(
                host=settings.REDIS_HOST,
                port=settings.REDIS_PORT,
                password=settings.REDIS_PASSWORD,
                db=settings.REDIS_DB,
                decode_responses=True,
                socket_connect_timeout=5,
                socket_timeout=5
            )
            self.redis_client.ping()
            logger.info(f"Run cache connected to Redis at {settings.REDIS_HOST}:{settings.REDIS_PORT}")
        except Exception as e:
            logger.warning(f"Redis unavailable, running without a run cache: {e}")
            self.redis_client = None

    def _read(self, key: str) -> Optional[Any]:
        if not self.redis_client:
            return None
        try:
            raw = self.redis_client.get(key)
        except Exception as e:
            logger.error(f"Cache read failed for {key}: {e}")
            return None
        if raw is None:
            logger.info(f"Cache miss for {key}")
            return None
        logger.info(f"Cache hit for {key}")
        return json.loads(raw)

    def _write(self, key: str, value: Any) -> bool:
        if not self.redis_client:
            return False
        try:
            # datetimes fall back to str
            self.redis_client.setex(key, settings.CACHE_TTL_SECONDS, json.dumps(value, default=str))
            return True
        except Exception as e:
            logger.error(f"Cache write failed for {key}: {e}")
            return False

    def get_run_list(self, skip: int, limit: int) -> Optional[List[Dict[str, Any]]]:
        return self._read(run_list_key(skip, limit))

    def set_run_list(self, skip: int, limit: int, runs: List[Dict[str, Any]]) -> bool:
        return self._write(run_list_key(skip, limit), runs)

    def get_run_summary(self, config_hash: str) -> Optional[Dict[str, Any]]:
        return self._read(run_summary_key(config_hash))

    def set_run_summary(self, config_hash: str, run: Dict[str, Any]) -> bool:
        return self._write(run_summary_key(config_hash), run)

    def invalidate_run_lists(self) -> int:
        """Drop every cached listing; a new run changes all pages."""
        if not self.redis_client:
            return 0
        try:
            keys = list(self.redis_client.scan_iter(match=f"{RUN_LIST_PREFIX}*"))
            if keys:
                self.redis_client.delete(*keys)
            logger.info(f"Invalidated {len(keys)} cached run listings")
            return len(keys)
        except Exception as e:
            logger.warning(f"Run list invalidation failed: {e}")
            return 0

    def is_available(self) -> bool:
        return self.redis_client is not None

cache_service = RunCache()
