import hashlib
import json
import os
from pathlib import Path
from typing import Any, Optional

CACHE_ENV = "SUPERAPPROX_CACHE_DIR"
DEFAULT_CACHE_DIR = Path(".superapprox_cache")


def default_cache_dir() -> Path:
    override = os.getenv(CACHE_ENV)
    return Path(override) if override else DEFAULT_CACHE_DIR


class SurveyCache:
    """
    Survey-row cache.
    Keyed by (generator digest, modulus, seed, max_order).
    Stores one JSON record per row; the directory is created on first write.
    """

    def __init__(self, cache_dir: Optional[Path] = None):
        self.cache_dir = cache_dir if cache_dir is not None else default_cache_dir()

    @staticmethod
    def cache_key(gens_digest: str, modulus: int, seed: int, max_order: int) -> str:
        key = f"{gens_digest}_{modulus}_{seed}_{max_order}"
        return hashlib.sha256(key.encode("utf-8")).hexdigest()

    def _cache_path(self, key: str) -> Path:
        return self.cache_dir / f"{key}.json"

    def get(
        self, gens_digest: str, modulus: int, seed: int, max_order: int
    ) -> Optional[dict[str, Any]]:
        """Return the cached record if present and readable, else None."""
        path = self._cache_path(self.cache_key(gens_digest, modulus, seed, max_order))
        if not path.exists():
            return None
        try:
            with open(path, encoding="utf-8") as f:
                record = json.load(f)
        except json.JSONDecodeError:
            return None
        return record if isinstance(record, dict) else None

    def set(
        self,
        gens_digest: str,
        modulus: int,
        seed: int,
        max_order: int,
        record: dict[str, Any],
    ) -> None:
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        path = self._cache_path(self.cache_key(gens_digest, modulus, seed, max_order))
        with open(path, "w", encoding="utf-8") as f:
            json.dump(record, f, indent=2, sort_keys=True)

    def clear(self) -> None:
        if not self.cache_dir.exists():
            return
        for file in self.cache_dir.glob("*.json"):
            file.unlink()
