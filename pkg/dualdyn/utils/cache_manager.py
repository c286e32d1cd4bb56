"""
Equilibrium cache.
LRU in-memory store so repeated runs on the same game and mirror spec do not
re-solve for NE or perturbed NE.
"""
import hashlib
import json
import logging
import threading
from collections import OrderedDict
from typing import Any, Optional

import numpy as np

from dualdyn.config.settings import cache_size
from dualdyn.utils.functions import to_jsonable

logger = logging.getLogger(__name__)


class EquilibriumCache:
    """Cache of equilibrium vectors keyed by a hash of the problem description."""

    def __init__(self, max_size: int = 32):
        self.max_size = max_size
        self._cache: "OrderedDict[str, np.ndarray]" = OrderedDict()
        self._lock = threading.Lock()

    @staticmethod
    def make_key(**parts: Any) -> str:
        """SHA256 over the canonical JSON of ``parts``."""
        blob = json.dumps(to_jsonable(parts), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def get(self, key: str) -> Optional[np.ndarray]:
        with self._lock:
            if key not in self._cache:
                logger.debug("❌ equilibrium cache miss %s", key[:12])
                return None
            self._cache.move_to_end(key)
            logger.debug("✅ equilibrium cache hit %s", key[:12])
            return self._cache[key].copy()

    def set(self, key: str, values: np.ndarray) -> None:
        with self._lock:
            if key not in self._cache and len(self._cache) >= self.max_size:
                evicted, _ = self._cache.popitem(last=False)
                logger.debug("♻️  evicted equilibrium %s", evicted[:12])
            self._cache[key] = np.array(values, dtype=float)
            self._cache.move_to_end(key)

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def size(self) -> int:
        return len(self._cache)


# Singleton instance
equilibrium_cache = EquilibriumCache(max_size=cache_size())
