"""
Run manager for tracking the sub-runs of a reproduction.
In-memory and thread-safe; sub-runs update their own entry from worker threads.
"""
import threading
import uuid
from datetime import datetime, timezone
from enum import Enum
from typing import Dict, List, Optional


class RunStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunManager:
    """Singleton registry of sub-runs."""

    _instance = None
    _runs: Dict[str, dict] = {}
    _lock = threading.Lock()

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(RunManager, cls).__new__(cls)
        return cls._instance

    def create_run(self, case: str, variant: str) -> str:
        run_id = str(uuid.uuid4())
        with self._lock:
            self._runs[run_id] = {
                "run_id": run_id,
                "case": case,
                "variant": variant,
                "status": RunStatus.PENDING,
                "created_at": _now(),
                "updated_at": _now(),
                "message": "waiting to start",
                "result": None,
                "error": None,
            }
        return run_id

    def update_run(self, run_id: str, status: Optional[RunStatus] = None,
                   message: Optional[str] = None, result: Optional[dict] = None,
                   error: Optional[str] = None) -> bool:
        with self._lock:
            run = self._runs.get(run_id)
            if run is None:
                return False
            if status:
                run["status"] = status
            if message:
                run["message"] = message
            if result is not None:
                run["result"] = result
            if error:
                run["error"] = error
            run["updated_at"] = _now()
        return True

    def get_run(self, run_id: str) -> Optional[dict]:
        with self._lock:
            run = self._runs.get(run_id)
            return dict(run) if run else None

    def delete_run(self, run_id: str) -> bool:
        with self._lock:
            return self._runs.pop(run_id, None) is not None

    def get_all_runs(self, case: Optional[str] = None) -> List[dict]:
        with self._lock:
            return [dict(r) for r in self._runs.values() if case is None or r["case"] == case]


# Singleton instance
run_manager = RunManager()
