import numpy as np

from dualdyn.utils.cache_manager import EquilibriumCache
from dualdyn.utils.job_manager import RunManager, RunStatus, run_manager


class TestRunManager:
    def test_singleton(self):
        assert RunManager() is run_manager

    def test_lifecycle(self):
        run_id = run_manager.create_run("unit", "first")
        run = run_manager.get_run(run_id)
        assert run["status"] == RunStatus.PENDING
        assert run["variant"] == "first"

        assert run_manager.update_run(run_id, status=RunStatus.COMPLETED, message="done", result={"ok": True})
        run = run_manager.get_run(run_id)
        assert run["status"] == RunStatus.COMPLETED
        assert run["result"] == {"ok": True}

        assert run_manager.delete_run(run_id)
        assert run_manager.get_run(run_id) is None
        assert not run_manager.update_run(run_id, message="gone")

    def test_filter_by_case(self):
        ids = [run_manager.create_run("filter-case", name) for name in ("a", "b")]
        runs = run_manager.get_all_runs(case="filter-case")
        assert sorted(r["variant"] for r in runs) == ["a", "b"]
        for run_id in ids:
            run_manager.delete_run(run_id)

    def test_get_returns_copy(self):
        run_id = run_manager.create_run("unit", "copy")
        run_manager.get_run(run_id)["status"] = RunStatus.FAILED
        assert run_manager.get_run(run_id)["status"] == RunStatus.PENDING
        run_manager.delete_run(run_id)


class TestEquilibriumCache:
    def test_key_is_order_independent(self):
        first = EquilibriumCache.make_key(game="rps", params={"w": 1.0, "l": 5.0})
        second = EquilibriumCache.make_key(params={"l": 5.0, "w": 1.0}, game="rps")
        assert first == second
        assert first != EquilibriumCache.make_key(game="rps", params={"w": 1.0, "l": 4.0})

    def test_key_accepts_arrays(self):
        key = EquilibriumCache.make_key(phi=np.eye(2))
        assert key == EquilibriumCache.make_key(phi=[[1.0, 0.0], [0.0, 1.0]])

    def test_get_returns_copy(self):
        cache = EquilibriumCache(max_size=2)
        cache.set("k", np.array([0.5, 0.5]))
        cache.get("k")[0] = 9.0
        assert np.array_equal(cache.get("k"), [0.5, 0.5])

    def test_lru_eviction(self):
        cache = EquilibriumCache(max_size=2)
        cache.set("a", np.zeros(1))
        cache.set("b", np.ones(1))
        cache.get("a")
        cache.set("c", np.ones(1))
        assert cache.get("b") is None
        assert cache.get("a") is not None
        assert cache.size() == 2

    def test_clear(self):
        cache = EquilibriumCache()
        cache.set("a", np.zeros(3))
        cache.clear()
        assert cache.size() == 0
        assert cache.get("a") is None
