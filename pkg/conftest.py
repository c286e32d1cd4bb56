import pytest

from dualdyn.utils.cache_manager import equilibrium_cache


@pytest.fixture(autouse=True)
def isolated_output(tmp_path, monkeypatch):
    """Every test writes artifacts into its own folder and starts with an empty cache."""
    out = tmp_path / "output"
    monkeypatch.setenv("DUALDYN_OUTPUT_DIR", str(out))
    equilibrium_cache.clear()
    yield out
    equilibrium_cache.clear()
