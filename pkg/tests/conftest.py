import os
from pathlib import Path

import numpy as np
import pytest

from pbit_osc.graph import Graph, load_gset

GSET_ENV = "PBIT_GSET_DIR"


def gset_path(name: str) -> Path | None:
    root = os.environ.get(GSET_ENV)
    if not root:
        return None
    for candidate in (Path(root) / name, Path(root) / f"{name}.txt", Path(root) / name.lower()):
        if candidate.is_file():
            return candidate
    return None


@pytest.fixture
def gset():
    """Loader for standard G-set files found under $PBIT_GSET_DIR; skips when absent."""
    def load(name: str) -> Graph:
        path = gset_path(name)
        if path is None:
            pytest.skip(f"{name} not found; set {GSET_ENV} to a directory holding the G-set files")
        return load_gset(path)
    return load


def random_unit_graph(n: int, m: int, seed: int, name: str = "surrogate") -> Graph:
    """Uniform random graph with exactly m unit-weight edges (same shape as G1 for 800/19176)."""
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    pick = np.sort(rng.choice(iu.size, m, replace=False))
    return Graph(n, tuple((int(iu[k]), int(ju[k]), 1.0) for k in pick), name=name)


@pytest.fixture(scope="session")
def g1_surrogate() -> Graph:
    return random_unit_graph(800, 19176, seed=1, name="g1like")


# --- acceptance reporting ------------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion():
    """``record(n, ok, detail)`` logs one verdict line, then asserts ``ok``."""
    def record(n: int, ok: bool, detail: str = ""):
        _ACCEPTANCE[n] = ("PASS" if ok else "FAIL", detail)
        assert ok, f"criterion {n}: {detail}"

    def skip(n: int, reason: str):
        _ACCEPTANCE[n] = ("SKIP", reason)
        pytest.skip(reason)

    record.skip = skip
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        verdict, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {verdict}  {detail}")
