from __future__ import annotations

import numpy as np
import pytest

from whatif.ingest import Dataset, VariableSpec

_CRITERIA: list[tuple[str, str, str]] = []


def record_criterion(name: str, passed: bool | None, detail: str = "") -> None:
    """Remember one acceptance verdict; ``None`` means skipped."""
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    _CRITERIA.append((name, status, detail))
    print(f"{status} {name}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, detail in _CRITERIA:
        terminalreporter.write_line(f"{status} {name}: {detail}")


def make_dataset(values, kinds=None, names=None) -> Dataset:
    values = np.asarray(values, dtype=float)
    p = values.shape[1]
    names = names or [f"v{j}" for j in range(p)]
    kinds = kinds or ["numeric"] * p
    specs = tuple(VariableSpec(nm, k) for nm, k in zip(names, kinds))
    return Dataset(values, np.isnan(values), specs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
