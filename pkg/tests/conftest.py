import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rusle_rds.raster import GridSpec, Raster  # noqa: E402

# criterion number -> (passed, detail), filled by the acceptance module
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def spec():
    return GridSpec(6, 5, 100.0, 1000.0, 2000.0)


def make_raster(spec, values, valid=None):
    return Raster(spec, np.asarray(values, dtype=float).reshape(spec.shape), valid=valid)


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    from rusle_rds.synthetic import write_demo_dataset

    d = tmp_path_factory.mktemp("demo")
    write_demo_dataset(d, size=50)
    return d
