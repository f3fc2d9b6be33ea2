import os
from pathlib import Path

import pytest

from ipbnn.data import load_idx_dir

MNIST_DIR = Path(os.environ.get("IPBNN_MNIST_DIR", "/root/data/mnist"))


def _has_mnist() -> bool:
    try:
        load_idx_dir(MNIST_DIR, "t10k")
    except (OSError, ValueError):
        return False
    return True


@pytest.fixture(scope="session")
def mnist_dir() -> Path:
    if not _has_mnist():
        pytest.skip(f"MNIST IDX files not found in {MNIST_DIR} (set IPBNN_MNIST_DIR)")
    return MNIST_DIR


ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's verdict and fail the test if any check failed."""

    def report(number: int, checks: dict[str, bool], detail: str = "") -> None:
        failed = [name for name, ok in checks.items() if not ok]
        verdict = "FAIL" if failed else "PASS"
        note = detail + (f"; failed: {', '.join(failed)}" if failed else "")
        ACCEPTANCE[number] = (verdict, note)
        with request.config.pluginmanager.get_plugin("capturemanager").global_and_fixture_disabled():
            print(f"\nACCEPTANCE criterion {number}: {verdict} ({note})")
        assert not failed, f"criterion {number}: {note}"

    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        verdict, note = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {verdict}  {note}")
