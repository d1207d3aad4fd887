import numpy as np
import pytest

from svrnaq.model import Batch, NetworkSpec

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.skipped):
        status = "SKIP" if report.skipped else "PASS" if report.passed else "FAIL"
        detail = dict(item.user_properties).get("detail", "")
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2]
        _CRITERIA.append(f"[{status}] {marker.args[0]}" + (f"  -- {detail}" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)


@pytest.fixture
def gen():
    return np.random.default_rng(12345)


@pytest.fixture
def detail(request):
    """Attach a one-line measurement to the acceptance summary line."""
    def set_detail(text):
        request.node.user_properties.append(("detail", text))
        print(text)
    return set_detail


def random_batch(gen, spec: NetworkSpec, b: int) -> Batch:
    x = gen.standard_normal((b, spec.layer_sizes[0]))
    if spec.is_classifier:
        labels = gen.integers(0, spec.layer_sizes[-1], size=b)
        y = np.eye(spec.layer_sizes[-1])[labels]
    else:
        y = gen.standard_normal((b, spec.layer_sizes[-1]))
    return Batch(x, y)


def random_spd(gen, d: int, cond: float = 100.0) -> np.ndarray:
    Q, _ = np.linalg.qr(gen.standard_normal((d, d)))
    return (Q * np.geomspace(1.0, cond, d)) @ Q.T
