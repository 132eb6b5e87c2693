import numpy as np
import pytest

from lfdeblur.lightfield import Intrinsics, LightField


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_lf(rng, U=3, V=3, H=8, W=8, intrinsics=None, quantized=False):
    data = rng.random((U, V, H, W, 3))
    if quantized:
        data = np.round(data * 255) / 255
    return LightField(data.astype(np.float32), intrinsics or Intrinsics())


@pytest.fixture
def small_lf(rng):
    return random_lf(rng)


# ------------------------------------------------------------ acceptance report

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    num, title = dict(report.user_properties).get("criterion", (None, None))
    if num is None:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[num] = (title, report.passed, detail)


@pytest.fixture(autouse=True)
def _criterion_tag(request, record_property):
    mark = request.node.get_closest_marker("criterion")
    if mark is not None:
        record_property("criterion", tuple(mark.args))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[num]
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
