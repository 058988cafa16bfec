import pytest

_VERDICTS = {}


class _Verdict:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.recorded = False

    def __call__(self, passed, detail=""):
        _VERDICTS[self.number] = (self.title, bool(passed), detail)
        self.recorded = True
        return passed


@pytest.fixture
def criterion(request):
    """Record the verdict of one acceptance criterion for the end-of-run table."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    verdict = _Verdict(number, title)
    yield verdict
    if not verdict.recorded:
        _VERDICTS[number] = (title, False, "raised before reaching a verdict")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_VERDICTS):
        title, passed, detail = _VERDICTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}  {status}  {title}: {detail}")
