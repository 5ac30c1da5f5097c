import pytest

_RESULTS: dict[int, tuple[str, bool, str]] = {}


class CriterionRecorder:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title

    def check(self, ok: bool, detail: str) -> None:
        """Record and print the outcome, then fail the test if ``ok`` is false."""
        _RESULTS[self.number] = (self.title, bool(ok), detail)
        print(_line(self.number, self.title, ok, detail))
        assert ok, detail


def _line(number, title, ok, detail):
    return f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}"


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    _RESULTS.setdefault(number, (title, False, "did not complete"))
    return CriterionRecorder(number, title)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        terminalreporter.write_line(_line(number, *_RESULTS[number]))
