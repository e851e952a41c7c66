import pytest

_ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict("A1", ok, "detail")``."""

    def record(tag, ok, detail=""):
        _ACCEPTANCE[tag] = (bool(ok), detail)
        line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
        with request.config.pluginmanager.get_plugin("capturemanager").global_and_fixture_disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for tag in sorted(_ACCEPTANCE, key=lambda t: int(t[1:])):
        ok, detail = _ACCEPTANCE[tag]
        terminalreporter.write_line(f"{tag} {'PASS' if ok else 'FAIL'}  {detail}")
