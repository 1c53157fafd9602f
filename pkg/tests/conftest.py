import pytest

_ACCEPTANCE: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and rep.when == "call":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE[item.name] = ("PASS" if rep.passed else "FAIL", doc)
    elif item.module.__name__.endswith("test_acceptance") and rep.when == "setup" and rep.failed:
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE[item.name] = ("FAIL", doc)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        status, doc = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {doc}")
    n_pass = sum(s == "PASS" for s, _ in _ACCEPTANCE.values())
    terminalreporter.write_line(f"{n_pass}/{len(_ACCEPTANCE)} criteria pass")
