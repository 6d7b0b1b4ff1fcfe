import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry = _criteria.setdefault(marker.args[0], {"title": marker.args[1], "passed": True})
        entry["passed"] &= rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        c = _criteria[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if c['passed'] else 'FAIL'}  {c['title']}")


@pytest.fixture(scope="session")
def default_dataset():
    from rotorbar.dataset import dataset_from_records
    from rotorbar.signals import GeneratorConfig, generate_dataset

    return dataset_from_records(generate_dataset(GeneratorConfig(), 40, 0))
