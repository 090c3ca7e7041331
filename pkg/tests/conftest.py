import time

import pytest

from elbowid.plant import PlantConfig
from elbowid.rl import NpgConfig, train

# criterion number -> (title, passed, detail); filled by the acceptance tests
ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str):
    ACCEPTANCE[number] = (title, passed, detail)
    print(f"criterion {number} {title}: {'PASS' if passed else 'FAIL'} ({detail})")


@pytest.fixture(scope="session")
def trained():
    """The desk-scale policy: default NPG settings, seed 0."""
    started = time.perf_counter()
    result = train(PlantConfig(), NpgConfig())
    return result, time.perf_counter() - started


@pytest.fixture(scope="session")
def trained_policy_file(trained, tmp_path_factory):
    path = tmp_path_factory.mktemp("policy") / "policy.json"
    trained[0].policy.save(path)
    return path


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {number}. {title}: {detail}")
