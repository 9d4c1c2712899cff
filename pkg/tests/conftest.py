from __future__ import annotations

import json
import warnings

import pytest

from dgverify.harness.batch import generate_batch, run_batch_metrics
from dgverify.harness.fixtures import FIXTURE_EPOCH, generate_fixtures
from dgverify.harness.runtime import GatewayClient, in_process_gateway
from dgverify.model import Clock

warnings.filterwarnings("ignore", message=".*httpx.*starlette.testclient.*")

CORPUS_SEED = 7
BATCH_SEED = 11
BATCH_SIZE = 1200

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    return generate_fixtures(CORPUS_SEED, tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def corpus_index(corpus):
    return json.loads((corpus / "corpus.json").read_text())


@pytest.fixture(scope="session")
def gateway(corpus):
    return in_process_gateway(corpus)


@pytest.fixture(scope="session")
def clock():
    return Clock(FIXTURE_EPOCH)


@pytest.fixture(scope="session")
def client(corpus):
    with GatewayClient.in_process(corpus) as c:
        yield c


@pytest.fixture(scope="session")
def batch_dir(corpus, tmp_path_factory):
    return generate_batch(corpus, tmp_path_factory.mktemp("batch"), BATCH_SEED, BATCH_SIZE)


@pytest.fixture(scope="session")
def batch_run(batch_dir, client, tmp_path_factory):
    out = tmp_path_factory.mktemp("reports")
    report = run_batch_metrics(batch_dir, client, out)
    records = [json.loads(line) for line in (out / "metrics.jsonl").read_text().splitlines()]
    return report, records, out


@pytest.fixture
def acceptance():
    """Record one criterion outcome for the end-of-run summary."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number} ({title}): {'PASS' if passed else 'FAIL'} {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
