import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles / test doubles

from ra_ner import fixtures, kb


@pytest.fixture(scope="session")
def benchmark():
    return fixtures.low_context_benchmark()


@pytest.fixture(scope="session")
def benchmark_kb(benchmark):
    store = kb.ingest(benchmark.kb_records)
    return store, kb.build_index(store)


@pytest.fixture(scope="session")
def oracle_kb():
    """500-document synthetic KB plus its index, for oracle comparisons."""
    store = kb.ingest(fixtures.synthetic_kb(500, seed=11))
    return store, kb.build_index(store)


ECHO_ADAPTER = f"cmd:{sys.executable} {Path(__file__).parent / 'echo_adapter.py'}"


@pytest.fixture
def echo_endpoint():
    return ECHO_ADAPTER
