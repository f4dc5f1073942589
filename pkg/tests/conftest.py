from __future__ import annotations

import time

import pytest

SESSION_START = time.perf_counter()


def pytest_collection_modifyitems(session, config, items):
    # acceptance criteria run last so the whole-suite runtime criterion can
    # observe the full run
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")

from krag.dsl import parse_facts, parse_statements
from krag.fixtures import (
    CAR_SALE_FACTS,
    CAR_SALE_RULES,
    GOODS_SALE_RULES,
    SOFTWARE_CONTRACT_FACTS,
    SOFTWARE_CONTRACT_RULES,
    demo_store,
)
from krag.inference import compile_statements
from krag.retrieval import build_index

REFUND_DUE_RULES = """\
scenario {
  party buyer proponent
  party seller opponent
  party court judge
}

statement refund_due proponent buyer {
  requires: contract_formed, seller_breach, damages_incurred;
  except: force_majeure, approved_extension;
}
"""


@pytest.fixture(scope="session")
def refund_due_set():
    return parse_statements(REFUND_DUE_RULES)


@pytest.fixture(scope="session")
def refund_due_graph(refund_due_set):
    return compile_statements(refund_due_set)


@pytest.fixture(scope="session")
def car_sale_set():
    return parse_statements(CAR_SALE_RULES)


@pytest.fixture(scope="session")
def car_sale_graph(car_sale_set):
    return compile_statements(car_sale_set)


@pytest.fixture(scope="session")
def car_sale_script():
    return parse_facts(CAR_SALE_FACTS)


@pytest.fixture(scope="session")
def software_set():
    return parse_statements(SOFTWARE_CONTRACT_RULES)


@pytest.fixture(scope="session")
def software_script():
    return parse_facts(SOFTWARE_CONTRACT_FACTS)


@pytest.fixture(scope="session")
def goods_sale_set():
    return parse_statements(GOODS_SALE_RULES)


@pytest.fixture(scope="session")
def store():
    return demo_store()


@pytest.fixture(scope="session")
def index(store):
    return build_index(store)
