from __future__ import annotations

import copy
import json
from pathlib import Path

import pytest

from rta import (
    DecisionObject,
    decision_from_value,
    load_constraint_dir,
    load_corpus_dir,
    load_model_file,
)

REPO = Path(__file__).resolve().parent.parent
CORPUS = REPO / "corpus"

# One pinned clock for every test that does not exercise timing itself.
CLOCK = "2026-01-07T00:00:00Z"


@pytest.fixture(scope="session")
def constraint_sets():
    return load_constraint_dir(CORPUS / "constraints")


@pytest.fixture(scope="session")
def suspension_set(constraint_sets):
    return constraint_sets["account_suspension"]


@pytest.fixture(scope="session")
def corpus_cases():
    return load_corpus_dir(CORPUS / "cases")


@pytest.fixture(scope="session")
def baseline_model():
    return load_model_file(CORPUS / "model" / "baseline.json")


@pytest.fixture(scope="session")
def unverified_case(corpus_cases):
    return next(c for c in corpus_cases if c.id == "account_suspension_unverified")


def decision_tree(**overrides) -> dict:
    """A valid decision value tree; override or delete (value=None) fields."""
    tree = {
        "decision_class": "account_suspension",
        "operation": "suspend_account",
        "target": "account:test",
        "scope": "single_account",
        "timing": "2026-01-05T14:30:00Z",
        "context": {"identity_verified": True, "authority_ref": "ticket-1"},
        "features": {"flags": 1.0, "similarity": 1.0, "confidence": 1.0, "prior_history": 1.0},
        "metadata": {"source": "test"},
    }
    for key, value in overrides.items():
        if value is None:
            tree.pop(key, None)
        else:
            tree[key] = value
    return copy.deepcopy(tree)


def make_decision(**overrides) -> DecisionObject:
    return decision_from_value(decision_tree(**overrides))


@pytest.fixture(name="decision_tree")
def _decision_tree_fixture():
    return decision_tree


@pytest.fixture(name="make_decision")
def _make_decision_fixture():
    return make_decision


@pytest.fixture()
def decision():
    return make_decision()


def load_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
