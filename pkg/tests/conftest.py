import numpy as np
import pytest

from qoptlab.fixtures import load_document, load_manifest
from qoptlab.machine import machine_from_dict
from qoptlab.qopt import problem_from_dict


def _entries(kind):
    return [e for e in load_manifest()["fixtures"] if e["kind"] == kind]


@pytest.fixture(scope="session")
def problems():
    """``{name: (problem, {input: expected value})}`` for the bundled corpus."""
    return {
        e["name"]: (problem_from_dict(load_document(e["name"])), e["extra"]["inputs"])
        for e in _entries("problem")
    }


@pytest.fixture(scope="session")
def machines():
    return {e["name"]: (machine_from_dict(load_document(e["name"])), e["extra"]) for e in _entries("machine")}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
