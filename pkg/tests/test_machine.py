import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qoptlab.errors import (
    IndexSizeMismatchError,
    InputTooLongError,
    MachineFormatError,
    NonTotalDeltaError,
    SpaceTooLargeError,
    UndeclaredSymbolError,
)
from qoptlab.fixtures import builders as b
from qoptlab.fixtures import load_document
from qoptlab.machine import (
    ConfigurationSpace,
    emit_machine,
    encode_input,
    machine_from_dict,
    machine_to_dict,
    pair,
    parse_machine,
)
from qoptlab.wellformedness import random_valid_table


def test_emit_parse_round_trip_is_stable(machines):
    for name, (m, _) in machines.items():
        text = emit_machine(m)
        again = parse_machine(text)
        assert emit_machine(again) == text, name


def test_random_tables_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(10):
        m = random_valid_table(rng, n_states=2, k=int(rng.integers(1, 3)), real=False)
        assert machine_to_dict(machine_from_dict(machine_to_dict(m))) == machine_to_dict(m)


def test_named_amplitudes_parse():
    doc = load_document("coin")
    text = json.dumps(doc)
    assert parse_machine(text).is_real()


def test_undeclared_symbol_is_reported():
    doc = load_document("identity")
    doc["delta"][0]["to"][1] = ["#"]
    with pytest.raises((UndeclaredSymbolError, MachineFormatError)):
        machine_from_dict(doc)


def test_missing_row_is_reported():
    doc = load_document("identity")
    doc["delta"] = [e for e in doc["delta"] if e["from"] != ["q0", ["_"]]]
    with pytest.raises((NonTotalDeltaError, MachineFormatError)):
        machine_from_dict(doc)


def test_malformed_json_reports_location():
    with pytest.raises(MachineFormatError) as err:
        parse_machine('{"states": [')
    assert "line" in str(err.value)


def test_index_bijection_small_space():
    m = b.coin_flip_machine()
    space = ConfigurationSpace(m, 5)
    seen = set()
    for i in range(len(space)):
        c = space.config(i)
        assert space.index(c) == i
        seen.add(c)
    assert len(seen) == len(space)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10**9))
def test_index_bijection_two_tapes(raw):
    space = ConfigurationSpace(b.two_tape_accept_machine(), 5)
    i = raw % len(space)
    assert space.index(space.config(i)) == i


def test_space_cap():
    with pytest.raises(SpaceTooLargeError):
        ConfigurationSpace(b.oracle_machine(), 5)


def test_pair_layout():
    assert pair("10", "1") == "11" + "0" + "10" + "1"
    assert pair("", "01") == "001"


def test_encode_input_places_bits_and_index():
    m = b.projector_witness()
    vec = encode_input(m, "1", np.array([0.6, 0.8]), windows=7)
    assert len(vec) == 2
    assert sorted(abs(a) for a in vec.values()) == pytest.approx([0.6, 0.8])
    gamma = m.tapes[0].gamma
    for c in vec:
        assert gamma[c.cells[0][m.io.x_offset]] == "1"


def test_encode_input_errors():
    m = b.projector_witness()
    with pytest.raises(IndexSizeMismatchError):
        encode_input(m, "0", np.ones(3) / np.sqrt(3))
    with pytest.raises(InputTooLongError):
        encode_input(m, "0101", windows=5)
    with pytest.raises(MachineFormatError):
        encode_input(m, "2")
