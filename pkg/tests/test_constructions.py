import numpy as np
import pytest

from qoptlab.constructions import (
    QubitSource,
    averaging_sandwich,
    compose_with_fp,
    construction_from_dict,
    convex_combine,
    max_over_classical,
    max_sup_swap,
    product_over_all,
    tensor_index_value,
    verify_construction,
)
from qoptlab.errors import SourceNotCleanError
from qoptlab.fixtures import builders as b
from qoptlab.fixtures import load_document
from qoptlab.qopt import solve_opt


@pytest.fixture(scope="module")
def sources():
    return {n: QubitSource.from_dict(load_document(f"source-{n}")) for n in b.SOURCE_AMPLITUDES}


def test_source_weights(sources):
    assert np.allclose(sources["three-four"].weights("1"), [0.36, 0.64])
    assert np.allclose(sources["one"].weights("1"), [0.0, 1.0])


def test_unclean_source_is_rejected():
    with pytest.raises(SourceNotCleanError):
        QubitSource(b.bad_separability_machine(), 1, 1)


def test_max_over_classical(problems):
    f = problems["family-max"][0]
    g = max_over_classical(f, 1)
    assert solve_opt(g, "1") == pytest.approx(0.6, abs=1e-9)
    assert max_over_classical(f, 0) is f


@pytest.mark.parametrize("name,expected", [("plus", 0.4), ("one", 0.6), ("three-four", 0.36 * 0.2 + 0.64 * 0.6)])
def test_convex_combination(problems, sources, name, expected):
    h = convex_combine(problems["family-max"][0], sources[name])
    assert solve_opt(h, "1") == pytest.approx(expected, abs=1e-9)


def test_product_over_all(problems):
    f = problems["family-max"][0]
    assert solve_opt(product_over_all(f, 1), "1") == pytest.approx(0.12, abs=1e-9)
    f2 = problems["family-product"][0]
    assert solve_opt(product_over_all(f2, 2), "1") == pytest.approx(0.9 * 0.8 * 0.7 * 0.6, abs=1e-9)


@pytest.mark.parametrize("name,x,expected", [("identity", "01", 0.5), ("bitflip", "01", 0.7), ("reverse", "01", 0.7), ("constant:11", "00", 0.9)])
def test_compose_with_maps(problems, name, x, expected):
    assert solve_opt(compose_with_fp(problems["lookup"][0], name), x) == pytest.approx(expected, abs=1e-9)


def test_constructions_round_trip(problems, sources):
    f = problems["family-max"][0]
    for h in (max_over_classical(f, 1), convex_combine(f, sources["plus"]), product_over_all(f, 1)):
        assert solve_opt(construction_from_dict(h.to_dict()), "1") == pytest.approx(solve_opt(h, "1"))


def test_verification_record(problems):
    rec = verify_construction(max_over_classical(problems["family-max"][0], 1), "1")
    assert rec["difference"] < 1e-9 and rec["indexSize"] == 2


def test_max_sup_swap(problems):
    rep = max_sup_swap(problems["family-max"][0], "1", 1)
    assert rep["difference"] < 1e-9


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_averaging_sandwich(problems, m):
    assert averaging_sandwich(problems["lookup"][0], m, "10")["passed"]


def test_tensor_index_on_entangled_witness(problems):
    res = tensor_index_value(problems["bell"][0], "", [1, 1], samples=2000)
    assert res.value == pytest.approx(0.625, abs=1e-9)
    assert res.sampling_max <= res.value + 1e-12
    assert res.lambda_max == pytest.approx(1.0, abs=1e-9)


def test_tensor_of_independent_parts(problems):
    f = problems["lookup"][0]
    res = tensor_index_value([f, f], "01", samples=500)
    assert res.value == pytest.approx(0.25, abs=1e-9)
