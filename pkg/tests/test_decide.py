from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qoptlab.decide import (
    ACCEPT,
    REJECT,
    VIOLATED,
    binary_search_value,
    char_poly_integer,
    char_poly_max_root,
    definability_verdicts,
    dyadic_floor,
    hermitian_max_eigen,
    jacobi_eigen,
    pp_inequalities,
    qop_predicate,
    rescale_value,
    threshold_oracle,
)
from qoptlab.errors import BoundaryAmbiguityError, NonMonotoneOracleError, NonSymmetricError


def _random_psd(rng, n, complex_=False):
    a = rng.standard_normal((n, n))
    if complex_:
        a = a + 1j * rng.standard_normal((n, n))
    p = a @ a.conj().T
    return p / np.linalg.eigvalsh(p)[-1] * rng.uniform(0.1, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.booleans())
def test_jacobi_matches_numpy(seed, n, complex_):
    p = _random_psd(np.random.default_rng(seed), n, complex_)
    lam, v, res = hermitian_max_eigen(p)
    assert lam == pytest.approx(np.linalg.eigvalsh(p)[-1], abs=1e-12)
    assert res < 1e-10
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_jacobi_full_spectrum():
    p = _random_psd(np.random.default_rng(0), 8)
    w, v = jacobi_eigen(p)
    assert np.allclose(np.sort(w), np.linalg.eigvalsh(p), atol=1e-12)
    assert np.allclose(v.T @ v, np.eye(8), atol=1e-12)


def test_rejects_non_hermitian():
    with pytest.raises(NonSymmetricError):
        hermitian_max_eigen(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_char_poly_of_small_integer_matrix():
    # det(zI - [[2,1],[1,2]]) = z^2 - 4z + 3
    assert char_poly_integer([[2, 1], [1, 2]]) == [1, -4, 3]


@pytest.mark.parametrize("seed", range(5))
def test_char_poly_root_matches_jacobi(seed):
    p = _random_psd(np.random.default_rng(seed), 3 + 3 * seed)
    assert char_poly_max_root(p) == pytest.approx(hermitian_max_eigen(p)[0], abs=1e-8)


def test_char_poly_repeated_roots():
    assert char_poly_max_root(0.25 * np.eye(4)) == pytest.approx(0.25, abs=1e-10)
    assert char_poly_max_root(np.zeros((2, 2))) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("value,bits,expected,calls", [(0.625, 3, 5, 3), (0.0, 4, 0, 4), (0.99, 8, 253, 8), (0.999, 8, 255, 9), (1.0, 3, 8, 4)])
def test_binary_search(value, bits, expected, calls):
    res = binary_search_value(threshold_oracle(value), bits)
    assert res.value.numerator == expected
    assert res.calls == calls


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1, exclude_max=True), st.integers(1, 12))
def test_binary_search_recovers_floor(value, bits):
    res = binary_search_value(threshold_oracle(value), bits)
    assert res.value.numerator == int(np.floor(value * 2**bits)) or value >= 1 - 2.0**-bits
    if value < 1 - 2.0**-bits:
        assert res.calls == bits


def test_binary_search_detects_non_monotone_oracle():
    seen = set()

    def liar(_x, t):
        # accepts every threshold the first time, rejects on repeat
        fresh = t not in seen
        seen.add(t)
        return fresh and t < Fraction(1)

    with pytest.raises(NonMonotoneOracleError):
        binary_search_value(liar, 3, verify=True)


def test_qop_predicate_and_boundary_flag():
    v = qop_predicate(0.7, 0.3, 2)
    assert v.result and not v.flagged
    assert (v.f_floor, v.g_floor) == (2, 1)
    flagged = qop_predicate(0.5, 0.3, 2)
    assert flagged.flagged and flagged.ambiguous == ["f"]
    with pytest.raises(BoundaryAmbiguityError):
        qop_predicate(0.5, 0.3, 2, strict=True)
    assert dyadic_floor(0.25 + 1e-13, 2) == (1, True)


def test_rescale_value():
    assert rescale_value(0.5, 4, 2) == pytest.approx(0.125)


def test_definability_verdicts():
    assert definability_verdicts(1.0) == {"boundedError": ACCEPT, "nonzero": ACCEPT, "exact": ACCEPT}
    assert definability_verdicts(0.0) == {"boundedError": REJECT, "nonzero": REJECT, "exact": REJECT}
    mid = definability_verdicts(0.5)
    assert mid["boundedError"] == VIOLATED and mid["exact"] == VIOLATED and mid["nonzero"] == ACCEPT


def test_pp_inequalities():
    q = 3
    g = [0.8, 0.4]
    f = [0.8 * (1 - 2**-4), 0.4 * 2**-4]
    assert pp_inequalities(f, g, [True, False], q)["passed"]
    assert not pp_inequalities([0.1], [0.8], [True], q)["passed"]
