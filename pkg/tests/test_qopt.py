import numpy as np
import pytest

from qoptlab.errors import DimensionCapError
from qoptlab.fixtures import builders as b
from qoptlab.qopt import (
    MachineProblem,
    extract_opt_matrix,
    power_problem,
    problem_from_dict,
    random_unit_vectors,
    sampling_lower_bound,
    solve_opt,
    square_problem,
)


def test_stored_values_match(problems):
    for name, (prob, inputs) in problems.items():
        for x, expected in inputs.items():
            assert solve_opt(prob, x) == pytest.approx(expected, abs=1e-9), (name, x)


def test_known_matrices(problems):
    proj = extract_opt_matrix(problems["projector"][0], "0").entries
    assert np.allclose(proj, [[0, 0], [0, 1]], atol=1e-12)
    had = extract_opt_matrix(problems["hadamard-sandwich"][0], "0").entries
    assert np.allclose(had, 0.5 * np.ones((2, 2)), atol=1e-12)
    flat = extract_opt_matrix(problems["index-ignoring-0.25"][0], "1").entries
    assert np.allclose(flat, 0.25 * np.eye(2), atol=1e-12)


def test_entangled_witness_spectrum(problems):
    om = extract_opt_matrix(problems["bell"][0], "")
    w = np.sort(np.linalg.eigvalsh(om.entries))
    assert w[-1] == pytest.approx(1.0, abs=1e-12)
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(om.max_eigenvector, phi, atol=1e-9)


def test_quadratic_form_matches_direct_simulation(problems, rng):
    prob = problems["lookup"][0]
    om = extract_opt_matrix(prob, "10")
    for phi in random_unit_vectors(rng, 10, 2):
        assert prob.simulate("10", phi) == pytest.approx(np.real(phi.conj() @ om.entries @ phi), abs=1e-12)


def test_adjoint_is_the_inner_product_adjoint(problems, rng):
    prob = problems["family-max"][0]
    x = "1011"
    a = prob.image_matrix(x)
    for v in random_unit_vectors(rng, 3, 2):
        w = a @ v
        img = prob.forward(x, v)
        assert np.allclose(prob.adjoint(x, img), a.conj().T @ w, atol=1e-12)


def test_sampling_never_exceeds_lambda(problems):
    prob = problems["lookup"][0]
    res = sampling_lower_bound(prob, "01", count=500, seed=3)
    lam = solve_opt(prob, "01")
    assert res.sample_max <= lam + 1e-12
    assert res.refined == pytest.approx(lam, abs=1e-9)


def test_square_and_power(problems):
    prob = problems["family-max"][0]
    x = "1011"
    lam = solve_opt(prob, x)
    assert solve_opt(square_problem(prob), x) == pytest.approx(lam**2, abs=1e-12)
    for m in (1, 2, 3, 4):
        assert solve_opt(power_problem(prob, m), x) == pytest.approx(lam**m, abs=1e-12)
    assert square_problem(prob).index_size == prob.index_size
    with pytest.raises(ValueError):
        power_problem(prob, 0)


def test_round_trip_problem_document(problems):
    prob = problems["bell"][0]
    again = problem_from_dict(prob.to_dict())
    assert solve_opt(again, "") == pytest.approx(solve_opt(prob, ""))
    sq = problem_from_dict(square_problem(prob).to_dict())
    assert solve_opt(sq, "") == pytest.approx(1.0, abs=1e-9)


def test_random_witness_values(rng):
    m, t = b.random_witness(rng, 2)
    prob = MachineProblem(m, 2, t)
    for x in "01":
        om = extract_opt_matrix(prob, x)
        assert om.max_eigenvalue == pytest.approx(np.linalg.eigvalsh(om.entries)[-1], abs=1e-12)
        assert om.residual < 1e-9


def test_dimension_cap():
    prob = MachineProblem(b.identity_machine(), 13, 1)
    with pytest.raises(DimensionCapError):
        extract_opt_matrix(prob, "0")
