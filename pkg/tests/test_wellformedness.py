import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qoptlab.fixtures import builders as b
from qoptlab.wellformedness import (
    check_global_unitarity,
    check_local,
    check_orthogonality,
    check_separability,
    check_unit_length,
    full_report,
    local_conditions_pass,
    norm_identity_residual,
    perturb_table,
    random_valid_table,
)


def test_corpus_machines_are_well_formed(machines):
    for name, (m, _) in machines.items():
        assert local_conditions_pass(m) == (name != "bad-separability"), name


def test_bad_separability_fails_only_separability():
    m = b.bad_separability_machine()
    assert check_unit_length(m).passed
    assert check_orthogonality(m).passed
    sep = check_separability(m)
    assert not sep.passed and sep.violations
    assert not check_global_unitarity(m).passed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.booleans())
def test_random_valid_tables_pass_everything(seed, n_states, real):
    m = random_valid_table(np.random.default_rng(seed), n_states=n_states, real=real)
    assert local_conditions_pass(m)
    assert check_global_unitarity(m).passed


@pytest.mark.parametrize("kind", ["scale", "mix", "phase"])
def test_perturbations_break_local_conditions(kind):
    rng = np.random.default_rng(5)
    for _ in range(5):
        m = perturb_table(rng, random_valid_table(rng, n_states=2), kind)
        assert not local_conditions_pass(m)
        assert not check_global_unitarity(m).passed


def test_scale_perturbation_flags_unit_length():
    rng = np.random.default_rng(9)
    m = perturb_table(rng, random_valid_table(rng), "scale")
    report = check_unit_length(m)
    assert not report.passed
    assert report.violations[0]["norm"] == pytest.approx(1.25)


@pytest.mark.parametrize("seed", range(6))
def test_separability_norm_identity(seed):
    m = random_valid_table(np.random.default_rng(seed), n_states=2, k=1 + seed % 2)
    assert norm_identity_residual(m) < 1e-12


def test_report_lists_conditions():
    rep = full_report(b.coin_flip_machine())
    assert rep["passed"] and rep["globalPass"]
    assert {"unit_length", "orthogonality", "separability"} <= set(rep)
    assert [r.condition for r in check_local(b.coin_flip_machine())] == ["unit_length", "orthogonality", "separability"]
