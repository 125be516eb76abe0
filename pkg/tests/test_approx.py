import numpy as np
import pytest

from qoptlab.approx import (
    calibrated_bits,
    check_approx_reduction,
    check_distance_bound,
    eval_maxqtm,
    eval_qap,
    pad_input,
    perturb_machine,
    quantize_and_simulate,
    quantize_machine,
)
from qoptlab.evolution import run
from qoptlab.fixtures import builders as b
from qoptlab.machine import encode_input, machine_to_dict
from qoptlab.qopt import solve_opt, window_for
from qoptlab.wellformedness import local_conditions_pass


def test_quantized_machines_stay_well_formed():
    m, _ = b.random_witness(np.random.default_rng(0), 2)
    for bits in (2, 4, 8):
        q, err = quantize_machine(m, bits)
        assert local_conditions_pass(q)
        assert err < 2.0 ** (1 - bits) * 4


def test_quantization_error_shrinks():
    m, t = b.random_witness(np.random.default_rng(1), 2)
    gaps = [quantize_and_simulate(m, bits, "1", t, np.array([1, 0, 0, 0])).distance for bits in (3, 8, 16)]
    assert gaps[0] >= gaps[1] >= gaps[2]
    assert gaps[2] < 1e-3


def test_distance_bound_on_perturbed_pair():
    m = b.coin_flip_machine()
    n, _ = perturb_machine(m, np.random.default_rng(2), 0.2)
    vec = encode_input(m, "0", windows=window_for(m, "0", 0, 2))
    rep = check_distance_bound(m, run(m, vec, 2).final_state, n, run(n, vec, 2).final_state)
    assert rep["passed"] and rep["slack"] >= 0


def test_eval_qap():
    out = eval_qap(b.coin_flip_machine(), "0", 2, 8)
    assert abs(out["value"] - 0.5) <= 1 / 8
    assert out["wellFormed"]


def test_ill_formed_code_scores_zero():
    assert eval_qap(b.bad_separability_machine(), "0", 1, 4)["value"] == 0.0
    assert eval_maxqtm("not a machine", "0", 1, 4)["value"] == 0.0


@pytest.mark.parametrize("m_acc", [2, 4, 8, 16])
def test_eval_maxqtm_accuracy(problems, m_acc):
    prob = problems["lookup"][0]
    out = eval_maxqtm(machine_to_dict(prob.machine), "11", prob.steps, m_acc, prob.index_size)
    assert abs(out["value"] - 0.9) <= 1 / m_acc


def test_calibration_table_is_monotone():
    assert calibrated_bits(16, 4) >= calibrated_bits(2, 4)
    assert calibrated_bits(10**6, 10**6) == 52


def test_pad_input():
    assert pad_input("1", 4) == "1011"
    assert pad_input("1011", 2) == "1011"


def test_approximate_reduction_check(problems):
    prob = problems["lookup"][0]
    from qoptlab.approx import maxqtm_reduction

    k = maxqtm_reduction(machine_to_dict(prob.machine), prob.steps, prob.index_size)

    def g(args):
        code, x, t, m, p = args
        return eval_maxqtm(code, x[: len("01")], t, m, p)["value"]

    rep = check_approx_reduction(lambda x: solve_opt(prob, x), g, k, ["01", "10"], [2, 8])
    assert rep["passed"]
