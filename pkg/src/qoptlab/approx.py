"""Approximate reductions and quantized simulation.

Amplitudes are rounded to a dyadic grid and the table is then projected
back onto the nearest table with orthonormal rows (polar factor, block by
block). The quantized machine stands in for a universal machine that only
approximates the amplitudes of the machine it simulates; the simulation
error is measured directly as the distance between final states.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import MachineFormatError, MissingReductionError, QuantizationError, QoptLabError
from .evolution import accept_mass, final_mass, run, step, vdistance
from .machine import MachineDescription, Transition, encode_input, machine_from_dict, parse_machine
from .qopt import MachineProblem, basis_vector, solve_opt, window_for
from .wellformedness import local_conditions_pass

MAX_BITS = 52


# ------------------------------------------------------- quantization


def _round(a, bits):
    scale = 2.0**bits
    return complex(round(a.real * scale) / scale, round(a.imag * scale) / scale)


def quantize_machine(m, bits):
    """``(machine, achieved_error)`` with amplitudes rounded to ``2^-bits``
    and rows re-orthonormalized within each block of rows sharing targets."""
    rnd = np.vectorize(lambda a: _round(a, bits), otypes=[complex])
    return reproject(m, lambda base: rnd(base) if base.size else base, f"{bits} bits")


def perturb_machine(m, rng, scale):
    """Well-formed neighbour of ``m``: Gaussian noise on the nonzero
    amplitudes, then the same polar projection as quantization."""

    def noisy(base):
        mask = base != 0
        return base + scale * mask * rng.standard_normal(base.shape)

    return reproject(m, noisy, f"noise {scale}")


def reproject(m, transform, label):
    rows = list(m.delta)
    cols = {}
    for _, trs in rows:
        for tr in trs:
            cols.setdefault((tr.target, tr.write, tr.move), len(cols))
    base = np.zeros((len(rows), len(cols)), dtype=complex)
    for i, (_, trs) in enumerate(rows):
        for tr in trs:
            base[i, cols[(tr.target, tr.write, tr.move)]] += tr.amp
    rounded = transform(base)
    # connected components of the row/column incidence graph
    parent = list(range(len(rows)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for j in range(len(cols)):
        members = np.flatnonzero(base[:, j])
        for r in members[1:]:
            parent[find(r)] = find(members[0])
    groups = {}
    for i in range(len(rows)):
        groups.setdefault(find(i), []).append(i)
    out = np.zeros_like(base)
    for members in groups.values():
        cset = np.flatnonzero(np.any(base[members] != 0, axis=0))
        block = rounded[np.ix_(members, cset)]
        u, s, vh = np.linalg.svd(block, full_matrices=False)
        if len(s) == 0 or s[-1] < 1e-12:
            raise QuantizationError(f"{label}: a block of rows collapses")
        out[np.ix_(members, cset)] = u @ vh
    names = {v: k for k, v in cols.items()}
    delta = []
    for i, (src, _) in enumerate(rows):
        trs = tuple(
            Transition(names[j][0], names[j][1], names[j][2], complex(out[i, j]))
            for j in np.flatnonzero(np.abs(out[i]) > 1e-15)
        )
        delta.append((src, trs))
    q = MachineDescription(
        states=m.states,
        initial=m.initial,
        finals=m.finals,
        tapes=m.tapes,
        delta=tuple(delta),
        normal_form=m.normal_form,
        stationary=m.stationary,
        oracle=m.oracle,
        io=m.io,
    )
    if not local_conditions_pass(q):
        raise QuantizationError(f"{label}: re-unitarized table is not well-formed")
    error = float(np.max(np.abs(out - base))) if base.size else 0.0
    return q, error


# ---------------------------------------------- acceptance gap bound


def check_distance_bound(m, final_m, n, final_n, tol=1e-12):
    """``|eta_M - eta_N| <= ||U_M phi - U_N psi||`` for two halted runs."""
    eta_m, eta_n = accept_mass(m, final_m), accept_mass(n, final_n)
    gap = abs(eta_m - eta_n)
    bound = vdistance(final_m, final_n)
    halted = final_mass(m, final_m) >= 1 - 1e-9 and final_mass(n, final_n) >= 1 - 1e-9
    return {
        "etaM": eta_m,
        "etaN": eta_n,
        "gap": gap,
        "bound": bound,
        "slack": bound - gap,
        "halted": halted,
        "passed": halted and gap <= bound + tol,
    }


@dataclass
class QuantizedRun:
    bits: int
    amplitude_error: float
    exact: object
    quantized: object
    distance: float
    bound_check: dict

    def to_dict(self):
        return {
            "bits": self.bits,
            "amplitudeError": self.amplitude_error,
            "exactAcceptance": self.exact.accept_probability,
            "quantizedAcceptance": self.quantized.accept_probability,
            "distance": self.distance,
            "distanceBound": self.bound_check,
        }


def quantize_and_simulate(m, bits, x, t, index=None, oracle=None):
    q, err = quantize_machine(m, bits)
    p = 0 if index is None else int(round(math.log2(len(index))))
    w = window_for(m, x, p, t)
    vec = encode_input(m, x, index, windows=w)
    exact = run(m, vec, t, oracle, strict_halting=False)
    quant = run(q, vec, t, oracle, strict_halting=False)
    dist = vdistance(exact.final_state, quant.final_state)
    bound_check = check_distance_bound(m, exact.final_state, q, quant.final_state)
    if exact.accept_probability - quant.accept_probability > dist + 1e-12:
        bound_check["passed"] = False
    return QuantizedRun(bits, err, exact, quant, dist, bound_check)


def index_distance(m, q, x, index_size, t):
    """Spectral norm of ``(U_q^t - U^t) E_x`` over the index space: the
    worst final-state distance over all unit indices."""
    w = window_for(m, x, index_size, t)
    cols_m, cols_q = [], []
    keys = {}
    for s in range(2**index_size):
        vec = encode_input(m, x, basis_vector(index_size, s), windows=w)
        a, b = vec, vec
        for _ in range(t):
            a = step(m, a)
            b = step(q, b)
        cols_m.append(a)
        cols_q.append(b)
        for k in list(a) + list(b):
            keys.setdefault(k, len(keys))
    diff = np.zeros((len(keys), len(cols_m)), dtype=complex)
    for j, (a, b) in enumerate(zip(cols_m, cols_q)):
        for k, v in a.items():
            diff[keys[k], j] += v
        for k, v in b.items():
            diff[keys[k], j] -= v
    return float(np.linalg.norm(diff, 2)) if diff.size else 0.0


# --------------------------------------------------------- calibration


def load_calibration():
    text = resources.files("qoptlab.fixtures").joinpath("data/calibration.json").read_text()
    return json.loads(text)


def calibrated_bits(m_acc, t, table=None):
    """Bits for accuracy ``1/m`` at ``t`` steps from the shipped table
    (smallest entry covering both)."""
    table = table or load_calibration()
    best = None
    for row in table["entries"]:
        if row["m"] >= m_acc and row["t"] >= t:
            if best is None or (row["m"], row["t"]) < (best["m"], best["t"]):
                best = row
    return MAX_BITS if best is None else best["bits"]


def minimal_bits(m, x, t, target, index_size=0, start=1):
    """Smallest ``b`` whose quantized machine stays within ``target`` of the
    exact final state."""
    for b in range(start, MAX_BITS + 1):
        try:
            q, _ = quantize_machine(m, b)
        except QuantizationError:
            continue
        if index_size:
            d = index_distance(m, q, x, index_size, t)
        else:
            w = window_for(m, x, 0, t)
            vec = encode_input(m, x, windows=w)
            d = vdistance(run(m, vec, t, strict_halting=False).final_state, run(q, vec, t, strict_halting=False).final_state)
        if d <= target:
            return b, d
    raise QuantizationError(f"no precision up to {MAX_BITS} bits reaches {target}")


def calibrate(cases, accuracies=(2, 4, 8, 16, 32, 64), buckets=(1, 2, 4, 8, 16, 32, 64)):
    """Table ``b(m, t)``: for every accuracy and step bucket the largest
    minimal precision over the cases whose ``t`` falls in the bucket, plus
    one bit of margin. ``cases`` is a list of ``(machine, x, t,
    index_size)``."""
    entries = []
    for acc in accuracies:
        per_case = [(t, minimal_bits(m, x, t, 1.0 / acc, p)[0]) for m, x, t, p in cases]
        for bucket in buckets:
            bs = [b for t, b in per_case if t <= bucket]
            if bs:
                entries.append({"m": acc, "t": bucket, "bits": min(MAX_BITS, max(bs) + 1)})
    return {"entries": entries}


def choose_bits(m, x, t, m_acc, index_size=0):
    """Calibrated precision, raised until the measured distance meets
    ``1/m`` (the table is empirical)."""
    b = calibrated_bits(m_acc, t)
    adaptive = False
    while True:
        try:
            q, err = quantize_machine(m, b)
        except QuantizationError:
            q = None
        if q is not None:
            if index_size:
                d = index_distance(m, q, x, index_size, t)
            else:
                w = window_for(m, x, 0, t)
                vec = encode_input(m, x, windows=w)
                d = vdistance(
                    run(m, vec, t, strict_halting=False).final_state,
                    run(q, vec, t, strict_halting=False).final_state,
                )
            if d <= 1.0 / m_acc:
                return b, q, err, d, adaptive
        if b >= MAX_BITS:
            raise QuantizationError(f"no precision reaches accuracy 1/{m_acc}")
        b += 1
        adaptive = True


# ----------------------------------------------------------- evaluators


def _decode(code):
    if isinstance(code, MachineDescription):
        return code
    if isinstance(code, dict):
        return machine_from_dict(code)
    return parse_machine(code)


def _well_formed_or_none(code):
    try:
        m = _decode(code)
    except (MachineFormatError, QoptLabError, ValueError, KeyError, TypeError):
        return None
    return m if local_conditions_pass(m) else None


def eval_qap(code, x, t, m_acc):
    """Acceptance of the quantized simulation of ``code`` on ``x`` for
    ``t`` steps at accuracy ``1/m``; ill-formed codes give 0."""
    m = _well_formed_or_none(code)
    if m is None:
        return {"value": 0.0, "wellFormed": False, "bound": 1.0 / m_acc}
    b, q, err, d, adaptive = choose_bits(m, x, t, m_acc)
    w = window_for(m, x, 0, t)
    res = run(q, encode_input(q, x, windows=w), t, strict_halting=False)
    return {
        "value": res.accept_probability,
        "wellFormed": True,
        "bits": b,
        "amplitudeError": err,
        "distance": d,
        "bound": 1.0 / m_acc,
        "adaptive": adaptive,
    }


def eval_maxqtm(code, x, t, m_acc, index_size=None):
    """Top acceptance over indices of size ``index_size`` (default
    ``|x|``) for the quantized simulation."""
    m = _well_formed_or_none(code)
    if m is None:
        return {"value": 0.0, "wellFormed": False, "bound": 1.0 / m_acc}
    p = len(x) if index_size is None else index_size
    b, q, err, d, adaptive = choose_bits(m, x, t, m_acc, p)
    value = solve_opt(MachineProblem(q, p, t), x)
    return {
        "value": value,
        "wellFormed": True,
        "indexSize": p,
        "bits": b,
        "amplitudeError": err,
        "distance": d,
        "bound": 1.0 / m_acc,
        "adaptive": adaptive,
    }


# ----------------------------------------------------------- reductions


@dataclass(frozen=True)
class ReductionMap:
    """Deterministic map from ``(x, m)`` to an input of the target."""

    name: str
    fn: object

    def __call__(self, x, m):
        return self.fn(x, m)


def check_approx_reduction(f, g, k, xs, ms):
    """``|f(x) - g(k(x, m))| <= 1/m`` for every ``x`` and ``m``."""
    rows = []
    for x in xs:
        fx = f(x)
        for m in ms:
            gv = g(k(x, m))
            gap = abs(fx - gv)
            rows.append({"x": x, "m": m, "f": fx, "g": gv, "gap": gap, "bound": 1.0 / m, "margin": 1.0 / m - gap, "passed": gap <= 1.0 / m})
    return {"reduction": k.name, "rows": rows, "passed": all(r["passed"] for r in rows)}


def compose_reductions(k1, k2, g_input):
    """``k2`` after ``k1`` where ``g_input`` extracts the string ``k2``
    should see from ``k1``'s output."""
    return ReductionMap(f"{k2.name}.{k1.name}", lambda x, m: k2(g_input(k1(x, 2 * m)), 2 * m))


def pad_input(x, p):
    """``x 0 1^(p - |x| - 1)`` so that the padded string has length ``p``."""
    if len(x) >= p:
        return x
    return x + "0" + "1" * (p - len(x) - 1)


def maxqtm_reduction(code, t, index_size):
    """Reduction of a witnessed problem to the maximum-acceptance problem:
    ``(x, m) -> <code, x 0 1^.., 1^t, 1^m>``."""
    return ReductionMap("maxqtm", lambda x, m: (code, pad_input(x, index_size), t, m, index_size))


def universality_transfer(fixtures, universal, target, xs_for, p_values=(2, 4, 8, 16)):
    """For each fixture ``(name, g, reduction)`` and tolerance ``1/p``:
    ``|g - r'| <= |g - f'| + |f' - r'| <= 1/p`` where ``f' = f(k(x, 2p))``
    and ``r' = target(k(x, 2p))``."""
    report = []
    for name, g, k in fixtures:
        if k is None:
            raise MissingReductionError(f"no reduction map for {name!r}")
        for x in xs_for(name):
            gx = g(x)
            for p in p_values:
                arg = k(x, 2 * p)
                fv = universal(arg)
                rv = target(arg)
                d1, d2, d = abs(gx - fv), abs(fv - rv), abs(gx - rv)
                report.append(
                    {
                        "fixture": name,
                        "x": x,
                        "p": p,
                        "gToUniversal": d1,
                        "universalToTarget": d2,
                        "composed": d,
                        "triangle": d <= d1 + d2 + 1e-15,
                        "passed": d1 <= 1 / (2 * p) and d2 <= 1 / (2 * p) and d <= 1.0 / p,
                    }
                )
    return {"rows": report, "passed": all(r["passed"] and r["triangle"] for r in report)}
