"""Programmatic construction of small well-formed machines.

Machines here are unidirectional: every state is entered with one fixed
head displacement per tape. Authors give only the rows that matter; the
remaining (unreachable) rows are completed to a unitary on ``Q x Gamma``
by :func:`complete_table`, which keeps the table well-formed.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import scipy.linalg

from ..machine import (
    FOUR_FIFTHS,
    INV_SQRT2,
    THREE_FIFTHS,
    IOLayout,
    MachineDescription,
    OracleSpec,
    Tape,
    Transition,
    machine_from_dict,
    machine_to_dict,
    pair,
)

INPUT_TAPE = Tape(("0", "1"), ("_", "0", "1"), "_")
BIT_TAPE = Tape(("1",), ("0", "1"), "0")
HADAMARD = np.array([[INV_SQRT2, INV_SQRT2], [INV_SQRT2, -INV_SQRT2]])


def complete_table(states, tapes, entry, partial, initial, final, io=IOLayout(), oracle=None):
    """Fill the missing rows of a unidirectional table.

    ``entry[q]`` is the displacement tuple with which state ``q`` is
    entered; ``partial[(p, syms)]`` lists ``(q, writes, amp)``. Rows of the
    final state are left to normal form; the initial state is reachable
    only from the final state.
    """
    sym_tuples = list(itertools.product(*(t.gamma for t in tapes)))
    skip = {final} | ({oracle.pre} if oracle else set())
    sources = [(p, s) for p in states if p not in skip for s in sym_tuples]
    excluded = {initial} | ({oracle.post} if oracle else set())
    targets = [(q, s) for q in states if q not in excluded for s in sym_tuples]
    if len(sources) != len(targets):
        raise ValueError(f"{len(sources)} sources but {len(targets)} targets")
    tindex = {t: i for i, t in enumerate(targets)}
    given = np.zeros((len(sources), len(targets)))
    known = []
    for i, src in enumerate(sources):
        if src in partial:
            known.append(i)
            for q, writes, amp in partial[src]:
                given[i, tindex[(q, tuple(writes))]] += amp
    for key in partial:
        if key not in set(sources):
            raise ValueError(f"row for {key} is not a free source")
    block = given[known]
    if not np.allclose(block @ block.T, np.eye(len(known)), atol=1e-12):
        raise ValueError("authored rows are not orthonormal")
    missing = [i for i in range(len(sources)) if i not in set(known)]
    unused = [j for j in range(len(targets)) if not np.any(given[:, j])]
    if len(unused) == len(missing):
        for i, j in zip(missing, unused):
            given[i, j] = 1.0
    else:
        basis = scipy.linalg.null_space(block).T
        for i, vec in zip(missing, basis):
            given[i] = vec
    delta = []
    for i, src in enumerate(sources):
        row = tuple(
            Transition(targets[j][0], targets[j][1], entry[targets[j][0]], float(given[i, j]))
            for j in np.flatnonzero(np.abs(given[i]) > 1e-15)
        )
        delta.append((src, row))
    m = MachineDescription(
        states=tuple(states),
        initial=initial,
        finals=(final,),
        tapes=tuple(tapes),
        delta=tuple(delta),
        io=io,
        oracle=oracle,
    )
    return machine_from_dict(machine_to_dict(m))


def one_step_machine(rows, io, tapes=(INPUT_TAPE,)):
    """``q0 -> qf`` in one stationary step; ``rows[sym]`` lists
    ``(writes, amp)`` for the start cell(s)."""
    k = len(tapes)
    entry = {"q0": ("N",) * k, "qf": ("N",) * k}
    partial = {("q0", tuple(s)): [("qf", tuple(w), a) for w, a in r] for s, r in rows.items()}
    return complete_table(["q0", "qf"], tapes, entry, partial, "q0", "qf", io)


def identity_machine():
    rows = {(s,): [((s,), 1.0)] for s in INPUT_TAPE.gamma}
    return one_step_machine(rows, IOLayout(0, 0, None))


def always_accept_machine():
    rows = {("_",): [(("1",), 1.0)], ("1",): [(("_",), 1.0)], ("0",): [(("0",), 1.0)]}
    return one_step_machine(rows, IOLayout(0, 1, None))


def rotation_rows(v):
    """Rows rotating a blank start cell so that ``1`` appears with
    probability ``v``."""
    c, s = math.sqrt(1.0 - v), math.sqrt(v)
    rows = {("_",): [(("_",), c), (("1",), s)], ("1",): [(("_",), s), (("1",), -c)]}
    rows[("0",)] = [(("0",), 1.0)]
    return {k: [(w, a) for w, a in r if a != 0.0] for k, r in rows.items()}


def index_ignoring_witness(v, p=1):
    return one_step_machine(rotation_rows(v), IOLayout(0, p + 2, 1))


def projector_witness():
    rows = {(s,): [((s,), 1.0)] for s in INPUT_TAPE.gamma}
    return one_step_machine(rows, IOLayout(0, 2, 0))


def hadamard_sandwich_witness():
    s = INV_SQRT2
    rows = {
        ("0",): [(("0",), s), (("1",), s)],
        ("1",): [(("0",), -s), (("1",), s)],
        ("_",): [(("_",), 1.0)],
    }
    return one_step_machine(rows, IOLayout(0, 2, 0))


def coin_flip_machine():
    """Hadamard on the blank start cell while stepping right, then back."""
    s = INV_SQRT2
    entry = {"q0": ("N",), "q1": ("R",), "qf": ("L",)}
    partial = {
        ("q0", ("_",)): [("q1", ("_",), s), ("q1", ("1",), s)],
        ("q0", ("1",)): [("q1", ("_",), s), ("q1", ("1",), -s)],
    }
    for sym in INPUT_TAPE.gamma:
        partial[("q1", (sym,))] = [("qf", (sym,), 1.0)]
    return complete_table(["q0", "q1", "qf"], [INPUT_TAPE], entry, partial, "q0", "qf", IOLayout(0, 1, None))


def two_tape_accept_machine():
    """Flips the blank-0 output tape to 1; tape 0 is untouched."""
    rows = {}
    for a in INPUT_TAPE.gamma:
        rows[(a, "0")] = [((a, "1"), 1.0)]
        rows[(a, "1")] = [((a, "0"), 1.0)]
    return one_step_machine(rows, IOLayout(1, 0, None), tapes=(INPUT_TAPE, BIT_TAPE))


def oracle_machine():
    """Copies ``x`` (one bit at tape-0 cell 1) to the query tape, queries,
    and writes the answer bit into the blank output cell 0 of tape 0."""
    tapes = [INPUT_TAPE, BIT_TAPE]
    states = ["q0", "c", "pre", "post", "r", "qf"]
    entry = {
        "q0": ("N", "N"),
        "c": ("R", "N"),
        "pre": ("L", "R"),
        "post": ("N", "N"),
        "r": ("N", "L"),
        "qf": ("N", "N"),
    }
    partial = {("q0", ("_", "0")): [("c", ("_", "0"), 1.0)]}
    for a in "01":
        partial[("c", (a, "0"))] = [("pre", (a, a), 1.0)]
    partial[("post", ("_", "0"))] = [("r", ("_", "0"), 1.0)]
    partial[("post", ("_", "1"))] = [("r", ("1", "1"), 1.0)]
    for a in INPUT_TAPE.gamma:
        for b in BIT_TAPE.gamma:
            partial[("r", (a, b))] = [("qf", (a, b), 1.0)]
    oracle = OracleSpec("pre", "post", 1, 2)
    return complete_table(states, tapes, entry, partial, "q0", "qf", IOLayout(0, 1, None), oracle)


def gather_machine(n, reads, value, prefix=None, io=None):
    """Sweep cells ``1..n``, record the (optionally gated) bits of the
    cells in ``reads`` in the finite control, come back and rotate the
    blank start cell so it reads ``1`` with probability ``value(w)``, then
    sweep again to erase the record. Halts after ``4n`` steps plus the
    prefix length.

    ``reads`` maps cell -> 2x2 real gate, ``None`` for a plain read, or a
    function of the bits recorded so far returning a gate.
    ``prefix`` is ``(states, entry, partial, steps)`` run from ``q0`` and
    ending in state ``g0`` at cell 0 entered moving left.
    """
    cells = sorted(reads)
    states, entry, partial = ["q0"], {"q0": ("N",)}, {}
    start = "q0"
    extra = 0
    if prefix is not None:
        p_states, p_entry, p_partial, extra = prefix
        states += [s for s in p_states if s != "q0"]
        entry.update(p_entry)
        partial.update(p_partial)
        start = "g0"
        states.append("g0")
        entry["g0"] = ("L",)

    def bits_before(i):
        return sum(1 for c in cells if c < i)

    def words(r):
        return ["".join(b) for b in itertools.product("01", repeat=r)]

    def add(name, direction):
        if name not in entry:
            states.append(name)
            entry[name] = (direction,)
        return name

    def a_state(i, w):
        return add(f"A{i}_{w}", "R")

    def b_state(j, w):
        return add(f"B{j}_{w}", "L")

    def c_state(i, w):
        return add(f"C{i}_{w}", "R")

    def d_state(j):
        return add(f"D{j}", "L")

    def after_a(i, w):
        return a_state(i + 1, w) if i < n else b_state(n - 1, w)

    def after_c(i, w):
        if i < n:
            return c_state(i + 1, w)
        return d_state(n - 1) if n > 1 else "qf"

    partial[(start, ("_",))] = [(a_state(1, ""), ("_",), 1.0)]
    full = len(cells)
    for i in range(1, n + 1):
        for w in words(bits_before(i)):
            src = a_state(i, w)
            if i in reads:
                gate = reads[i](w) if callable(reads[i]) else reads[i]
                gate = np.eye(2) if gate is None else np.asarray(gate)
                for sigma in (0, 1):
                    partial[(src, (str(sigma),))] = [
                        (after_a(i, w + str(tau)), (str(tau),), float(gate[tau, sigma]))
                        for tau in (0, 1)
                        if gate[tau, sigma] != 0.0
                    ]
            else:
                for sym in INPUT_TAPE.gamma:
                    partial[(src, (sym,))] = [(after_a(i, w), (sym,), 1.0)]
    for w in words(full):
        for j in range(n - 1, 0, -1):
            for sym in INPUT_TAPE.gamma:
                partial[(b_state(j, w), (sym,))] = [(b_state(j - 1, w), (sym,), 1.0)]
        src = b_state(0, w)
        for (sym,), row in rotation_rows(value(w)).items():
            partial[(src, (sym,))] = [(c_state(1, w), wr, a) for wr, a in row]
    for i in range(1, n + 1):
        k = full - bits_before(i)
        for w in words(k):
            src = c_state(i, w)
            if i in reads:
                partial[(src, (w[0],))] = [(after_c(i, w[1:]), (w[0],), 1.0)]
            else:
                for sym in INPUT_TAPE.gamma:
                    partial[(src, (sym,))] = [(after_c(i, w), (sym,), 1.0)]
    for j in range(n - 1, 0, -1):
        nxt = d_state(j - 1) if j > 1 else "qf"
        for sym in INPUT_TAPE.gamma:
            partial[(d_state(j), (sym,))] = [(nxt, (sym,), 1.0)]
    states.append("qf")
    entry["qf"] = ("L",)
    m = complete_table(states, [INPUT_TAPE], entry, partial, "q0", "qf", io)
    return m, 4 * n + extra


def family_witness(values, x_len=1, p=1):
    """Witness for ``f(<x, y>) = values[y]`` on inputs ``pair(x, y)``.

    Index qubits sit at cells ``1..p`` and are read through a Hadamard;
    the acceptance matrix is ``H diag(v, v/2, ...) H`` so its top
    eigenvalue is ``values[y]``.
    """
    ylen = len(next(iter(values)))
    x_offset = p + 2
    y_start = x_offset + len(pair("0" * x_len, "0" * ylen)) - ylen
    reads = {1 + j: HADAMARD for j in range(p)}
    for j in range(ylen):
        reads[y_start + j] = None

    def value(w):
        idx, y = w[:p], w[p:]
        scale = 1.0 if set(idx) <= {"0"} else 0.5
        return values[y] * scale

    return gather_machine(y_start + ylen - 1, reads, value, io=IOLayout(0, x_offset, 1))


def lookup_witness(values, p=1):
    """Witness for ``f(x) = values[x]`` (all keys the same length)."""
    xlen = len(next(iter(values)))
    x_offset = p + 2
    reads = {1 + j: HADAMARD for j in range(p)}
    for j in range(xlen):
        reads[x_offset + j] = None

    def value(w):
        idx, x = w[:p], w[p:]
        scale = 1.0 if set(idx) <= {"0"} else 0.5
        return values[x] * scale

    return gather_machine(x_offset + xlen - 1, reads, value, io=IOLayout(0, x_offset, 1))


def bell_witness(weights):
    """Two index qubits at cells 1, 2. A prefix applies CNOT(1->2) then H
    on cell 1; the gather pass accepts with probability ``weights[w]`` on
    the resulting bits ``w``. ``weights['00']`` weights the Bell state
    ``(|00> + |11>)/sqrt2``."""
    s = INV_SQRT2
    p_states = ["e1", "e2_0", "e2_1", "e3_0", "e3_1"]
    p_entry = {"e1": ("R",), "e2_0": ("R",), "e2_1": ("R",), "e3_0": ("L",), "e3_1": ("L",)}
    partial = {("q0", ("_",)): [("e1", ("_",), 1.0)]}
    for a in "01":
        partial[("e1", (a,))] = [(f"e2_{a}", (a,), 1.0)]
        for b in "01":
            partial[(f"e2_{a}", (b,))] = [(f"e3_{a}", (str(int(a) ^ int(b)),), 1.0)]
    partial[("e3_0", ("0",))] = [("g0", ("0",), s), ("g0", ("1",), s)]
    partial[("e3_1", ("1",))] = [("g0", ("0",), s), ("g0", ("1",), -s)]
    reads = {1: None, 2: None}
    return gather_machine(
        2, reads, lambda w: weights.get(w, 0.0), prefix=(p_states, p_entry, partial, 4),
        io=IOLayout(0, 4, 1),
    )


def source_machine(amplitudes):
    """One-qubit clean source writing ``a|0> + b|1>`` into the blank start
    cell (real ``a, b`` with ``a^2 + b^2 = 1``)."""
    a, b = amplitudes
    rows = {
        ("_",): [(("0",), a), (("1",), b)],
        ("0",): [(("0",), b), (("1",), -a)],
        ("1",): [(("_",), 1.0)],
    }
    rows = {k: [(w, x) for w, x in r if x != 0.0] for k, r in rows.items()}
    return one_step_machine(rows, IOLayout(0, 2, None))


SOURCE_AMPLITUDES = {
    "plus": (INV_SQRT2, INV_SQRT2),
    "one": (0.0, 1.0),
    "three-four": (THREE_FIFTHS, FOUR_FIFTHS),
}


def bad_separability_machine():
    """Table passing unit length and orthogonality but not separability."""
    from ..wellformedness import search_separability_witness

    return search_separability_witness()


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_witness(rng, p=2, x_len=1):
    """Witness with random controlled rotations on ``p`` index cells and
    random acceptance weights; reads ``x`` too, so ``f`` depends on it.
    Returns ``(machine, steps)``."""
    x_offset = p + 2
    angles = {}
    reads = {}
    for j in range(p):
        cell = 1 + j
        table = {w: _rotation(float(rng.uniform(0, 2 * math.pi))) for w in
                 ("".join(bits) for bits in itertools.product("01", repeat=j))}
        angles[cell] = table
        reads[cell] = table.__getitem__
    for j in range(x_len):
        reads[x_offset + j] = None
    weights = {"".join(w): float(rng.uniform(0, 1)) for w in itertools.product("01", repeat=p + x_len)}
    m, steps = gather_machine(x_offset + x_len - 1, reads, weights.__getitem__, io=IOLayout(0, x_offset, 1))
    return m, steps
