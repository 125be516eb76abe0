"""Time evolution of QTMs on ring tapes.

State vectors are sparse dicts ``{Config: amplitude}``. :func:`step` and
:func:`step_back` apply the evolution operator ``U`` and its adjoint
lazily; :func:`build_evolution` assembles ``U`` as a sparse matrix over a
:class:`~qoptlab.machine.ConfigurationSpace`.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import HaltingError, NotInPreQueryStateError, TravelBudgetExceededError
from .machine import MOVES, Config

PRUNE = 1e-14
HALT_TOL = 1e-9


@dataclass(frozen=True)
class CompiledMachine:
    forward: dict  # (p, sigma) -> ((q, tau, d, amp), ...)
    backward: dict  # q -> ((p, sigma, tau, d, amp), ...)
    finals: frozenset
    pre: int
    post: int
    oracle_tape: int
    query_length: int
    output_tape: int
    one: int  # index of symbol "1" on the output tape, -1 if absent


@functools.lru_cache(maxsize=256)
def compile_machine(m):
    sidx = {q: i for i, q in enumerate(m.states)}
    gidx = [{s: j for j, s in enumerate(t.gamma)} for t in m.tapes]
    forward, backward = {}, {}
    for (p, syms), row in m.rows().items():
        sigma = tuple(gidx[i][s] for i, s in enumerate(syms))
        entries = []
        for tr in row:
            tau = tuple(gidx[i][s] for i, s in enumerate(tr.write))
            d = tuple(MOVES[x] for x in tr.move)
            entries.append((sidx[tr.target], tau, d, tr.amp))
            backward.setdefault(sidx[tr.target], []).append((sidx[p], sigma, tau, d, tr.amp))
        forward[(sidx[p], sigma)] = tuple(entries)
    out_gamma = m.tapes[m.io.output_tape].gamma
    o = m.oracle
    return CompiledMachine(
        forward=forward,
        backward={q: tuple(v) for q, v in backward.items()},
        finals=frozenset(sidx[q] for q in m.finals),
        pre=-1 if o is None else sidx[o.pre],
        post=-1 if o is None else sidx[o.post],
        oracle_tape=-1 if o is None else o.tape,
        query_length=0 if o is None else o.query_length,
        output_tape=m.io.output_tape,
        one=out_gamma.index("1") if "1" in out_gamma else -1,
    )


# ------------------------------------------------------ vector helpers


def vnorm(vec):
    return float(np.sqrt(sum(abs(a) ** 2 for a in vec.values())))


def vinner(u, v):
    """``<u|v>`` (conjugate-linear in ``u``)."""
    if len(u) > len(v):
        return sum(np.conj(u[c]) * a for c, a in v.items() if c in u)
    return sum(np.conj(a) * v[c] for c, a in u.items() if c in v)


def vadd(*terms):
    """Linear combination of ``(coefficient, vector)`` pairs."""
    out = {}
    for coef, vec in terms:
        for c, a in vec.items():
            out[c] = out.get(c, 0j) + coef * a
    return {c: a for c, a in out.items() if abs(a) > PRUNE}


def vdistance(u, v):
    return vnorm(vadd((1.0, u), (-1.0, v)))


def _prune(acc):
    return {c: a for c, a in acc.items() if abs(a) > PRUNE}


# ------------------------------------------------------------- oracle


def _query_string(cm, m, cells):
    tape = m.tapes[cm.oracle_tape]
    q = cells[cm.oracle_tape]
    x = "".join(tape.gamma[s] for s in q[: cm.query_length - 1])
    return x, tape.gamma[q[cm.query_length - 1]]


def _flip_answer(cm, m, cells, oracle):
    """Rewrite ``|x>|b>`` to ``|x>|b xor A(x)>`` on the query tape.

    Cells whose answer symbol is not a bit are left unchanged.
    """
    if not oracle:
        return cells
    x, b = _query_string(cm, m, cells)
    if b not in ("0", "1") or x not in oracle:
        return cells
    tape = m.tapes[cm.oracle_tape]
    flipped = tape.gamma.index("1" if b == "0" else "0")
    q = list(cells[cm.oracle_tape])
    q[cm.query_length - 1] = flipped
    new = list(cells)
    new[cm.oracle_tape] = tuple(q)
    return tuple(new)


# --------------------------------------------------------------- step


def step(m, vec, oracle=None):
    """Apply one step of ``U`` to a sparse state."""
    cm = compile_machine(m)
    acc = {}
    for c, a in vec.items():
        sigma = tuple(tape[h] for tape, h in zip(c.cells, c.heads))
        if c.state == cm.pre:
            cells = _flip_answer(cm, m, c.cells, oracle)
            nc = Config(cm.post, c.heads, cells)
            acc[nc] = acc.get(nc, 0j) + a
            continue
        for q, tau, d, amp in cm.forward.get((c.state, sigma), ()):
            cells = []
            heads = []
            for tape, h, t, dd in zip(c.cells, c.heads, tau, d):
                if tape[h] != t:
                    tape = tape[:h] + (t,) + tape[h + 1 :]
                cells.append(tape)
                heads.append((h + dd) % len(tape))
            nc = Config(q, tuple(heads), tuple(cells))
            acc[nc] = acc.get(nc, 0j) + amp * a
    return _prune(acc)


def step_back(m, vec, oracle=None):
    """Apply one step of ``U^dagger`` to a sparse state."""
    cm = compile_machine(m)
    acc = {}
    for c, a in vec.items():
        if c.state == cm.post and cm.pre >= 0:
            cells = _flip_answer(cm, m, c.cells, oracle)
            pc = Config(cm.pre, c.heads, cells)
            acc[pc] = acc.get(pc, 0j) + a
        for p, sigma, tau, d, amp in cm.backward.get(c.state, ()):
            if p == cm.pre:
                continue
            heads = []
            ok = True
            for tape, h, t, dd in zip(c.cells, c.heads, tau, d):
                ph = (h - dd) % len(tape)
                if tape[ph] != t:
                    ok = False
                    break
                heads.append(ph)
            if not ok:
                continue
            cells = tuple(
                tape[:ph] + (s,) + tape[ph + 1 :]
                for tape, ph, s in zip(c.cells, heads, sigma)
            )
            pc = Config(p, tuple(heads), cells)
            acc[pc] = acc.get(pc, 0j) + np.conj(amp) * a
    return _prune(acc)


# ----------------------------------------------------------- assembly


def build_evolution(m, space, oracle=None):
    """Assemble ``U`` over ``space`` as a CSC matrix (column ``c`` is the
    image of configuration ``c``)."""
    cm = compile_machine(m)
    states, heads, digits = space.decode_all()
    n = space.size
    k = m.k
    offsets = space.tape_offsets
    weights = np.asarray(space.cell_weights, dtype=np.int64)
    rows_out, cols_out, vals_out = [], [], []

    # symbol under each head and the flat cell position of each head
    head_cells = np.stack([offsets[i] + heads[:, i] for i in range(k)], axis=1)
    sigma = np.take_along_axis(digits, head_cells, axis=1)
    gamma_sizes = [len(t.gamma) for t in m.tapes]
    sigma_code = np.zeros(n, dtype=np.int64)
    for i in range(k):
        sigma_code = sigma_code * gamma_sizes[i] + sigma[:, i]
    n_sigma = int(np.prod(gamma_sizes))
    row_id = states * n_sigma + sigma_code
    content = digits @ weights
    head_code = np.zeros(n, dtype=np.int64)
    for i in range(k):
        head_code = head_code * space.windows[i] + heads[:, i]

    order = np.argsort(row_id, kind="stable")
    bounds = np.searchsorted(row_id[order], np.arange(len(m.states) * n_sigma + 1))
    for rid in range(len(m.states) * n_sigma):
        cols = order[bounds[rid] : bounds[rid + 1]]
        if cols.size == 0:
            continue
        p, code = divmod(rid, n_sigma)
        sig = []
        for size in reversed(gamma_sizes):
            code, s = divmod(code, size)
            sig.append(s)
        sig = tuple(reversed(sig))
        if p == cm.pre:
            for col in cols:
                c = space.config(int(col))
                target = Config(cm.post, c.heads, _flip_answer(cm, m, c.cells, oracle))
                rows_out.append(np.array([space.index(target)]))
                cols_out.append(np.array([col]))
                vals_out.append(np.array([1.0 + 0j]))
            continue
        for q, tau, d, amp in cm.forward.get((p, sig), ()):
            new_content = content[cols].copy()
            new_head = np.zeros(cols.size, dtype=np.int64)
            for i in range(k):
                hc = head_cells[cols, i]
                new_content += (tau[i] - sig[i]) * weights[hc]
                new_head = new_head * space.windows[i] + (heads[cols, i] + d[i]) % space.windows[i]
            target = (q * space.n_heads + new_head) * space.n_contents + new_content
            rows_out.append(target)
            cols_out.append(cols)
            vals_out.append(np.full(cols.size, amp, dtype=complex))
    if rows_out:
        r = np.concatenate(rows_out)
        c = np.concatenate(cols_out)
        v = np.concatenate(vals_out)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0, dtype=complex)
    return sp.csc_matrix((v, (r, c)), shape=(n, n))


# ---------------------------------------------------------------- runs


@dataclass
class RunResult:
    final_state: dict
    steps: int
    halted: bool
    accept_probability: float
    final_mass: float

    def to_dict(self, top=None):
        items = sorted(self.final_state.items(), key=lambda kv: kv[0])
        if top is not None:
            items = items[:top]
        return {
            "steps": self.steps,
            "halted": self.halted,
            "acceptProbability": self.accept_probability,
            "finalMass": self.final_mass,
            "support": len(self.final_state),
            "finalState": [
                {
                    "state": c.state,
                    "heads": list(c.heads),
                    "cells": [list(t) for t in c.cells],
                    "amp": {"re": float(a.real), "im": float(a.imag)},
                }
                for c, a in items
            ],
        }


def _extent(tape, blank):
    used = [j for j, s in enumerate(tape) if s != blank]
    return (max(used) + 1) if used else 0


def check_travel_budget(m, vec, t):
    """Raise unless ``t`` steps cannot make any head alias across the ring."""
    if not vec:
        return
    c0 = next(iter(vec))
    for i, tape in enumerate(m.tapes):
        window = len(c0.cells[i])
        blank = tape.gamma.index(tape.blank)
        extent = max(_extent(c.cells[i], blank) for c in vec)
        if t > window - 2 or t + extent + 1 > window:
            raise TravelBudgetExceededError(
                f"{t} steps on tape {i} (window {window}, input extent {extent})"
            )


def accept_mass(m, vec):
    cm = compile_machine(m)
    total = 0.0
    for c, a in vec.items():
        if c.state in cm.finals and cm.one >= 0 and c.cells[cm.output_tape][0] == cm.one:
            total += abs(a) ** 2
    return total


def final_mass(m, vec):
    cm = compile_machine(m)
    return sum(abs(a) ** 2 for c, a in vec.items() if c.state in cm.finals)


def accepting_part(m, vec):
    """Projection onto accepting final configurations."""
    cm = compile_machine(m)
    return {
        c: a
        for c, a in vec.items()
        if c.state in cm.finals and cm.one >= 0 and c.cells[cm.output_tape][0] == cm.one
    }


def run(m, vec, t, oracle=None, strict_halting=True):
    """Run ``t`` steps from ``vec`` and measure the output cell."""
    check_travel_budget(m, vec, t)
    state = dict(vec)
    for _ in range(t):
        state = step(m, state, oracle)
    fm = final_mass(m, state)
    total = vnorm(state) ** 2
    halted = fm >= total - HALT_TOL and total > 0
    if strict_halting and HALT_TOL < fm < total - HALT_TOL:
        raise HaltingError(
            f"after {t} steps final configurations carry mass {fm:.3g} of {total:.3g}"
        )
    return RunResult(state, t, halted, accept_mass(m, state), fm)


def run_reverse(m, vec, t, oracle=None):
    """``(U^dagger)^t vec``."""
    check_travel_budget(m, vec, t)
    state = dict(vec)
    for _ in range(t):
        state = step_back(m, state, oracle)
    return state


def apply_oracle_query(m, vec, oracle):
    """One query step: every configuration must be in the pre-query state."""
    cm = compile_machine(m)
    if cm.pre < 0:
        raise NotInPreQueryStateError("machine has no oracle")
    for c in vec:
        if c.state != cm.pre:
            raise NotInPreQueryStateError(f"configuration in state {m.states[c.state]!r}")
    return step(m, vec, oracle)
