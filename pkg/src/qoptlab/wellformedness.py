"""Local well-formedness conditions (unit length, orthogonality,
separability) and their cross-check against global unitarity."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import SpaceTooLargeError
from .evolution import build_evolution
from .machine import (
    MIN_WINDOW,
    MOVE_NAMES,
    MOVES,
    ConfigurationSpace,
    MachineDescription,
    Tape,
    Transition,
    machine_from_dict,
    machine_to_dict,
)

LOCAL_TOL = 1e-9
GLOBAL_TOL = 1e-8

NATURAL = "natural"  # the h-value used when epsilon == 0

DIRECTIONS = (0, 1, -1)
EPSILONS = (0, 1, -1, 2, -2)


def e_set(d):
    return tuple(e for e in EPSILONS if abs(2 * d - e) <= 1)


def d_set(e):
    return tuple(d for d in DIRECTIONS if abs(2 * d - e) <= 1)


def h_value(d, e):
    return 2 * d - e if e != 0 else NATURAL


def separability_frame():
    """``{(d, e): (e in E_d, d in D_e, h)}`` for all 15 pairs."""
    return {
        (d, e): (e in e_set(d), d in d_set(e), h_value(d, e) if e in e_set(d) else None)
        for d in DIRECTIONS
        for e in EPSILONS
    }


@dataclass
class CheckReport:
    condition: str
    passed: bool
    worst: float
    tolerance: float
    violations: list = field(default_factory=list)

    def to_dict(self, limit=None):
        v = self.violations if limit is None else self.violations[:limit]
        return {
            "condition": self.condition,
            "passed": self.passed,
            "worst": self.worst,
            "tolerance": self.tolerance,
            "violationCount": len(self.violations),
            "violations": v,
        }


def _sources(m):
    return [(q, syms) for q in m.states for syms in m.symbol_tuples()]


def _row_vectors(m):
    """Dense matrix whose rows are ``delta(p, sigma)`` over ``(q, tau, d)``."""
    rows = m.rows()
    sources = _sources(m)
    col = {}
    entries = []
    for i, src in enumerate(sources):
        for tr in rows.get(src, ()):
            key = (tr.target, tr.write, tr.move)
            j = col.setdefault(key, len(col))
            entries.append((i, j, tr.amp))
    mat = np.zeros((len(sources), max(len(col), 1)), dtype=complex)
    for i, j, a in entries:
        mat[i, j] += a
    return sources, mat


def check_unit_length(m, tol=LOCAL_TOL):
    sources, mat = _row_vectors(m)
    norms = np.linalg.norm(mat, axis=1)
    dev = np.abs(norms - 1.0)
    violations = [
        {"source": [p, list(s)], "norm": float(norms[i])}
        for i, (p, s) in enumerate(sources)
        if dev[i] > tol
    ]
    worst = float(dev.max()) if dev.size else 0.0
    return CheckReport("unit_length", not violations, worst, tol, violations)


def check_orthogonality(m, tol=LOCAL_TOL):
    sources, mat = _row_vectors(m)
    gram = mat.conj() @ mat.T
    iu = np.triu_indices(len(sources), k=1)
    vals = np.abs(gram[iu])
    violations = [
        {
            "first": [sources[i][0], list(sources[i][1])],
            "second": [sources[j][0], list(sources[j][1])],
            "inner": float(abs(gram[i, j])),
        }
        for i, j, v in zip(iu[0], iu[1], vals)
        if v > tol
    ]
    worst = float(vals.max()) if vals.size else 0.0
    return CheckReport("orthogonality", not violations, worst, tol, violations)


def separability_vectors(m):
    """The weighted vectors ``delta[p, sigma, tau | eps]`` as a sparse dict
    ``{(p, sigma, tau, eps): {(q, h): amplitude}}``."""
    out = {}
    for (p, syms), row in m.rows().items():
        for tr in row:
            d = tuple(MOVES[x] for x in tr.move)
            weight = 1.0 / math.sqrt(math.prod(len(e_set(di)) for di in d))
            for eps in itertools.product(*(e_set(di) for di in d)):
                h = tuple(h_value(di, ei) for di, ei in zip(d, eps))
                vec = out.setdefault((p, syms, tr.write, eps), {})
                key = (tr.target, h)
                vec[key] = vec.get(key, 0j) + tr.amp * weight
    return out


def check_separability(m, tol=LOCAL_TOL):
    vectors = separability_vectors(m)
    keys = [k for k, v in vectors.items() if any(abs(a) > 0 for a in v.values())]
    col = {}
    r, c, vals = [], [], []
    for i, key in enumerate(keys):
        for comp, a in vectors[key].items():
            r.append(i)
            c.append(col.setdefault(comp, len(col)))
            vals.append(a)
    if not keys:
        return CheckReport("separability", True, 0.0, tol, [])
    mat = sp.csr_matrix((vals, (r, c)), shape=(len(keys), len(col)))
    gram = (mat.conj() @ mat.T).tocoo()
    violations = []
    worst = 0.0
    for i, j, v in zip(gram.row, gram.col, gram.data):
        if i >= j or keys[i][3] == keys[j][3]:
            continue
        a = abs(v)
        worst = max(worst, a)
        if a > tol:
            (p1, s1, t1, e1), (p2, s2, t2, e2) = keys[i], keys[j]
            violations.append(
                {
                    "first": [p1, list(s1), list(t1), list(e1)],
                    "second": [p2, list(s2), list(t2), list(e2)],
                    "inner": float(a),
                }
            )
    violations.sort(key=lambda v: (-v["inner"], str(v["first"]), str(v["second"])))
    return CheckReport("separability", not violations, float(worst), tol, violations)


def norm_identity_residual(m):
    """Largest ``|sum_eps ||delta[.|eps]||^2 - sum_d ||delta(.|tau, d)||^2|``
    over all ``(p, sigma, tau)``."""
    lhs = {}
    for (p, syms, tau, _), vec in separability_vectors(m).items():
        lhs[(p, syms, tau)] = lhs.get((p, syms, tau), 0.0) + sum(abs(a) ** 2 for a in vec.values())
    rhs = {}
    for (p, syms), row in m.rows().items():
        for tr in row:
            key = (p, syms, tr.write)
            rhs[key] = rhs.get(key, 0.0) + abs(tr.amp) ** 2
    keys = set(lhs) | set(rhs)
    return max((abs(lhs.get(k, 0.0) - rhs.get(k, 0.0)) for k in keys), default=0.0)


def check_local(m):
    return [check_unit_length(m), check_orthogonality(m), check_separability(m)]


def local_conditions_pass(m):
    return all(r.passed for r in check_local(m))


def check_global_unitarity(m, space=None, windows=MIN_WINDOW, oracle=None, tol=GLOBAL_TOL):
    """Assemble ``U`` on ring tapes and report ``max |U^dagger U - I|``."""
    if space is None:
        space = ConfigurationSpace(m, windows)
    u = build_evolution(m, space, oracle)
    gram = (u.conj().T @ u).tocsr()
    gram = gram - sp.identity(space.size, dtype=complex, format="csr")
    dev = float(np.abs(gram.data).max()) if gram.nnz else 0.0
    violations = []
    if dev > tol:
        coo = gram.tocoo()
        bad = np.argsort(-np.abs(coo.data))[:20]
        violations = [
            {"row": int(coo.row[b]), "col": int(coo.col[b]), "deviation": float(abs(coo.data[b]))}
            for b in bad
            if abs(coo.data[b]) > tol
        ]
    return CheckReport("global_unitarity", dev <= tol, dev, tol, violations)


def full_report(m, windows=MIN_WINDOW, oracle=None, include_global=True):
    reports = check_local(m)
    out = {r.condition: r.to_dict(limit=50) for r in reports}
    out["normIdentityResidual"] = norm_identity_residual(m)
    local_ok = all(r.passed for r in reports)
    out["localPass"] = local_ok
    if include_global:
        try:
            g = check_global_unitarity(m, windows=windows, oracle=oracle)
            out["global_unitarity"] = g.to_dict(limit=20)
            out["globalPass"] = g.passed
        except SpaceTooLargeError as exc:
            out["global_unitarity"] = {"skipped": str(exc)}
    out["passed"] = local_ok
    return out


# ------------------------------------------------------ random tables


def _random_unitary(rng, n, real):
    a = rng.standard_normal((n, n))
    if not real:
        a = a + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return q


def random_valid_table(rng, n_states=2, gamma=("0", "1"), k=1, real=True):
    """A random well-formed table: each state gets one entry direction per
    tape, and the ``(p, sigma) -> (q, tau)`` map is a random unitary
    (Gram-Schmidt of Gaussian rows)."""
    states = tuple(f"s{i}" for i in range(n_states))
    tape = Tape(tuple(s for s in gamma if s != gamma[0]), tuple(gamma), gamma[0])
    tapes = (tape,) * k
    entry = {q: tuple(MOVE_NAMES[int(d)] for d in rng.integers(-1, 2, size=k)) for q in states}
    pairs = [(q, syms) for q in states for syms in itertools.product(*(t.gamma for t in tapes))]
    w = _random_unitary(rng, len(pairs), real)
    delta = []
    for j, src in enumerate(pairs):
        row = tuple(
            Transition(q, syms, entry[q], complex(w[i, j]))
            for i, (q, syms) in enumerate(pairs)
        )
        delta.append((src, row))
    return MachineDescription(
        states=states,
        initial=states[0],
        finals=(),
        tapes=tapes,
        delta=tuple(delta),
        normal_form=False,
    )


def perturb_table(rng, m, kind):
    """Damage a table. ``kind`` is one of ``scale``, ``mix``, ``direction``,
    ``phase``."""
    delta = [(src, list(row)) for src, row in m.delta]
    i = int(rng.integers(len(delta)))
    src, row = delta[i]
    if kind == "scale":
        delta[i] = (src, [Transition(t.target, t.write, t.move, t.amp * 1.25) for t in row])
    elif kind == "mix":
        j = (i + 1 + int(rng.integers(len(delta) - 1))) % len(delta)
        other = {(t.target, t.write, t.move): t.amp for t in delta[j][1]}
        merged = {(t.target, t.write, t.move): t.amp for t in row}
        for key, a in other.items():
            merged[key] = merged.get(key, 0j) + 0.3 * a
        delta[i] = (src, [Transition(q, w, d, a) for (q, w, d), a in merged.items()])
    elif kind == "direction":
        e = int(rng.integers(len(row)))
        t = row[e]
        axis = int(rng.integers(m.k))
        moves = list(t.move)
        choices = [d for d in MOVES if d != moves[axis]]
        moves[axis] = choices[int(rng.integers(len(choices)))]
        row[e] = Transition(t.target, t.write, tuple(moves), t.amp)
    elif kind == "phase":
        e = int(rng.integers(len(row)))
        t = row[e]
        row[e] = Transition(t.target, t.write, t.move, -t.amp)
    else:
        raise ValueError(kind)
    doc = machine_to_dict(
        MachineDescription(
            states=m.states,
            initial=m.initial,
            finals=m.finals,
            tapes=m.tapes,
            delta=tuple((s, tuple(r)) for s, r in delta),
            normal_form=m.normal_form,
            stationary=m.stationary,
            oracle=m.oracle,
            io=m.io,
        )
    )
    return machine_from_dict(doc)


def search_separability_witness():
    """Brute-force a 2-state, 2-symbol table with entries in {+-1/sqrt2}
    that passes unit length and orthogonality but fails separability.

    Rows come in two Hadamard-like blocks; the search runs over sign
    patterns and per-target directions in a fixed order.
    """
    s = 1.0 / math.sqrt(2.0)
    tape = Tape(("1",), ("0", "1"), "0")
    blocks = [
        ((("a", ("0",)), ("a", ("1",))), (("a", ("0",)), ("b", ("1",)))),
        ((("b", ("0",)), ("b", ("1",))), (("a", ("1",)), ("b", ("0",)))),
    ]
    targets = [t for _, tg in blocks for t in tg]
    for signs in itertools.product((1, -1), repeat=2):
        for dirs in itertools.product(("L", "R"), repeat=len(targets)):
            move = dict(zip(targets, dirs))
            delta = []
            for ((src0, src1), (t0, t1)), sign in zip(blocks, signs):
                delta.append(
                    (src0, (
                        Transition(t0[0], t0[1], (move[t0],), s),
                        Transition(t1[0], t1[1], (move[t1],), s),
                    ))
                )
                delta.append(
                    (src1, (
                        Transition(t0[0], t0[1], (move[t0],), sign * s),
                        Transition(t1[0], t1[1], (move[t1],), -sign * s),
                    ))
                )
            m = machine_from_dict(
                machine_to_dict(
                    MachineDescription(
                        states=("a", "b"),
                        initial="a",
                        finals=(),
                        tapes=(tape,),
                        delta=tuple(delta),
                        normal_form=False,
                    )
                )
            )
            if (
                check_unit_length(m).passed
                and check_orthogonality(m).passed
                and not check_separability(m).passed
            ):
                return m
    return None
