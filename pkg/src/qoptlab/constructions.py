"""Closure constructions on optimization problems.

All constructions act on accepting-branch maps (see :mod:`qoptlab.qopt`):

* observe-then-dispatch is a direct sum of the per-``y`` maps, so branches
  for different ``y`` never interfere;
* convex combination weights block ``y`` by the amplitude of ``y`` in a
  source qustring and runs ``f`` on index block ``y`` alone;
* the product runs ``f`` on every block and tensors the accepting
  branches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decide import hermitian_max_eigen
from .errors import BoundViolationError, ConvergenceError, SourceNotCleanError
from .evolution import run
from .machine import encode_input, machine_from_dict, machine_to_dict, pair
from .qopt import (
    SAMPLE_COUNT,
    SAMPLE_SEED,
    OptProblem,
    PowerProblem,
    SquareProblem,
    basis_vector,
    extract_opt_matrix,
    power_problem,
    random_unit_vectors,
    solve_opt,
    window_for,
)
from .wellformedness import local_conditions_pass

VALUE_TOL = 1e-9


def _bits(s, width):
    return format(s, f"0{width}b") if width else ""


def _blocks(s, block, count):
    """Split index ``s`` into ``count`` blocks of ``block`` qubits, block 0
    most significant."""
    out = []
    for _ in range(count):
        s, r = divmod(s, 2**block)
        out.append(r)
    return tuple(reversed(out))


# ------------------------------------------------------------- sources


@dataclass(eq=False)
class QubitSource:
    """Clean machine writing an ``l``-qubit qustring into cells ``0..l-1``
    of its output tape."""

    machine: object
    steps: int
    qubits: int

    def __post_init__(self):
        if not local_conditions_pass(self.machine):
            raise SourceNotCleanError("source machine is not well-formed")
        self._weights = {}

    def generate(self, x):
        m = self.machine
        w = window_for(m, x, 0, self.steps)
        res = run(m, encode_input(m, x, windows=w), self.steps)
        if not res.halted:
            raise SourceNotCleanError(f"source did not halt in {self.steps} steps")
        out_tape = m.io.output_tape
        gamma = m.tapes[out_tape].gamma
        amps = np.zeros(2**self.qubits, dtype=complex)
        rest = None
        for c, a in res.final_state.items():
            cells = c.cells[out_tape]
            word = "".join(gamma[s] for s in cells[: self.qubits])
            if set(word) - {"0", "1"}:
                raise SourceNotCleanError(f"output cells hold {word!r}")
            key = (c.state, c.heads, tuple(t if i != out_tape else t[self.qubits :] for i, t in enumerate(c.cells)))
            if rest is None:
                rest = key
            elif key != rest:
                raise SourceNotCleanError("output is entangled with the rest of the configuration")
            amps[int(word, 2)] += a
        return amps

    def weights(self, x):
        if x not in self._weights:
            self._weights[x] = np.abs(self.generate(x)) ** 2
        return self._weights[x]

    def to_dict(self):
        return {"machine": machine_to_dict(self.machine), "steps": self.steps, "qubits": self.qubits}

    @classmethod
    def from_dict(cls, doc):
        return cls(machine_from_dict(doc["machine"]), int(doc["steps"]), int(doc["qubits"]))


# -------------------------------------------------------- constructions


@dataclass(eq=False)
class MaxOverClassical(OptProblem):
    """Observe the first ``q`` index qubits as ``y`` and run ``f`` on
    ``<x, y>`` with the remaining qubits."""

    base: OptProblem
    q: int
    kind = "maxOverClassical"

    @property
    def index_size(self):
        return self.q + self.base.index_size

    def basis_image(self, x, s):
        y, rest = divmod(s, 2**self.base.index_size)
        y = _bits(y, self.q)
        img = self.base.basis_image(pair(x, y), rest)
        return {(y, k): a for k, a in img.items()}

    def analytic(self, x):
        return max(solve_opt(self.base, pair(x, _bits(y, self.q))) for y in range(2**self.q))

    def to_dict(self):
        return {"construction": self.kind, "q": self.q, "base": self.base.to_dict()}


@dataclass(eq=False)
class ConvexCombine(OptProblem):
    base: OptProblem
    source: QubitSource
    kind = "convexCombine"

    @property
    def blocks(self):
        return 2**self.source.qubits

    @property
    def index_size(self):
        return self.blocks * self.base.index_size

    def basis_image(self, x, s):
        parts = _blocks(s, self.base.index_size, self.blocks)
        weights = self.source.weights(x)
        out = {}
        for yi, w in enumerate(weights):
            if w == 0:
                continue
            y = _bits(yi, self.source.qubits)
            others = parts[:yi] + parts[yi + 1 :]
            img = self.base.basis_image(pair(x, y), parts[yi])
            for k, a in img.items():
                out[(y, k, others)] = np.sqrt(w) * a
        return out

    def analytic(self, x):
        w = self.source.weights(x)
        return float(
            sum(
                wy * solve_opt(self.base, pair(x, _bits(yi, self.source.qubits)))
                for yi, wy in enumerate(w)
                if wy != 0
            )
        )

    def product_maximizer(self, x):
        vec = np.ones(1, dtype=complex)
        for yi in range(self.blocks):
            om = extract_opt_matrix(self.base, pair(x, _bits(yi, self.source.qubits)))
            vec = np.kron(vec, om.max_eigenvector)
        return vec

    def to_dict(self):
        return {"construction": self.kind, "source": self.source.to_dict(), "base": self.base.to_dict()}


@dataclass(eq=False)
class ProductOverAll(OptProblem):
    """Run ``f`` on ``<x, y>`` with index block ``y`` for every ``y`` of
    length ``l`` and accept when all runs accept."""

    base: OptProblem
    length: int
    kind = "productOverAll"

    @property
    def blocks(self):
        return 2**self.length

    @property
    def index_size(self):
        return self.blocks * self.base.index_size

    def basis_image(self, x, s):
        parts = _blocks(s, self.base.index_size, self.blocks)
        out = {(): 1.0 + 0j}
        for yi, part in enumerate(parts):
            img = self.base.basis_image(pair(x, _bits(yi, self.length)), part)
            out = {k + (kk,): a * b for k, a in out.items() for kk, b in img.items()}
        return out

    def analytic(self, x):
        return float(np.prod([solve_opt(self.base, pair(x, _bits(y, self.length))) for y in range(self.blocks)]))

    def to_dict(self):
        return {"construction": self.kind, "length": self.length, "base": self.base.to_dict()}


def _flip(x):
    return "".join("1" if c == "0" else "0" if c == "1" else c for c in x)


FP_MAPS = {
    "identity": lambda x: x,
    "bitflip": _flip,
    "reverse": lambda x: x[::-1],
}


def fp_map(name):
    """Named string transformation; ``constant:<c>`` maps everything to
    ``c``."""
    if name.startswith("constant:"):
        c = name.split(":", 1)[1]
        return lambda _x: c
    return FP_MAPS[name]


@dataclass(eq=False)
class ComposeWithFP(OptProblem):
    base: OptProblem
    map_name: str
    kind = "composeWithFP"

    def __post_init__(self):
        self.k = fp_map(self.map_name)

    @property
    def index_size(self):
        return self.base.index_size

    def basis_image(self, x, s):
        return self.base.basis_image(self.k(x), s)

    def adjoint(self, x, w):
        return self.base.adjoint(self.k(x), w)

    def analytic(self, x):
        return solve_opt(self.base, self.k(x))

    def to_dict(self):
        return {"construction": self.kind, "map": self.map_name, "base": self.base.to_dict()}


@dataclass(eq=False)
class SeparableTensor(OptProblem):
    """Independent runs of several problems on the same input, one index
    factor each; accepts when all accept."""

    parts: tuple
    kind = "tensor"

    @property
    def index_size(self):
        return sum(p.index_size for p in self.parts)

    def basis_image(self, x, s):
        sizes = [p.index_size for p in self.parts]
        idx = []
        for size in reversed(sizes):
            s, r = divmod(s, 2**size)
            idx.append(r)
        idx.reverse()
        out = {(): 1.0 + 0j}
        for prob, i in zip(self.parts, idx):
            img = prob.basis_image(x, i)
            out = {k + (kk,): a * b for k, a in out.items() for kk, b in img.items()}
        return out

    def to_dict(self):
        return {"construction": self.kind, "parts": [p.to_dict() for p in self.parts]}


def max_over_classical(f, q):
    return f if q == 0 else MaxOverClassical(f, q)


def convex_combine(f, source):
    return ConvexCombine(f, source)


def product_over_all(f, length):
    return ProductOverAll(f, length)


def compose_with_fp(f, name):
    return ComposeWithFP(f, name)


def construction_from_dict(doc):
    from .qopt import problem_from_dict

    kind = doc["construction"]
    if kind == "tensor":
        return SeparableTensor(tuple(problem_from_dict(d) for d in doc["parts"]))
    base = problem_from_dict(doc["base"])
    if kind == "square":
        return SquareProblem(base)
    if kind == "power":
        return power_problem(base, int(doc["exponent"]))
    if kind == "maxOverClassical":
        return max_over_classical(base, int(doc["q"]))
    if kind == "convexCombine":
        return ConvexCombine(base, QubitSource.from_dict(doc["source"]))
    if kind == "productOverAll":
        return ProductOverAll(base, int(doc["length"]))
    if kind == "composeWithFP":
        return ComposeWithFP(base, doc["map"])
    raise ValueError(f"unknown construction {kind!r}")


def analytic_value(prob, x):
    """Value predicted from the base problem's values alone."""
    if isinstance(prob, SquareProblem):
        return solve_opt(prob.base, x) ** 2
    if isinstance(prob, PowerProblem):
        return solve_opt(prob.base, x) ** prob.exponent
    if isinstance(prob, SeparableTensor):
        return float(np.prod([solve_opt(p, x) for p in prob.parts]))
    if hasattr(prob, "analytic"):
        return prob.analytic(x)
    return solve_opt(prob, x)


def verify_construction(prob, x):
    constructed = solve_opt(prob, x)
    analytic = analytic_value(prob, x)
    return {
        "construction": prob.kind,
        "input": x,
        "indexSize": prob.index_size,
        "constructed": constructed,
        "analytic": analytic,
        "difference": abs(constructed - analytic),
    }


# ------------------------------------------------------ tensor indices


def partial_matrix(p_matrix, sizes, factors, i):
    """Effective matrix on factor ``i`` with the other factors fixed."""
    dims = [2**s for s in sizes]
    k = len(dims)
    letters = "abcdefgh"
    rows = [letters[j] for j in range(k)]
    cols = [letters[j].upper() for j in range(k)]
    operands = [p_matrix.reshape(dims + dims)]
    subs = ["".join(rows + cols)]
    for j in range(k):
        if j == i:
            continue
        operands.append(np.conj(factors[j]))
        subs.append(rows[j])
        operands.append(factors[j])
        subs.append(cols[j])
    expr = ",".join(subs) + "->" + rows[i] + cols[i]
    return np.einsum(expr, *operands)


def product_value(p_matrix, factors):
    v = factors[0]
    for f in factors[1:]:
        v = np.kron(v, f)
    return float(np.real(np.conj(v) @ p_matrix @ v))


@dataclass
class TensorIndexResult:
    value: float
    factors: list
    sweeps: int
    converged: bool
    sampling_max: float
    lambda_max: float

    def to_dict(self):
        return {
            "value": self.value,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "samplingMax": self.sampling_max,
            "lambdaMax": self.lambda_max,
            "heuristic": True,
        }


def _alternate(p_matrix, sizes, factors, max_sweeps, tol):
    value = product_value(p_matrix, factors)
    for sweep in range(1, max_sweeps + 1):
        for i in range(len(sizes)):
            eff = partial_matrix(p_matrix, sizes, factors, i)
            eff = 0.5 * (eff + eff.conj().T)
            _, vec, _ = hermitian_max_eigen(eff)
            factors[i] = np.asarray(vec, dtype=complex)
        new = product_value(p_matrix, factors)
        if new - value <= tol:
            return max(new, value), factors, sweep, True
        value = new
    return value, factors, max_sweeps, False


def tensor_index_value(prob, x, sizes=None, samples=SAMPLE_COUNT, seed=SAMPLE_SEED, max_sweeps=100, starts=8, strict=True):
    """Sup of acceptance over product indices ``phi_1 x ... x phi_k``.

    ``prob`` is a problem whose index splits into factors of ``sizes``
    qubits, or a list of problems run independently (one factor each).
    Alternating per-factor eigen-optimization is a heuristic; it is
    reported with the product-sampling lower bound and the unrestricted
    top eigenvalue.
    """
    if isinstance(prob, (list, tuple)):
        parts = tuple(prob)
        prob = parts[0] if len(parts) == 1 else SeparableTensor(parts)
        sizes = [p.index_size for p in parts]
    if sizes is None:
        sizes = [prob.index_size]
    if sum(sizes) != prob.index_size:
        raise ValueError(f"factor sizes {sizes} do not add up to {prob.index_size}")
    om = extract_opt_matrix(prob, x)
    p_matrix = 0.5 * (om.entries + om.entries.conj().T)
    rng = np.random.default_rng(seed)
    dims = [2**s for s in sizes]
    draws = [random_unit_vectors(rng, samples, d) for d in dims]
    prod = draws[0]
    for d in draws[1:]:
        prod = np.einsum("ni,nj->nij", prod, d).reshape(samples, -1)
    vals = np.real(np.einsum("ni,ij,nj->n", prod.conj(), p_matrix, prod))
    best = int(np.argmax(vals))
    sampling_max = float(vals[best])
    if len(sizes) == 1:
        return TensorIndexResult(om.max_eigenvalue, [om.max_eigenvector], 0, True, sampling_max, om.max_eigenvalue)
    candidates = [[d[best].copy() for d in draws]]
    for s in range(1, starts):
        candidates.append([d[(best + 7919 * s) % samples].copy() for d in draws])
    results = []
    for factors in candidates:
        results.append(_alternate(p_matrix, sizes, factors, max_sweeps, 1e-15))
    value, factors, sweeps, converged = max(results, key=lambda r: r[0])
    if strict and not converged:
        raise ConvergenceError(f"alternating optimization did not converge in {max_sweeps} sweeps")
    return TensorIndexResult(value, factors, sweeps, converged, sampling_max, om.max_eigenvalue)


# ----------------------------------------------------- averaging bound


def averaging_sandwich(f, m, x, tol=VALUE_TOL, strict=True):
    """``g = 2^-p sum_s acceptance(f^m, e_s)`` and the check
    ``g <= f(x)^m <= 2^p g``."""
    powered = power_problem(f, m)
    p = f.index_size
    g = sum(powered.acceptance(x, basis_vector(p, s)) for s in range(2**p)) / 2**p
    value = solve_opt(f, x) ** m
    lower_ok = g <= value + tol
    upper_ok = value <= 2**p * g + tol
    report = {
        "m": m,
        "indexSize": p,
        "g": g,
        "fPower": value,
        "upper": 2**p * g,
        "lowerSlack": value - g,
        "upperSlack": 2**p * g - value,
        "passed": lower_ok and upper_ok,
    }
    if strict and not report["passed"]:
        raise BoundViolationError(f"averaging bound violated: {report}")
    return report


# --------------------------------------------------- max / sup exchange


def max_sup_swap(f, x, q):
    """Compare ``max_y sup_phi`` with ``sup_phi max_y`` for a family
    ``f(<x, y>)``. The right side is evaluated on the top eigenvectors of
    every ``P_y`` (a maximizer of the left side is among them) and via the
    observe-then-dispatch construction."""
    ys = [_bits(y, q) for y in range(2**q)]
    mats = {y: extract_opt_matrix(f, pair(x, y)) for y in ys}
    left = max(om.max_eigenvalue for om in mats.values())
    right = max(
        max(float(np.real(np.conj(om.max_eigenvector) @ mats[y2].entries @ om.max_eigenvector)) for y2 in ys)
        for om in mats.values()
    )
    dispatched = solve_opt(max_over_classical(f, q), x)
    return {
        "maxSup": left,
        "supMax": right,
        "dispatched": dispatched,
        "difference": max(abs(left - right), abs(left - dispatched)),
    }
