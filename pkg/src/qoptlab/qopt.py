"""Quantum optimization problems and their acceptance matrices.

A problem maps a classical input ``x`` and a quantum index ``|phi>`` of
``p`` qubits to an acceptance probability. Every problem here is linear in
the index: it exposes the accepting branch ``A_x e_s`` of each index basis
vector as a sparse dict, so that ``acceptance(x, phi) = ||A_x phi||^2`` and
the acceptance matrix is ``P = A_x^dagger A_x``.

For machine witnesses ``A_x = Pi_acc U^t E_x`` and the matrix is extracted
by the run / copy-accept-bit / reverse-run pipeline: column ``t`` is the
post-selected image of ``(U^dagger)^t Pi_acc U^t E_x e_t`` on the input
configurations ``E_x e_s``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionCapError,
    HaltingError,
    IndexSizeMismatchError,
    InvariantViolationError,
)
from .evolution import (
    HALT_TOL,
    accepting_part,
    check_travel_budget,
    compile_machine,
    final_mass,
    step,
    step_back,
    vinner,
    vnorm,
)
from .machine import DEFAULT_WINDOW, IOLayout, encode_input, input_extent, machine_from_dict, machine_to_dict
from .wellformedness import local_conditions_pass

INDEX_QUBIT_CAP = 12
HERMITIAN_TOL = 1e-9
PSD_TOL = 1e-8
CONTRACTIVE_TOL = 1e-9
REAL_TOL = 1e-9
SAMPLE_COUNT = 10_000
SAMPLE_SEED = 20240611


def basis_vector(p, s):
    v = np.zeros(2**p, dtype=complex)
    v[s] = 1.0
    return v


def _scaled(vec, c):
    return {k: c * a for k, a in vec.items()}


def _combine(coefs, images):
    out = {}
    for c, img in zip(coefs, images):
        if c == 0:
            continue
        for k, a in img.items():
            out[k] = out.get(k, 0j) + c * a
    return {k: a for k, a in out.items() if abs(a) > 1e-15}


class OptProblem:
    """Base class. Subclasses implement :meth:`basis_image`."""

    index_size: int
    kind = "abstract"

    def basis_image(self, x, s):
        """Accepting branch ``A_x e_s`` as a sparse dict."""
        raise NotImplementedError

    def dimension(self):
        return 2**self.index_size

    def _check_cap(self):
        if self.index_size > INDEX_QUBIT_CAP:
            raise DimensionCapError(f"index of {self.index_size} qubits exceeds 2^{INDEX_QUBIT_CAP}")

    def basis_images(self, x):
        self._check_cap()
        return [self.basis_image(x, s) for s in range(self.dimension())]

    def forward(self, x, v):
        v = np.asarray(v, dtype=complex)
        if len(v) != self.dimension():
            raise IndexSizeMismatchError(f"index has length {len(v)}, expected {self.dimension()}")
        return _combine(v, [self.basis_image(x, s) if v[s] != 0 else {} for s in range(len(v))])

    def adjoint(self, x, w):
        """``A_x^dagger w`` as a dense index vector."""
        return np.array([vinner(img, w) for img in self.basis_images(x)], dtype=complex)

    def acceptance(self, x, v):
        return vnorm(self.forward(x, v)) ** 2

    def image_matrix(self, x):
        """Dense ``A_x`` over the union of supports (rows sorted by key
        order of first appearance)."""
        images = self.basis_images(x)
        keys = {}
        for img in images:
            for k in img:
                keys.setdefault(k, len(keys))
        mat = np.zeros((len(keys), len(images)), dtype=complex)
        for j, img in enumerate(images):
            for k, a in img.items():
                mat[keys[k], j] = a
        return mat

    def to_dict(self):
        raise NotImplementedError


# ------------------------------------------------------------ machines


def window_for(m, x, p, t):
    extent = input_extent(m, x, p)
    return max(DEFAULT_WINDOW, t + extent + 1, t + 2)


@dataclass(eq=False)
class MachineProblem(OptProblem):
    """A witness machine run for exactly ``steps`` steps on ``(x, index)``."""

    machine: object
    index_size: int
    steps: int
    oracle: frozenset = None
    kind = "machine"

    def __post_init__(self):
        if self.index_size < 1:
            raise ValueError("index size must be at least 1")
        if self.oracle is not None:
            self.oracle = frozenset(self.oracle)
        self._cache = {}

    def encode_basis(self, x, s):
        w = window_for(self.machine, x, self.index_size, self.steps)
        vec = encode_input(self.machine, x, basis_vector(self.index_size, s), windows=w)
        return vec

    def _run(self, vec):
        check_travel_budget(self.machine, vec, self.steps)
        for _ in range(self.steps):
            vec = step(self.machine, vec, self.oracle)
        return vec

    def final_state(self, x, s):
        key = ("final", x, s)
        if key not in self._cache:
            out = self._run(self.encode_basis(x, s))
            fm = final_mass(self.machine, out)
            if fm < 1.0 - HALT_TOL:
                raise HaltingError(
                    f"witness has final mass {fm:.3g} after {self.steps} steps on input {x!r}"
                )
            self._cache[key] = out
        return self._cache[key]

    def basis_image(self, x, s):
        return accepting_part(self.machine, self.final_state(x, s))

    def reverse(self, vec):
        for _ in range(self.steps):
            vec = step_back(self.machine, vec, self.oracle)
        return vec

    def adjoint(self, x, w):
        """Reverse-run ``w`` and read the amplitude on each input
        configuration ``(x, s)``."""
        back = self.reverse(w)
        out = np.zeros(self.dimension(), dtype=complex)
        for s in range(self.dimension()):
            (cfg,) = self.encode_basis(x, s)
            out[s] = back.get(cfg, 0j)
        return out

    def simulate(self, x, v):
        """Independent acceptance path: run the superposed input directly."""
        from .evolution import run

        w = window_for(self.machine, x, self.index_size, self.steps)
        vec = encode_input(self.machine, x, np.asarray(v, dtype=complex), windows=w)
        return run(self.machine, vec, self.steps, self.oracle).accept_probability

    def to_dict(self):
        doc = {
            "machine": machine_to_dict(self.machine),
            "indexSize": self.index_size,
            "steps": self.steps,
            "inputRule": {
                "outputTape": self.machine.io.output_tape,
                "xOffset": self.machine.io.x_offset,
                "indexOffset": self.machine.io.index_offset,
            },
        }
        if self.oracle is not None:
            doc["oracle"] = sorted(self.oracle)
        return doc


# ------------------------------------------------------- derived forms


@dataclass(eq=False)
class SquareProblem(OptProblem):
    """Accepts with the probability that the run-accept-reverse pipeline of
    ``base`` lands on the input configuration ``(x, s)``: ``||P e||^2``."""

    base: OptProblem
    kind = "square"

    @property
    def index_size(self):
        return self.base.index_size

    def basis_image(self, x, s):
        col = self.base.adjoint(x, self.base.basis_image(x, s))
        return {j: complex(a) for j, a in enumerate(col) if abs(a) > 1e-15}

    def to_dict(self):
        return {"construction": "square", "base": self.base.to_dict()}


@dataclass(eq=False)
class PowerProblem(OptProblem):
    """``k`` pipeline rounds followed by one plain run when the exponent is
    odd; accepts with probability ``<phi|P^m|phi>``."""

    base: OptProblem
    exponent: int
    kind = "power"

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError("exponent must be positive")

    @property
    def index_size(self):
        return self.base.index_size

    def basis_image(self, x, s):
        rounds, odd = divmod(self.exponent, 2)
        vec = basis_vector(self.index_size, s)
        for _ in range(rounds):
            vec = self.base.adjoint(x, self.base.forward(x, vec))
        if odd:
            return self.base.forward(x, vec)
        return {j: complex(a) for j, a in enumerate(vec) if abs(a) > 1e-15}

    def to_dict(self):
        return {"construction": "power", "exponent": self.exponent, "base": self.base.to_dict()}


def square_problem(prob):
    return SquareProblem(prob)


def power_problem(prob, m):
    if m == 1:
        return prob
    return PowerProblem(prob, int(m))


# ------------------------------------------------------- extraction


@dataclass
class OptMatrix:
    entries: np.ndarray
    max_eigenvalue: float
    max_eigenvector: np.ndarray
    residual: float
    checks: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "entries": _matrix_json(self.entries),
            "lambdaMax": float(self.max_eigenvalue),
            "eigenvector": _vector_json(self.max_eigenvector),
            "residual": float(self.residual),
            "checks": self.checks,
        }


def _vector_json(v):
    v = np.asarray(v)
    if np.all(np.abs(v.imag) == 0):
        return [float(a) for a in v.real]
    return [{"re": float(a.real), "im": float(a.imag)} for a in v]


def _matrix_json(mat):
    return [_vector_json(row) for row in mat]


def certify(p_matrix, require_real=True):
    """Structural checks on an acceptance matrix; returns a dict of
    ``(value, tolerance, passed)``."""
    herm = float(np.max(np.abs(p_matrix - p_matrix.conj().T))) if p_matrix.size else 0.0
    sym = 0.5 * (p_matrix + p_matrix.conj().T)
    eig = np.linalg.eigvalsh(sym)
    imag = float(np.max(np.abs(p_matrix.imag))) if p_matrix.size else 0.0
    checks = {
        "hermitian": {"value": herm, "tolerance": HERMITIAN_TOL, "passed": herm <= HERMITIAN_TOL},
        "psd": {"value": float(eig[0]), "tolerance": -PSD_TOL, "passed": eig[0] >= -PSD_TOL},
        "contractive": {
            "value": float(eig[-1]),
            "tolerance": 1 + CONTRACTIVE_TOL,
            "passed": eig[-1] <= 1 + CONTRACTIVE_TOL,
        },
    }
    if require_real:
        checks["real"] = {"value": imag, "tolerance": REAL_TOL, "passed": imag <= REAL_TOL}
    return checks


def _is_real_problem(prob):
    if isinstance(prob, MachineProblem):
        return prob.machine.is_real()
    for attr in ("base",):
        if hasattr(prob, attr):
            return _is_real_problem(getattr(prob, attr))
    return all(_is_real_problem(b) for b in getattr(prob, "parts", ()))


def extract_opt_matrix(prob, x, strict=True):
    """Acceptance matrix ``P`` with certified structure.

    Column ``t`` is ``A^dagger (A e_t)``; for machine witnesses the adjoint
    is a reverse run. Entries are real only for real-amplitude witnesses,
    so the realness check is applied to those alone.
    """
    from .decide import hermitian_max_eigen

    prob._check_cap()
    n = prob.dimension()
    cols = [prob.adjoint(x, prob.basis_image(x, t)) for t in range(n)]
    p_matrix = np.array(cols, dtype=complex).T
    checks = certify(p_matrix, require_real=_is_real_problem(prob))
    failed = [k for k, v in checks.items() if not v["passed"]]
    if strict and failed:
        raise InvariantViolationError(f"acceptance matrix fails {failed}: {checks}")
    lam, vec, res = hermitian_max_eigen(0.5 * (p_matrix + p_matrix.conj().T))
    herm = checks["hermitian"]["value"]
    residual = max(herm, max(0.0, -checks["psd"]["value"]), max(0.0, lam - 1.0), res)
    if "real" in checks:
        residual = max(residual, checks["real"]["value"])
    return OptMatrix(p_matrix, lam, vec, residual, checks)


def solve_opt(prob, x):
    """``f(x) = sup_phi acceptance`` as the top eigenvalue of ``P``."""
    return extract_opt_matrix(prob, x).max_eigenvalue


# ------------------------------------------------------ sampling path


def random_unit_vectors(rng, count, dim, real=False):
    g = rng.standard_normal((count, dim))
    if not real:
        g = g + 1j * rng.standard_normal((count, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class SamplingResult:
    sample_max: float
    refined: float
    best: np.ndarray
    iterations: int


def sampling_lower_bound(prob, x, count=SAMPLE_COUNT, seed=SAMPLE_SEED, refine_iters=2000, block=8):
    """Sup estimate that never touches ``P``: acceptance of random indices
    through the accepting-branch map, then block Rayleigh-Ritz refinement
    seeded with the best samples (forward runs and the plain inner-product
    adjoint only)."""
    rng = np.random.default_rng(seed)
    a = prob.image_matrix(x)
    dim = prob.dimension()
    phis = random_unit_vectors(rng, count, dim)
    vals = np.sum(np.abs(phis @ a.T) ** 2, axis=1)
    order = np.argsort(-vals, kind="stable")
    sample_max = float(vals[order[0]])
    q, _ = np.linalg.qr(phis[order[: min(block, dim, count)]].T)
    value, best, it = sample_max, phis[order[0]], 0
    for it in range(1, refine_iters + 1):
        img = a @ q
        ritz, vecs = np.linalg.eigh(img.conj().T @ img)
        new = float(ritz[-1])
        if new > value:
            value, best = new, q @ vecs[:, -1]
        if it > 1 and abs(new - prev) < 1e-15:
            break
        prev = new
        q, _ = np.linalg.qr(a.conj().T @ (img @ vecs[:, ::-1]))
    return SamplingResult(sample_max, value, best, it)


# ------------------------------------------------------ serialization


def problem_from_dict(doc):
    from . import constructions

    if "construction" in doc:
        return constructions.construction_from_dict(doc)
    mdoc = dict(doc["machine"])
    rule = doc.get("inputRule") or {}
    if rule:
        io = dict(mdoc.get("io", {}))
        for key in ("outputTape", "xOffset", "indexOffset"):
            if key in rule:
                io[key] = rule[key]
        mdoc["io"] = io
    m = machine_from_dict(mdoc)
    oracle = doc.get("oracle")
    return MachineProblem(m, int(doc["indexSize"]), int(doc["steps"]), None if oracle is None else frozenset(oracle))


def check_witness(prob):
    """Witness machines must pass the local well-formedness conditions."""
    return local_conditions_pass(prob.machine)
