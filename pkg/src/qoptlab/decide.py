"""Eigenvalues, dyadic value extraction and decision predicates over
optimization values."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    BoundaryAmbiguityError,
    BracketingError,
    ConvergenceError,
    DimensionCapError,
    NonMonotoneOracleError,
    NonSymmetricError,
)

SYMMETRY_TOL = 1e-9
BOUNDARY_TOL = 1e-12
EIGEN_DIM_CAP = 2**12
CHARPOLY_DIM_CAP = 64
CHARPOLY_GRID_BITS = 40


# ------------------------------------------------------------ Jacobi


def _real_form(p):
    """Real symmetric matrix with the same spectrum (each eigenvalue twice)
    for complex Hermitian input; real input is returned as is."""
    p = np.asarray(p)
    if np.iscomplexobj(p) and np.any(p.imag != 0):
        a, b = p.real, p.imag
        return np.block([[a, -b], [b, a]]), True
    return np.array(p.real if np.iscomplexobj(p) else p, dtype=float), False


def jacobi_eigen(a, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi for a real symmetric matrix. Returns ``(w, V)`` with
    eigenvalues unsorted and eigenvectors in the columns of ``V``."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v
    scale = max(np.max(np.abs(a)), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            return a.diagonal().copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")


def hermitian_max_eigen(p):
    """``(lambda_max, eigenvector, residual)`` for a Hermitian matrix."""
    p = np.asarray(p)
    n = p.shape[0]
    if p.shape != (n, n):
        raise NonSymmetricError("matrix is not square")
    if n > EIGEN_DIM_CAP:
        raise DimensionCapError(f"dimension {n} exceeds {EIGEN_DIM_CAP}")
    asym = float(np.max(np.abs(p - p.conj().T))) if n else 0.0
    if asym > SYMMETRY_TOL:
        raise NonSymmetricError(f"asymmetry {asym:.3g} exceeds {SYMMETRY_TOL}")
    a, embedded = _real_form(p)
    w, vecs = jacobi_eigen(a)
    i = int(np.argmax(w))
    lam = float(w[i])
    v = vecs[:, i]
    if embedded:
        v = v[:n] + 1j * v[n:]
    else:
        v = v.astype(complex) if np.iscomplexobj(p) else v
    v = v / np.linalg.norm(v)
    # fix sign/phase so that the largest component is real positive
    j = int(np.argmax(np.abs(v)))
    v = v * (abs(v[j]) / v[j])
    if not np.iscomplexobj(p):
        v = v.real
    residual = float(np.linalg.norm(p @ v - lam * v))
    return lam, v, residual


# -------------------------------------------------- characteristic poly


def _to_integer_matrix(p, bits):
    scale = 2**bits
    return [[int(round(float(x) * scale)) for x in row] for row in np.asarray(p, dtype=float)]


def _matmul(a, b):
    n = len(a)
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def char_poly_integer(a):
    """Coefficients of ``det(zI - A)`` for an integer matrix by the
    Faddeev-LeVerrier recurrence, highest degree first. All divisions are
    exact."""
    n = len(a)
    coeffs = [1]
    m = [[0] * n for _ in range(n)]
    for k in range(1, n + 1):
        am = _matmul(a, m) if k > 1 else [[0] * n for _ in range(n)]
        prev = coeffs[-1]
        m = [[am[i][j] + (prev if i == j else 0) for j in range(n)] for i in range(n)]
        am = _matmul(a, m)
        trace = sum(am[i][i] for i in range(n))
        c, r = divmod(-trace, k)
        if r:
            raise ArithmeticError("non-integral Faddeev-LeVerrier coefficient")
        coeffs.append(c)
    return coeffs


def _derivatives(coeffs):
    out = [list(coeffs)]
    cur = list(coeffs)
    while len(cur) > 1:
        deg = len(cur) - 1
        cur = [c * (deg - i) for i, c in enumerate(cur[:-1])]
        out.append(cur)
    return out


def _eval(coeffs, z):
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * z + c
    return acc


def _above_all_roots(derivs, z):
    # Budan-Fourier: no sign variation in (p, p', ..., p^(n)) at z means no
    # root in [z, inf) for a real-rooted polynomial.
    return all(_eval(d, z) > 0 for d in derivs)


def char_poly_max_root(p, eps=1e-6, tol=1e-12):
    """Largest root of ``det(zI - P)`` by exact integer Faddeev-LeVerrier
    and bisection on ``[0, 1 + eps]``.

    ``P`` is rounded to a ``2^-40`` grid first, a perturbation far below
    the comparison tolerance.
    """
    p = np.asarray(p)
    if np.iscomplexobj(p):
        if np.any(p.imag != 0):
            p, _ = _real_form(p)
        else:
            p = p.real
    n = p.shape[0]
    if n > CHARPOLY_DIM_CAP:
        raise DimensionCapError(f"dimension {n} exceeds {CHARPOLY_DIM_CAP}")
    bits = CHARPOLY_GRID_BITS
    coeffs = char_poly_integer(_to_integer_matrix(p, bits))
    derivs = _derivatives(coeffs)
    scale = 2**bits
    lo, hi = Fraction(0), Fraction(1) + Fraction(eps)
    if _above_all_roots(derivs, lo * scale):
        raise BracketingError("largest root is below 0", (float(lo), float(hi)))
    if not _above_all_roots(derivs, hi * scale):
        raise BracketingError("largest root is above 1 + eps", (float(lo), float(hi)))
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if _above_all_roots(derivs, mid * scale):
            hi = mid
        else:
            lo = mid
    return float((lo + hi) / 2)


# ------------------------------------------------------- dyadic values


@dataclass(frozen=True)
class DyadicValue:
    numerator: int
    exponent: int

    @property
    def value(self):
        return self.numerator / 2**self.exponent

    def to_dict(self):
        return {"numerator": self.numerator, "exponent": self.exponent, "value": self.value}


@dataclass
class SearchResult:
    value: DyadicValue
    calls: int
    trace: list = field(default_factory=list)

    def to_dict(self):
        return {
            "value": self.value.to_dict(),
            "calls": self.calls,
            "trace": [{"threshold": t, "answer": a} for t, a in self.trace],
        }


def binary_search_value(oracle, bits, x=None, verify=False):
    """Largest ``k / 2^b`` accepted by a monotone threshold oracle.

    ``b`` calls locate ``k`` in ``[0, 2^b - 1]``; a true answer at the
    midpoint moves the search up. Only when every answer was true is the
    threshold ``1`` itself queried, so values of exactly 1 keep
    ``k = 2^b``. With ``verify`` the two neighbouring thresholds are
    queried again to catch non-monotone oracles.
    """
    if bits < 1:
        raise ValueError("bits must be positive")
    lo, hi = 0, 2**bits  # invariant: k in [lo, hi)
    trace = []

    def ask(k):
        t = Fraction(k, 2**bits)
        ans = bool(oracle(x, t))
        trace.append((float(t), ans))
        return ans

    for _ in range(bits):
        mid = (lo + hi) // 2
        if ask(mid):
            lo = mid
        else:
            hi = mid
    k = lo
    if k == 2**bits - 1 and all(a for _, a in trace) and ask(2**bits):
        k = 2**bits
    calls = len(trace)
    if verify:
        if not ask(k):
            raise NonMonotoneOracleError(f"oracle rejects the returned threshold {k}/2^{bits}")
        if k < 2**bits and ask(k + 1):
            raise NonMonotoneOracleError(f"oracle accepts {k + 1}/2^{bits} after rejecting it")
    return SearchResult(DyadicValue(k, bits), calls, trace)


def threshold_oracle(value):
    """``f(x) >= threshold`` for a fixed value."""

    def oracle(_x, t):
        return value >= float(t)

    return oracle


# --------------------------------------------------------- predicates


def dyadic_floor(value, bits, tol=BOUNDARY_TOL):
    """``(floor(2^b value), ambiguous)``; ambiguous when ``value`` lies
    within ``tol`` of some ``k / 2^b``."""
    scaled = value * 2**bits
    k = math.floor(scaled)
    nearest = round(scaled)
    ambiguous = abs(value - nearest / 2**bits) <= tol
    return k, ambiguous


@dataclass
class QopVerdict:
    result: bool
    f_floor: int
    g_floor: int
    bits: int
    ambiguous: list

    @property
    def flagged(self):
        return bool(self.ambiguous)

    def to_dict(self):
        return {
            "result": self.result,
            "fFloor": self.f_floor,
            "gFloor": self.g_floor,
            "bits": self.bits,
            "flagged": self.flagged,
            "ambiguous": self.ambiguous,
        }


def qop_predicate(f_value, g_value, bits, strict=False):
    """``floor(2^b f) > floor(2^b g)`` with the boundary guard."""
    if bits < 1:
        raise ValueError("bits must be positive")
    fk, fa = dyadic_floor(f_value, bits)
    gk, ga = dyadic_floor(g_value, bits)
    amb = [name for name, flag in (("f", fa), ("g", ga)) if flag]
    if strict and amb:
        raise BoundaryAmbiguityError(
            f"{amb} within {BOUNDARY_TOL} of a 2^-{bits} boundary",
            f_value if fa else g_value,
            bits,
        )
    return QopVerdict(fk > gk, fk, gk, bits, amb)


@dataclass
class QopPredicateSpec:
    f: object
    g: object
    bits: int

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be at least 1")


def eval_qop_predicate(spec, x, strict=False):
    from .qopt import solve_opt

    return qop_predicate(solve_opt(spec.f, x), solve_opt(spec.g, x), spec.bits, strict)


def rescale_value(value, index_bits, selector_bits):
    """``2^(-p + |h|) f``: moves a comparison at ``|h|`` bits onto a fixed
    ``p``-bit lattice."""
    return value * 2.0 ** (selector_bits - index_bits)


ACCEPT, REJECT, VIOLATED = "accept", "reject", "promise-violated"


def definability_verdicts(value, tol=BOUNDARY_TOL):
    """Classify one value under the bounded-error, nonzero and exact
    membership criteria."""
    bounded = ACCEPT if value >= 0.75 - tol else REJECT if value <= 0.25 + tol else VIOLATED
    nonzero = ACCEPT if value > tol else REJECT
    if abs(value - 1.0) <= tol:
        exact = ACCEPT
    elif abs(value) <= tol:
        exact = REJECT
    else:
        exact = VIOLATED
    return {"boundedError": bounded, "nonzero": nonzero, "exact": exact}


def pp_inequalities(f_values, g_values, labels, q):
    """Check ``(1 - 2^-q) g <= f <= g`` for members and ``0 <= f <= 2^-q g``
    for non-members; also ``g > 0``."""
    rows = []
    eps = 2.0**-q
    for f, g, lab in zip(f_values, g_values, labels):
        if lab:
            lower, upper = (1 - eps) * g, g
        else:
            lower, upper = 0.0, eps * g
        margin = min(f - lower, upper - f)
        rows.append(
            {
                "f": f,
                "g": g,
                "member": bool(lab),
                "lower": lower,
                "upper": upper,
                "margin": margin,
                "passed": g > 0 and margin >= -1e-12,
            }
        )
    return {"q": q, "rows": rows, "passed": all(r["passed"] for r in rows)}
