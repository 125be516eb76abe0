"""Machine descriptions, the JSON machine format, configuration spaces and
input encoding.

Head moves are displacements: ``L`` = -1, ``N`` = 0, ``R`` = +1. Tapes are
rings of finite length; see :class:`ConfigurationSpace` for the canonical
ordering of configurations.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    IndexSizeMismatchError,
    InputTooLongError,
    MachineFormatError,
    NonTotalDeltaError,
    SpaceTooLargeError,
    UndeclaredSymbolError,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)
THREE_FIFTHS = 0.6
FOUR_FIFTHS = 0.8

NAMED_AMPLITUDES = {
    "1": 1.0,
    "-1": -1.0,
    "0": 0.0,
    "1/sqrt2": INV_SQRT2,
    "-1/sqrt2": -INV_SQRT2,
    "3/5": THREE_FIFTHS,
    "-3/5": -THREE_FIFTHS,
    "4/5": FOUR_FIFTHS,
    "-4/5": -FOUR_FIFTHS,
    "i": 1j,
    "-i": -1j,
}

MOVES = {"L": -1, "N": 0, "R": 1}
MOVE_NAMES = {v: k for k, v in MOVES.items()}

DEFAULT_WINDOW = 7
MIN_WINDOW = 5
DEFAULT_SPACE_CAP = 2**20


@dataclass(frozen=True)
class Tape:
    sigma: tuple
    gamma: tuple
    blank: str

    def symbol_index(self, symbol):
        return self.gamma.index(symbol)


@dataclass(frozen=True)
class Transition:
    target: str
    write: tuple
    move: tuple
    amp: complex


@dataclass(frozen=True)
class OracleSpec:
    """Query-step wiring of an oracle machine.

    The query tape holds ``queryLength`` cells starting at its start cell:
    the first ``queryLength - 1`` cells are the query string ``x`` and the
    last one is the answer bit ``b``.
    """

    pre: str
    post: str
    tape: int
    query_length: int


@dataclass(frozen=True)
class IOLayout:
    output_tape: int = 0
    x_offset: int = 0
    index_offset: Optional[int] = None

    def index_start(self, x_len):
        if self.index_offset is None:
            return self.x_offset + x_len + 1
        return self.index_offset


@dataclass(frozen=True)
class MachineDescription:
    states: tuple
    initial: str
    finals: tuple
    tapes: tuple
    delta: tuple  # sorted tuple of ((state, syms), (Transition, ...))
    normal_form: bool = True
    stationary: bool = True
    oracle: Optional[OracleSpec] = None
    io: IOLayout = field(default_factory=IOLayout)

    @property
    def k(self):
        return len(self.tapes)

    @property
    def delta_map(self):
        return dict(self.delta)

    def state_index(self, q):
        return self.states.index(q)

    def symbol_tuples(self):
        return list(itertools.product(*(t.gamma for t in self.tapes)))

    def rows(self):
        """Full transition table as ``{(q, syms): [Transition, ...]}``.

        Normal-form rows for final states and the identity relabel
        ``pre -> post`` of oracle machines are synthesized when absent.
        """
        table = {key: list(val) for key, val in self.delta}
        none = ("N",) * self.k
        for syms in self.symbol_tuples():
            if self.normal_form:
                for qf in self.finals:
                    table.setdefault((qf, syms), [Transition(self.initial, syms, none, 1.0)])
            if self.oracle is not None:
                table.setdefault(
                    (self.oracle.pre, syms),
                    [Transition(self.oracle.post, syms, none, 1.0)],
                )
        return table

    def is_real(self):
        return all(abs(tr.amp.imag) == 0.0 for _, trs in self.delta for tr in trs)


# ---------------------------------------------------------------- parsing


def _parse_amp(raw, locus):
    if isinstance(raw, str):
        if raw not in NAMED_AMPLITUDES:
            raise MachineFormatError(f"unknown named amplitude {raw!r}", locus)
        value = complex(NAMED_AMPLITUDES[raw])
    elif isinstance(raw, (int, float)):
        value = complex(raw)
    elif isinstance(raw, Mapping):
        re = raw.get("re", 0.0)
        im = raw.get("im", 0.0)
        re = NAMED_AMPLITUDES[re] if isinstance(re, str) else re
        im = NAMED_AMPLITUDES[im] if isinstance(im, str) else im
        try:
            value = complex(float(re), float(im))
        except (TypeError, ValueError) as exc:
            raise MachineFormatError(f"bad amplitude {raw!r}", locus) from exc
    else:
        raise MachineFormatError(f"bad amplitude {raw!r}", locus)
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise MachineFormatError("amplitude must be finite", locus)
    return value


def _require(doc, key, locus="document"):
    if key not in doc:
        raise MachineFormatError(f"missing field {key!r}", locus)
    return doc[key]


def machine_from_dict(doc):
    """Build and validate a :class:`MachineDescription` from a parsed
    JSON document."""
    if not isinstance(doc, Mapping):
        raise MachineFormatError("machine document must be an object")
    states = tuple(_require(doc, "states"))
    if len(set(states)) != len(states):
        raise MachineFormatError("duplicate state names", "states")
    initial = _require(doc, "initial")
    finals = tuple(_require(doc, "finals"))
    if initial not in states:
        raise UndeclaredSymbolError(f"undeclared initial state {initial!r}", "initial")
    for q in finals:
        if q not in states:
            raise UndeclaredSymbolError(f"undeclared final state {q!r}", "finals")

    tapes = []
    for i, t in enumerate(_require(doc, "tapes")):
        locus = f"tapes[{i}]"
        gamma = tuple(_require(t, "gamma", locus))
        blank = _require(t, "blank", locus)
        sigma = tuple(t.get("sigma", [s for s in gamma if s != blank]))
        if blank not in gamma:
            raise UndeclaredSymbolError(f"blank {blank!r} not in gamma", locus)
        for s in sigma:
            if s not in gamma:
                raise UndeclaredSymbolError(f"input symbol {s!r} not in gamma", locus)
        if len(set(gamma)) != len(gamma):
            raise MachineFormatError("duplicate tape symbols", locus)
        tapes.append(Tape(sigma, gamma, blank))
    if not tapes:
        raise MachineFormatError("at least one tape is required", "tapes")
    k = len(tapes)

    flags = doc.get("flags", {})
    normal_form = bool(flags.get("normalForm", True))
    stationary = bool(flags.get("stationary", True))
    oracle = None
    if flags.get("oracle"):
        o = flags["oracle"]
        oracle = OracleSpec(o["pre"], o["post"], int(o["tape"]), int(o["queryLength"]))
        for q in (oracle.pre, oracle.post):
            if q not in states:
                raise UndeclaredSymbolError(f"undeclared oracle state {q!r}", "flags.oracle")
        if not 0 <= oracle.tape < k:
            raise MachineFormatError("oracle tape out of range", "flags.oracle")
    io_doc = doc.get("io", {})
    io = IOLayout(
        output_tape=int(io_doc.get("outputTape", k - 1)),
        x_offset=int(io_doc.get("xOffset", 0)),
        index_offset=io_doc.get("indexOffset"),
    )
    if not 0 <= io.output_tape < k:
        raise MachineFormatError("output tape out of range", "io.outputTape")

    table = {}
    for n, entry in enumerate(_require(doc, "delta")):
        locus = f"delta[{n}]"
        src = _require(entry, "from", locus)
        dst = _require(entry, "to", locus)
        if len(src) != 2 or len(dst) != 3:
            raise MachineFormatError("from must be [q, syms], to must be [q, syms, dirs]", locus)
        p, syms = src[0], tuple(src[1])
        q, writes, dirs = dst[0], tuple(dst[1]), tuple(dst[2])
        for name in (p, q):
            if name not in states:
                raise UndeclaredSymbolError(f"undeclared state {name!r}", locus)
        for group in (syms, writes, dirs):
            if len(group) != k:
                raise MachineFormatError(f"expected {k} entries per tape tuple", locus)
        for i, (a, b) in enumerate(zip(syms, writes)):
            for s in (a, b):
                if s not in tapes[i].gamma:
                    raise UndeclaredSymbolError(f"symbol {s!r} not in gamma of tape {i}", locus)
        for d in dirs:
            if d not in MOVES:
                raise MachineFormatError(f"bad direction {d!r}", locus)
        amp = _parse_amp(_require(entry, "amp", locus), locus)
        row = table.setdefault((p, syms), [])
        if any(t.target == q and t.write == writes and t.move == dirs for t in row):
            raise MachineFormatError("duplicate transition", locus)
        row.append(Transition(q, writes, dirs, amp))

    # final-state rows are optional; normal form synthesizes them
    skip = set(finals)
    if oracle is not None:
        skip.add(oracle.pre)
    symbol_tuples = list(itertools.product(*(t.gamma for t in tapes)))
    for q in states:
        if q in skip:
            continue
        for syms in symbol_tuples:
            if (q, syms) not in table:
                raise NonTotalDeltaError(f"no transitions for ({q}, {list(syms)})", "delta")
    if normal_form:
        for qf in finals:
            for syms in symbol_tuples:
                row = table.get((qf, syms))
                if row is None:
                    continue
                if not (
                    len(row) == 1
                    and row[0].target == initial
                    and row[0].write == syms
                    and abs(row[0].amp - 1.0) < 1e-12
                ):
                    raise MachineFormatError(
                        f"final state {qf!r} violates normal form", "delta"
                    )

    order = {q: i for i, q in enumerate(states)}
    sym_order = [{s: j for j, s in enumerate(t.gamma)} for t in tapes]

    def key_src(item):
        (p, syms), _ = item
        return (order[p], tuple(sym_order[i][s] for i, s in enumerate(syms)))

    def key_tr(tr):
        return (
            order[tr.target],
            tuple(sym_order[i][s] for i, s in enumerate(tr.write)),
            tuple(MOVES[d] for d in tr.move),
        )

    delta = tuple(
        (src, tuple(sorted(row, key=key_tr)))
        for src, row in sorted(table.items(), key=key_src)
    )
    return MachineDescription(
        states=states,
        initial=initial,
        finals=finals,
        tapes=tuple(tapes),
        delta=delta,
        normal_form=normal_form,
        stationary=stationary,
        oracle=oracle,
        io=io,
    )


def parse_machine(document):
    """Parse a machine document given as JSON text."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MachineFormatError(
            f"JSON syntax error: {exc.msg}", f"line {exc.lineno} column {exc.colno}"
        ) from exc
    return machine_from_dict(doc)


def load_machine(path):
    with open(path) as fh:
        return parse_machine(fh.read())


def machine_to_dict(m):
    doc = {
        "states": list(m.states),
        "initial": m.initial,
        "finals": list(m.finals),
        "tapes": [
            {"sigma": list(t.sigma), "gamma": list(t.gamma), "blank": t.blank}
            for t in m.tapes
        ],
        "delta": [
            {
                "from": [p, list(syms)],
                "to": [tr.target, list(tr.write), list(tr.move)],
                "amp": {"re": tr.amp.real, "im": tr.amp.imag},
            }
            for (p, syms), row in m.delta
            for tr in row
        ],
        "flags": {
            "normalForm": m.normal_form,
            "stationary": m.stationary,
            "oracle": None
            if m.oracle is None
            else {
                "pre": m.oracle.pre,
                "post": m.oracle.post,
                "tape": m.oracle.tape,
                "queryLength": m.oracle.query_length,
            },
        },
        "io": {
            "outputTape": m.io.output_tape,
            "xOffset": m.io.x_offset,
            "indexOffset": m.io.index_offset,
        },
    }
    return doc


def emit_machine(m):
    """Canonical JSON text for ``m`` (stable key order, diffable)."""
    return json.dumps(machine_to_dict(m), indent=2) + "\n"


# ------------------------------------------------------- configurations


@dataclass(frozen=True, order=True)
class Config:
    """One basis configuration: state index, head positions and the ring
    contents of every tape (symbol indices)."""

    state: int
    heads: tuple
    cells: tuple


def pair(x, y):
    """Length-prefixed pairing ``1^|x| 0 x y``; injective for fixed ``|y|``."""
    return "1" * len(x) + "0" + x + y


def _check_windows(m, windows):
    if windows is None:
        windows = DEFAULT_WINDOW
    if isinstance(windows, int):
        windows = (windows,) * m.k
    windows = tuple(int(w) for w in windows)
    if len(windows) != m.k:
        raise ValueError(f"expected {m.k} window lengths, got {len(windows)}")
    for w in windows:
        if w < MIN_WINDOW:
            raise ValueError(f"tape windows must have at least {MIN_WINDOW} cells, got {w}")
    return windows


def space_size(m, windows):
    windows = _check_windows(m, windows)
    size = len(m.states)
    for t, w in zip(m.tapes, windows):
        size *= len(t.gamma) ** w * w
    return size


class ConfigurationSpace:
    """Explicit enumeration of all configurations of ``m`` on ring tapes.

    Ordering is state-major, then head positions (tape 0 most significant),
    then tape contents read lexicographically (tape 0 cell 0 most
    significant, symbols in ``gamma`` order).
    """

    def __init__(self, m, windows=None, cap=DEFAULT_SPACE_CAP):
        self.machine = m
        self.windows = _check_windows(m, windows)
        self.size = space_size(m, self.windows)
        if self.size > cap:
            raise SpaceTooLargeError(self.size, cap)
        self.n_heads = math.prod(self.windows)
        radices = []
        for t, w in zip(m.tapes, self.windows):
            radices.extend([len(t.gamma)] * w)
        self.cell_radices = tuple(radices)
        self.n_contents = math.prod(radices)
        weights = [1] * len(radices)
        for j in range(len(radices) - 2, -1, -1):
            weights[j] = weights[j + 1] * radices[j + 1]
        self.cell_weights = tuple(weights)
        offsets = [0]
        for w in self.windows:
            offsets.append(offsets[-1] + w)
        self.tape_offsets = tuple(offsets)

    def __len__(self):
        return self.size

    def index(self, c):
        h = 0
        for pos, w in zip(c.heads, self.windows):
            h = h * w + pos
        content = 0
        flat = [s for tape in c.cells for s in tape]
        for s, r in zip(flat, self.cell_radices):
            content = content * r + s
        return (c.state * self.n_heads + h) * self.n_contents + content

    def config(self, i):
        if not 0 <= i < self.size:
            raise IndexError(i)
        rest, content = divmod(i, self.n_contents)
        state, h = divmod(rest, self.n_heads)
        heads = []
        for w in reversed(self.windows):
            h, pos = divmod(h, w)
            heads.append(pos)
        flat = []
        for r in reversed(self.cell_radices):
            content, s = divmod(content, r)
            flat.append(s)
        flat.reverse()
        cells = tuple(
            tuple(flat[self.tape_offsets[t] : self.tape_offsets[t + 1]])
            for t in range(self.machine.k)
        )
        return Config(state, tuple(reversed(heads)), cells)

    def __iter__(self):
        return (self.config(i) for i in range(self.size))

    def decode_all(self):
        """Vectorized decode: ``(states, heads[N, k], digits[N, cells])``."""
        idx = np.arange(self.size, dtype=np.int64)
        rest, content = np.divmod(idx, self.n_contents)
        states, h = np.divmod(rest, self.n_heads)
        heads = np.empty((self.size, self.machine.k), dtype=np.int64)
        for t in range(self.machine.k - 1, -1, -1):
            h, heads[:, t] = np.divmod(h, self.windows[t])
        digits = np.empty((self.size, len(self.cell_radices)), dtype=np.int64)
        for j in range(len(self.cell_radices) - 1, -1, -1):
            content, digits[:, j] = np.divmod(content, self.cell_radices[j])
        return states, heads, digits

    def to_dense(self, vec):
        out = np.zeros(self.size, dtype=complex)
        for c, a in vec.items():
            out[self.index(c)] += a
        return out

    def from_dense(self, arr, atol=0.0):
        return {self.config(int(i)): complex(arr[i]) for i in np.flatnonzero(np.abs(arr) > atol)}


def enumerate_configurations(m, windows=None, cap=DEFAULT_SPACE_CAP):
    return ConfigurationSpace(m, windows, cap)


# ------------------------------------------------------------ encoding


def input_extent(m, classical, index_size=0):
    """Number of leading cells of tape 0 touched by the input layout."""
    end = m.io.x_offset + len(classical)
    if index_size:
        end = max(end, m.io.index_start(len(classical)) + index_size)
    return end


def encode_input(m, classical, index=None, index_size=None, windows=None):
    """Sparse initial state ``{Config: amplitude}`` for input ``(x, index)``.

    ``index`` is a qustring (complex vector of length ``2**p``) placed on
    tape 0 starting at the layout's index offset, most significant qubit
    first. Cells between pieces are blank.
    """
    windows = _check_windows(m, windows)
    tape0 = m.tapes[0]
    for ch in classical:
        if ch not in tape0.sigma:
            raise MachineFormatError(f"input symbol {ch!r} not in input alphabet", "input")
    p = 0
    if index is not None:
        index = np.asarray(index, dtype=complex)
        p = int(round(math.log2(len(index)))) if len(index) else -1
        if p < 0 or 2**p != len(index):
            raise IndexSizeMismatchError("index length must be a power of two")
        if index_size is not None and p != index_size:
            raise IndexSizeMismatchError(f"index has {p} qubits, expected {index_size}")
        norm = np.linalg.norm(index)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"index must have unit norm, got {norm}")
        for bit in "01":
            if bit not in tape0.gamma:
                raise MachineFormatError(f"index symbol {bit!r} not in tape 0 alphabet", "input")
    elif index_size:
        raise IndexSizeMismatchError(f"expected an index of {index_size} qubits")
    extent = input_extent(m, classical, p)
    if extent + 1 > windows[0]:
        raise InputTooLongError(
            f"input needs {extent} cells plus a blank separator; window has {windows[0]}"
        )
    base = [[t.gamma.index(t.blank)] * w for t, w in zip(m.tapes, windows)]
    for j, ch in enumerate(classical):
        base[0][m.io.x_offset + j] = tape0.gamma.index(ch)
    q0 = m.state_index(m.initial)
    heads = (0,) * m.k
    if index is None:
        return {Config(q0, heads, tuple(tuple(t) for t in base)): 1.0 + 0j}
    start = m.io.index_start(len(classical))
    if start < m.io.x_offset + len(classical) and start + p > m.io.x_offset:
        raise ValueError("index cells overlap the classical input")
    out = {}
    for s in range(2**p):
        a = index[s]
        if a == 0:
            continue
        cells = [list(t) for t in base]
        bits = format(s, f"0{p}b") if p else ""
        for j, b in enumerate(bits):
            cells[0][start + j] = tape0.gamma.index(b)
        out[Config(q0, heads, tuple(tuple(t) for t in cells))] = complex(a)
    return out
