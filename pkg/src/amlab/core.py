"""Bitstrings, boolean circuits, witness checkers, and exact output distributions.

Circuits map n input bits to m output bits and come in two bodies: an
explicit gate list (acyclic, topologically ordered) or a full lookup
table with 2**n rows.  A witness checker is a single-output circuit over
statement bits followed by witness bits; a statement is accepted when
some witness makes it output 1.

Bit conventions: a bitstring is stored as (width, value) where the
written string reads most-significant bit first, so input position p of a
circuit is bit (width-1-p) of the value.  Lexicographic order on
equal-width strings therefore coincides with numeric order on values.

Probabilities are never floats here: the output distribution of a circuit
is a map from output value to an integer preimage count over 2**n.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

MAX_INPUT_BITS = 24
MAX_WITNESS_BITS = 16

_GATE_OPS = ("AND", "OR", "NOT", "XOR", "CONST", "INPUT")
_EVAL_CHUNK = 1 << 20


class CircuitError(ValueError):
    """Malformed circuit description or width violation."""


@dataclass(frozen=True, order=True)
class BitString:
    width: int
    value: int

    def __post_init__(self):
        if not 0 <= self.width <= MAX_INPUT_BITS + MAX_WITNESS_BITS:
            raise CircuitError(f"width {self.width} out of range")
        if self.value < 0 or self.value >> self.width:
            raise CircuitError("value has bits beyond the declared width")

    @staticmethod
    def from_str(text: str) -> "BitString":
        if text and set(text) - {"0", "1"}:
            raise CircuitError(f"not a bitstring: {text!r}")
        return BitString(len(text), int(text, 2) if text else 0)

    def __str__(self) -> str:
        return format(self.value, f"0{self.width}b") if self.width else ""

    def bit(self, pos: int) -> int:
        """Bit at string position pos (0 = most significant)."""
        if not 0 <= pos < self.width:
            raise CircuitError(f"bit position {pos} out of range")
        return (self.value >> (self.width - 1 - pos)) & 1

    def concat(self, other: "BitString") -> "BitString":
        return BitString(self.width + other.width, (self.value << other.width) | other.value)


@dataclass(frozen=True)
class Gate:
    op: str
    args: tuple[int, ...] = ()
    const: int = 0


_ARITY = {"AND": 2, "OR": 2, "XOR": 2, "NOT": 1, "CONST": 0, "INPUT": 1}


class Circuit:
    """A function {0,1}^n -> {0,1}^m given as gates or as a lookup table."""

    def __init__(self, n: int, m: int, *, gates: Optional[list[Gate]] = None,
                 outputs: Optional[list[int]] = None, table: Optional[list[int]] = None):
        if n < 0 or n > MAX_INPUT_BITS:
            raise CircuitError(f"input width {n} exceeds enumeration cap {MAX_INPUT_BITS}")
        if m < 1 or m > MAX_INPUT_BITS:
            raise CircuitError(f"output width {m} out of range")
        self.n, self.m = n, m
        self.gates = gates
        self.outputs = outputs
        self.table = None
        if table is not None:
            if gates is not None or outputs is not None:
                raise CircuitError("give either gates+outputs or a table, not both")
            if len(table) != 1 << n:
                raise CircuitError(f"table must have exactly {1 << n} rows")
            arr = np.asarray(table, dtype=np.int64)
            if arr.size and (arr.min() < 0 or int(arr.max()) >> m):
                raise CircuitError("table entry exceeds output width")
            self.table = arr
        else:
            if gates is None or outputs is None:
                raise CircuitError("gate circuits need both gates and outputs")
            self._validate_gates()

    def _validate_gates(self):
        for idx, g in enumerate(self.gates):
            if g.op not in _GATE_OPS:
                raise CircuitError(f"unknown gate op {g.op!r}")
            if len(g.args) != _ARITY[g.op]:
                raise CircuitError(f"gate {idx} ({g.op}) has wrong arity")
            if g.op == "INPUT":
                if not 0 <= g.args[0] < self.n:
                    raise CircuitError(f"gate {idx} reads undefined input {g.args[0]}")
            else:
                for a in g.args:
                    if not 0 <= a < idx:
                        raise CircuitError(f"gate {idx} references undefined wire {a}")
            if g.op == "CONST" and g.const not in (0, 1):
                raise CircuitError(f"gate {idx} has non-boolean constant")
        for w in self.outputs:
            if not 0 <= w < len(self.gates):
                raise CircuitError(f"output references undefined wire {w}")
        if len(self.outputs) != self.m:
            raise CircuitError("output count must equal the output width")

    # -- evaluation ----------------------------------------------------------

    def eval_value(self, x: int) -> int:
        """Evaluate on a raw input value (MSB-first convention)."""
        if x < 0 or x >> self.n:
            raise CircuitError("input value out of range")
        if self.table is not None:
            return int(self.table[x])
        wires: list[int] = []
        for g in self.gates:
            if g.op == "INPUT":
                v = (x >> (self.n - 1 - g.args[0])) & 1
            elif g.op == "CONST":
                v = g.const
            elif g.op == "NOT":
                v = 1 - wires[g.args[0]]
            elif g.op == "AND":
                v = wires[g.args[0]] & wires[g.args[1]]
            elif g.op == "OR":
                v = wires[g.args[0]] | wires[g.args[1]]
            else:  # XOR
                v = wires[g.args[0]] ^ wires[g.args[1]]
            wires.append(v)
        out = 0
        for w in self.outputs:
            out = (out << 1) | wires[w]
        return out

    def eval_all(self) -> np.ndarray:
        """Outputs on all 2**n inputs, as an int64 array indexed by input value."""
        if self.table is not None:
            return self.table
        size = 1 << self.n
        out = np.empty(size, dtype=np.int64)
        for start in range(0, size, _EVAL_CHUNK):
            stop = min(start + _EVAL_CHUNK, size)
            xs = np.arange(start, stop, dtype=np.int64)
            wires: list[np.ndarray] = []
            for g in self.gates:
                if g.op == "INPUT":
                    v = (xs >> (self.n - 1 - g.args[0])) & 1
                elif g.op == "CONST":
                    v = np.full(stop - start, g.const, dtype=np.int64)
                elif g.op == "NOT":
                    v = 1 - wires[g.args[0]]
                elif g.op == "AND":
                    v = wires[g.args[0]] & wires[g.args[1]]
                elif g.op == "OR":
                    v = wires[g.args[0]] | wires[g.args[1]]
                else:
                    v = wires[g.args[0]] ^ wires[g.args[1]]
                wires.append(v)
            acc = np.zeros(stop - start, dtype=np.int64)
            for w in self.outputs:
                acc = (acc << 1) | wires[w]
            out[start:stop] = acc
        return out

    def to_table(self) -> "Circuit":
        if self.table is not None:
            return self
        return Circuit(self.n, self.m, table=self.eval_all().tolist())

    # -- serialization --------------------------------------------------------

    def to_json_dict(self) -> dict:
        if self.table is not None:
            return {"n": self.n, "m": self.m, "kind": "table",
                    "table": [int(v) for v in self.table]}
        gates = []
        for g in self.gates:
            d = {"op": g.op, "args": list(g.args)}
            if g.op == "CONST":
                d["const"] = g.const
            gates.append(d)
        return {"n": self.n, "m": self.m, "kind": "gates",
                "gates": gates, "outputs": list(self.outputs)}

    @staticmethod
    def from_json_dict(d: dict) -> "Circuit":
        kind = d.get("kind")
        if kind == "table":
            return Circuit(d["n"], d["m"], table=d["table"])
        if kind == "gates":
            gates = [Gate(g["op"], tuple(g.get("args", ())), g.get("const", 0))
                     for g in d["gates"]]
            return Circuit(d["n"], d["m"], gates=gates, outputs=list(d["outputs"]))
        raise CircuitError(f"unknown circuit kind {kind!r}")


class NondetCircuit:
    """Witness checker V: {0,1}^m x {0,1}^l -> {0,1}.

    The body is a single-output circuit on m+l inputs; statement bits
    occupy positions 0..m-1 and witness bits positions m..m+l-1.
    """

    def __init__(self, m: int, l: int, body: Circuit):
        if l < 0 or l > MAX_WITNESS_BITS:
            raise CircuitError(f"witness width {l} exceeds cap {MAX_WITNESS_BITS}")
        if body.n != m + l or body.m != 1:
            raise CircuitError("checker body must map m+l bits to a single bit")
        self.m, self.l = m, l
        self.body = body

    def check(self, y: BitString, w: BitString) -> int:
        if y.width != self.m or w.width != self.l:
            raise CircuitError("statement or witness width mismatch")
        return self.body.eval_value((y.value << self.l) | w.value)

    def accept_table(self) -> np.ndarray:
        """Boolean array over all 2**m statements: accepted by some witness."""
        rows = self.body.eval_all().reshape(1 << self.m, 1 << self.l)
        return rows.any(axis=1)

    def to_json_dict(self) -> dict:
        d = self.body.to_json_dict()
        d["m"] = self.m
        d["l"] = self.l
        d["n"] = self.m + self.l
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "NondetCircuit":
        m, l = d["m"], d["l"]
        body = Circuit.from_json_dict({**d, "n": m + l, "m": 1})
        return NondetCircuit(m, l, body)


@dataclass(frozen=True)
class ExactDist:
    """Exact output distribution: value -> integer count over 2**n_bits.

    Zero-mass strings are omitted; counts always sum to 2**n_bits.
    """

    m: int
    n_bits: int
    mass: dict[int, int] = field(compare=False)

    def __post_init__(self):
        total = sum(self.mass.values())
        if total != 1 << self.n_bits:
            raise CircuitError("distribution counts must sum to 2**n_bits")
        if any(c < 1 for c in self.mass.values()):
            raise CircuitError("zero-mass entries must be omitted")

    def prob(self, y: int) -> Fraction:
        return Fraction(self.mass.get(y, 0), 1 << self.n_bits)

    def support(self):
        return self.mass.keys()

    def items(self):
        for y, c in self.mass.items():
            yield y, Fraction(c, 1 << self.n_bits)

    def to_json_dict(self) -> dict:
        return {"m": self.m, "n_bits": self.n_bits,
                "mass": {format(y, f"0{self.m}b"): c for y, c in sorted(self.mass.items())}}


def eval_circuit(c: Circuit, x: BitString) -> BitString:
    """Deterministic evaluation; table and gate bodies of one function agree."""
    if x.width != c.n:
        raise CircuitError(f"input width {x.width} != circuit width {c.n}")
    return BitString(c.m, c.eval_value(x.value))


def exact_dist(c: Circuit) -> ExactDist:
    """Output distribution by full enumeration of all 2**n inputs."""
    outs = c.eval_all()
    vals, counts = np.unique(outs, return_counts=True)
    mass = {int(y): int(cnt) for y, cnt in zip(vals, counts)}
    return ExactDist(c.m, c.n, mass)


def accepts(v: NondetCircuit, y: BitString) -> tuple[bool, Optional[BitString]]:
    """Brute-force witness search, returning the lexicographically smallest witness."""
    if y.width != v.m:
        raise CircuitError(f"statement width {y.width} != checker width {v.m}")
    base = y.value << v.l
    body = v.body
    if body.table is not None:
        row = body.table[base:base + (1 << v.l)]
        hits = np.flatnonzero(row)
        if hits.size:
            return True, BitString(v.l, int(hits[0]))
        return False, None
    for w in range(1 << v.l):
        if body.eval_value(base | w):
            return True, BitString(v.l, w)
    return False, None


def circuit_from_counts(m: int, counts: dict[int, int]) -> Circuit:
    """Table circuit whose output distribution has the given counts.

    Counts must sum to a power of two; the input width is its exponent.
    """
    total = sum(counts.values())
    if total <= 0 or total & (total - 1):
        raise CircuitError("counts must sum to a power of two")
    n = total.bit_length() - 1
    table: list[int] = []
    for y in sorted(counts):
        if counts[y] < 0 or (y >> m):
            raise CircuitError("bad count entry")
        table.extend([y] * counts[y])
    return Circuit(n, m, table=table)


def load_circuit(path: str) -> Circuit:
    with open(path) as f:
        return Circuit.from_json_dict(json.load(f))


def load_checker(path: str) -> NondetCircuit:
    with open(path) as f:
        return NondetCircuit.from_json_dict(json.load(f))
