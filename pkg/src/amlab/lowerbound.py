"""Parallel set-size lower bound protocol with pairwise-independent hashing.

The prover claims |C^{-1}(y_i)| >= s_i for a batch of strings y_i and the
verifier checks all claims in one constant-round exchange.  Small claims
(s_i up to 2**12) run in direct mode: the prover simply exhibits ceil(s_i)
distinct preimages, which makes desk-scale runs deterministic.  Larger
claims are filtered through a random affine hash over GF(2): the verifier
picks the hash range so the surviving preimage count concentrates near
T_i = s_i / 2**range_bits >= 32/eps**2, and accepts when the prover shows
at least (1 - eps/2) * T_i distinct surviving preimages.

Claim sizes may be exact power products c * 2**(p/q); every threshold
comparison is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .core import BitString, Circuit, CircuitError
from .exactnum import Pow2Sum, floor_log2, format_fraction, parse_fraction, pow2
from .session import (ProtocolDef, ProtocolReject, ProverStrategy, Session,
                      register_protocol)

DIRECT_MODE_MAX = 1 << 12
HASH_BUCKET_FLOOR = 32  # target T >= HASH_BUCKET_FLOOR / eps**2

ClaimSize = Union[Fraction, Pow2Sum]


@dataclass(frozen=True)
class AffineHash:
    """x -> Ax + b over GF(2); rows are n-bit masks, offset is the b vector."""

    n: int
    rows: tuple[int, ...]
    offset: int

    def __post_init__(self):
        if self.offset >> len(self.rows):
            raise ValueError("offset wider than the row count")

    @property
    def range_bits(self) -> int:
        return len(self.rows)

    def eval(self, x: int) -> int:
        out = 0
        for row in self.rows:
            out = (out << 1) | ((row & x).bit_count() & 1)
        return out ^ self.offset

    def eval_array(self, xs: np.ndarray) -> np.ndarray:
        out = np.zeros(len(xs), dtype=np.int64)
        for row in self.rows:
            out = (out << 1) | (np.bitwise_count(xs & row).astype(np.int64) & 1)
        return out ^ self.offset


def sample_affine_hash(n: int, range_bits: int, coins) -> AffineHash:
    rows = tuple(coins.draw_bits(n) for _ in range(range_bits))
    return AffineHash(n, rows, coins.draw_bits(range_bits))


def all_affine_hashes(n: int, range_bits: int):
    """Exhaustive family enumeration; only sensible for tiny n, range_bits."""
    for packed in range(1 << (n * range_bits)):
        rows = tuple((packed >> (n * i)) & ((1 << n) - 1) for i in range(range_bits))
        for offset in range(1 << range_bits):
            yield AffineHash(n, rows, offset)


def _size_to_json(s: ClaimSize):
    if isinstance(s, Fraction):
        return format_fraction(s)
    if s.is_rational():
        return format_fraction(s.as_fraction())
    if len(s.coeffs) != 1:
        raise ValueError("claim sizes must be single power products")
    (r, c), = s.coeffs.items()
    return {"coef": format_fraction(c), "expo": format_fraction(Fraction(r, s.b))}


def _size_from_json(obj) -> Pow2Sum:
    if isinstance(obj, str):
        return Pow2Sum.from_fraction(parse_fraction(obj))
    return pow2(parse_fraction(obj["expo"]), parse_fraction(obj["coef"]))


@dataclass(frozen=True)
class LBClaim:
    y: BitString
    size: Pow2Sum

    @staticmethod
    def make(y: BitString, size) -> "LBClaim":
        if isinstance(size, (int, Fraction)):
            size = Pow2Sum.from_fraction(Fraction(size))
        if size.sign() <= 0:
            raise ValueError("claimed size must be positive")
        return LBClaim(y, size)


@dataclass(frozen=True)
class LBInstance:
    circuit: Circuit
    eps: Fraction
    claims: tuple[LBClaim, ...]

    def __post_init__(self):
        if not (0 < self.eps < 1):
            raise ValueError("eps must lie in (0,1)")
        for c in self.claims:
            if c.y.width != self.circuit.m:
                raise ValueError("claim string width must match output width")

    def to_json_dict(self) -> dict:
        return {
            "circuit": self.circuit.to_json_dict(),
            "eps": format_fraction(self.eps),
            "claims": [{"y": str(c.y), "s": _size_to_json(c.size)} for c in self.claims],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "LBInstance":
        circuit = Circuit.from_json_dict(d["circuit"])
        claims = tuple(
            LBClaim(BitString.from_str(c["y"]), _size_from_json(c["s"]))
            for c in d["claims"]
        )
        return LBInstance(circuit, parse_fraction(d["eps"]), claims)


def plan_claim(claim: LBClaim, n: int, eps: Fraction, coins) -> dict:
    """Verifier-side plan for one claim: mode, hash (if any), required count."""
    size = claim.size
    if size.cmp(Fraction(1 << n)) > 0:
        return {"y": str(claim.y), "mode": "impossible"}
    if size.cmp(DIRECT_MODE_MAX) <= 0:
        return {"y": str(claim.y), "mode": "direct", "need": size.ceil()}
    range_bits = max(0, floor_log2(size * (eps * eps / HASH_BUCKET_FLOOR)))
    h = sample_affine_hash(n, range_bits, coins)
    bucket = size * Fraction(1, 1 << range_bits)
    need = (bucket * (1 - eps / 2)).ceil()
    return {
        "y": str(claim.y),
        "mode": "hash",
        "rows": list(h.rows),
        "offset": h.offset,
        "need": need,
    }


def _check_claim(circuit: Circuit, plan: dict, elements: list) -> tuple[bool, str]:
    if plan["mode"] == "impossible":
        return False, "claim exceeds the domain size"
    if not isinstance(elements, list):
        return False, "malformed element list"
    need = plan["need"]
    if len(elements) < need:
        return False, f"sent {len(elements)} elements, need {need}"
    y = BitString.from_str(plan["y"])
    seen = set()
    if plan["mode"] == "hash":
        h = AffineHash(circuit.n, tuple(plan["rows"]), plan["offset"])
    for x in elements:
        if not isinstance(x, int) or x < 0 or x >> circuit.n:
            return False, "element out of range"
        if x in seen:
            return False, "duplicate element"
        seen.add(x)
        if circuit.eval_value(x) != y.value:
            return False, "element is not a preimage"
        if plan["mode"] == "hash" and h.eval(x) != 0:
            return False, "element not in the hash kernel"
    return True, "ok"


def run_lowerbound_runner(inst: LBInstance, session: Session) -> tuple[bool, dict]:
    plans = [plan_claim(c, inst.circuit.n, inst.eps, session.coins) for c in inst.claims]
    session.verifier_message({"type": "lb_setup", "claims": plans})
    reply = session.prover_message(inst)
    if reply.get("type") != "lb_elements" or not isinstance(reply.get("elements"), list):
        raise ProtocolReject("malformed: expected lb_elements")
    elements = reply["elements"]
    if len(elements) != len(plans):
        raise ProtocolReject("malformed: element list count mismatch")
    outcomes = []
    ok_all = True
    for plan, elems in zip(plans, elements):
        ok, why = _check_claim(inst.circuit, plan, elems)
        outcomes.append({"y": plan["y"], "mode": plan["mode"], "ok": ok, "why": why})
        ok_all = ok_all and ok
    return ok_all, {"claims": outcomes}


def preimage_map(circuit: Circuit) -> dict[int, np.ndarray]:
    """y -> sorted array of all preimages, by full enumeration."""
    outs = circuit.eval_all()
    order = np.argsort(outs, kind="stable")
    sorted_outs = outs[order]
    uniq, starts = np.unique(sorted_outs, return_index=True)
    ends = np.append(starts[1:], len(sorted_outs))
    return {int(y): np.sort(order[a:b]) for y, a, b in zip(uniq, starts, ends)}


def lb_response(circuit: Circuit, setup: dict, pre: dict[int, np.ndarray]) -> dict:
    """The honest reply to an lb_setup message: required preimage prefixes."""
    out = []
    for plan in setup["claims"]:
        if plan["mode"] == "impossible":
            out.append([])
            continue
        y = BitString.from_str(plan["y"]).value
        xs = pre.get(y, np.empty(0, dtype=np.int64))
        if plan["mode"] == "hash":
            h = AffineHash(circuit.n, tuple(plan["rows"]), plan["offset"])
            xs = xs[h.eval_array(xs) == 0] if len(xs) else xs
        out.append([int(v) for v in xs[: plan["need"]]])
    return {"type": "lb_elements", "elements": out}


class HonestLBProver(ProverStrategy):
    """Enumerates preimages by brute force and sends exactly what is asked."""

    name = "honest-lb"

    def __init__(self):
        self._pre: Optional[dict[int, np.ndarray]] = None

    def respond(self, instance, rounds):
        setup = rounds[-1].payload
        assert setup["type"] == "lb_setup"
        if self._pre is None:
            self._pre = preimage_map(instance.circuit)
        return lb_response(instance.circuit, setup, self._pre)


def honest_lb_prover(inst: Optional[LBInstance] = None) -> HonestLBProver:
    return HonestLBProver()


def true_preimage_counts(circuit: Circuit) -> dict[int, int]:
    outs = circuit.eval_all()
    vals, counts = np.unique(outs, return_counts=True)
    return {int(y): int(c) for y, c in zip(vals, counts)}


register_protocol(ProtocolDef(
    name="lowerbound",
    run=run_lowerbound_runner,
    instance_to_json=LBInstance.to_json_dict,
    instance_from_json=LBInstance.from_json_dict,
))
