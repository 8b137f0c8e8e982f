"""Deciding whether a claimed histogram matches a circuit's output distribution.

Two modes answer the same question about (circuit C, eps, claimed h):

* oracle mode computes the true histogram by enumeration and decides the
  promise exactly: accept iff h is the true histogram, reject iff their
  distance exceeds 20/t, accept in the gap (anything is allowed there, and
  accepting keeps downstream completeness tests deterministic);

* protocol mode is interactive.  A preimage test samples outputs y = C(r),
  asks the prover for their bucket labels, certifies each label's implied
  preimage count with the parallel lower bound protocol (so probabilities
  cannot be overstated), and compares the label-induced empirical histogram
  with h.  An image test then asks the prover to exhibit, for every prefix
  of buckets, as many distinct strings as the claimed histogram implies the
  prefix contains, certifying each exhibited string's bucket membership with
  a nested preimage-count bound (so probabilities cannot be understated
  either: understating inflates the implied set sizes past the truth).

Protocol mode is a reconstruction; its sample count and tolerance are
configurable and validated empirically rather than carrying any pedigree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import BitString, Circuit, exact_dist
from .exactnum import Pow2Sum, format_fraction, parse_fraction, pow2
from .histogram import BucketParams, Histogram, bucket_index, compute_histogram, wasserstein
from .lowerbound import LBClaim, lb_response, plan_claim, preimage_map, _check_claim
from .session import (ProtocolDef, ProtocolReject, ProverStrategy, Session,
                      register_protocol)

ORACLE_DISTANCE_FACTOR = 20  # no-instances sit at distance > 20/t


@dataclass(frozen=True)
class VHMode:
    kind: str  # "oracle" or "protocol"
    preimage_samples: Optional[int] = None  # default 400 * t**2
    preimage_tol: Optional[Fraction] = None  # default 10/t

    def __post_init__(self):
        if self.kind not in ("oracle", "protocol"):
            raise ValueError("mode must be oracle or protocol")
        if self.preimage_samples is not None and self.preimage_samples < 1:
            raise ValueError("sample count must be positive")

    def samples(self, t: int) -> int:
        return self.preimage_samples if self.preimage_samples is not None else 400 * t * t

    def tolerance(self, t: int) -> Fraction:
        return self.preimage_tol if self.preimage_tol is not None else Fraction(10, t)


@dataclass(frozen=True)
class VHInstance:
    circuit: Circuit
    eps: Fraction
    claimed: Histogram
    mode: VHMode = VHMode("oracle")

    def __post_init__(self):
        want = BucketParams.for_width(self.circuit.n, self.eps)
        if self.claimed.params != want:
            raise ValueError("claimed histogram must use t = ceil(n/eps) buckets")

    @property
    def t(self) -> int:
        return self.claimed.params.t

    def to_json_dict(self) -> dict:
        d = {
            "circuit": self.circuit.to_json_dict(),
            "eps": format_fraction(self.eps),
            "claimed": self.claimed.to_json_dict(),
            "mode": self.mode.kind,
        }
        if self.mode.preimage_samples is not None:
            d["preimage_samples"] = self.mode.preimage_samples
        if self.mode.preimage_tol is not None:
            d["preimage_tol"] = format_fraction(self.mode.preimage_tol)
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "VHInstance":
        tol = d.get("preimage_tol")
        mode = VHMode(d.get("mode", "oracle"), d.get("preimage_samples"),
                      parse_fraction(tol) if tol is not None else None)
        return VHInstance(Circuit.from_json_dict(d["circuit"]), parse_fraction(d["eps"]),
                          Histogram.from_json_dict(d["claimed"]), mode)


def decide_oracle(inst: VHInstance) -> tuple[str, dict]:
    """Exact promise decision: 'yes', 'no', or 'outside', plus the distance."""
    truth = compute_histogram(exact_dist(inst.circuit), inst.claimed.params)
    if truth.entries == inst.claimed.entries and truth.excluded_mass == inst.claimed.excluded_mass:
        return "yes", {"wd": "0"}
    if not inst.claimed.is_distribution():
        # can never equal the true histogram, which is a distribution vector
        return "no", {"wd": None, "reason": "claimed mass is not 1"}
    _, _, wd = wasserstein(truth.entries, inst.claimed.entries)
    verdict = "no" if wd * inst.t > ORACLE_DISTANCE_FACTOR else "outside"
    return verdict, {"wd": format_fraction(wd)}


def membership_floor(n: int, i: int, eps: Fraction) -> int:
    """Minimal preimage count proving bucket index <= i, i.e. P > 2**-(i+1)eps."""
    bound = pow2(-(i + 1) * eps, Fraction(1 << n))
    return bound.floor() + 1


def prefix_size_bound(h: Histogram, i: int) -> Pow2Sum:
    """Lower bound the claimed histogram puts on |buckets 0..i| as a set."""
    eps = h.params.eps
    acc = Pow2Sum.zero()
    for j in range(i + 1):
        if h.entries[j]:
            acc = acc + pow2(j * eps, h.entries[j])
    return acc


def _oracle_runner(inst: VHInstance, session: Session) -> tuple[bool, dict]:
    verdict, detail = decide_oracle(inst)
    detail["oracle"] = verdict
    return verdict != "no", detail


def _protocol_runner(inst: VHInstance, session: Session) -> tuple[bool, dict]:
    n, t, eps = inst.circuit.n, inst.t, inst.eps
    k = inst.mode.samples(t)
    tol = inst.mode.tolerance(t)
    if not inst.claimed.is_distribution():
        return False, {"phase": "setup", "reason": "claimed mass is not 1"}

    # --- preimage test ---------------------------------------------------
    rs = session.coins.draw_array(k, n)
    outs = inst.circuit.eval_all()
    ys = outs[rs]
    session.verifier_message({"type": "vh_queries", "ys": [int(y) for y in ys]})
    reply = session.prover_message(inst)
    if reply.get("type") != "vh_labels":
        raise ProtocolReject("malformed: expected vh_labels")
    labels = reply.get("labels")
    if not isinstance(labels, list) or len(labels) != k:
        raise ProtocolReject("malformed: label list shape")
    for lab in labels:
        if lab is None:
            # the verifier sampled y = C(r) itself, so a zero-probability
            # claim is refuted by its own coins
            return False, {"phase": "preimage", "reason": "zero claim on a sampled output"}
        if not isinstance(lab, int) or not 0 <= lab <= t:
            raise ProtocolReject("malformed: label out of range")

    claim_sizes = {}
    for y, lab in zip(ys, labels):
        claim_sizes[(int(y), lab)] = pow2(-(lab + 1) * eps, Fraction(1 << n))
    lb_claims = [LBClaim.make(BitString(inst.circuit.m, y), s)
                 for (y, lab), s in sorted(claim_sizes.items())]
    plans = [plan_claim(c, n, eps, session.coins) for c in lb_claims]
    session.verifier_message({"type": "lb_setup", "claims": plans})
    lb_reply = session.prover_message(inst)
    if lb_reply.get("type") != "lb_elements" or len(lb_reply.get("elements", [])) != len(plans):
        raise ProtocolReject("malformed: expected lb_elements for the preimage test")
    for plan, elems in zip(plans, lb_reply["elements"]):
        ok, why = _check_claim(inst.circuit, plan, elems)
        if not ok:
            return False, {"phase": "preimage", "reason": why, "y": plan["y"]}

    counts = np.bincount(np.asarray(labels, dtype=np.int64), minlength=t + 1)
    empirical = tuple(Fraction(int(c), k) for c in counts)
    _, _, wd = wasserstein(inst.claimed.entries, empirical)
    if wd > tol:
        return False, {"phase": "preimage", "reason": "empirical histogram too far",
                       "wd": format_fraction(wd)}

    # --- image test -------------------------------------------------------
    requirements = []
    acc = Pow2Sum.zero()
    for i in range(t + 1):
        if inst.claimed.entries[i]:
            acc = acc + pow2(i * eps, inst.claimed.entries[i])
        needed = acc.ceil() if not acc.is_zero() else 0
        if needed >= 1:
            requirements.append({"i": i, "count": needed,
                                 "member_size": membership_floor(n, i, eps)})
    session.verifier_message({"type": "vh_image_req", "requirements": requirements})
    img = session.prover_message(inst)
    if img.get("type") != "vh_image_members":
        raise ProtocolReject("malformed: expected vh_image_members")
    members = img.get("members")
    if not isinstance(members, list) or len(members) != len(requirements):
        raise ProtocolReject("malformed: member list shape")

    mem_claims = {}
    for req, ms in zip(requirements, members):
        if not isinstance(ms, list) or len(ms) < req["count"]:
            return False, {"phase": "image", "reason": "too few members", "i": req["i"]}
        seen = set()
        for y in ms:
            if not isinstance(y, int) or y < 0 or y >> inst.circuit.m:
                return False, {"phase": "image", "reason": "member out of range", "i": req["i"]}
            if y in seen:
                return False, {"phase": "image", "reason": "duplicate member", "i": req["i"]}
            seen.add(y)
            key = (y, req["member_size"])
            mem_claims[key] = Fraction(req["member_size"])
    lb_claims2 = [LBClaim.make(BitString(inst.circuit.m, y), s)
                  for (y, _), s in sorted(mem_claims.items())]
    plans2 = [plan_claim(c, n, eps, session.coins) for c in lb_claims2]
    session.verifier_message({"type": "lb_setup", "claims": plans2})
    lb_reply2 = session.prover_message(inst)
    if lb_reply2.get("type") != "lb_elements" or len(lb_reply2.get("elements", [])) != len(plans2):
        raise ProtocolReject("malformed: expected lb_elements for the image test")
    for plan, elems in zip(plans2, lb_reply2["elements"]):
        ok, why = _check_claim(inst.circuit, plan, elems)
        if not ok:
            return False, {"phase": "image", "reason": why, "y": plan["y"]}
    return True, {"phase": "done", "wd": format_fraction(wd)}


def _runner(inst: VHInstance, session: Session) -> tuple[bool, dict]:
    if inst.mode.kind == "oracle":
        return _oracle_runner(inst, session)
    return _protocol_runner(inst, session)


class HonestVHProver(ProverStrategy):
    """Answers every query with the true bucket label and true set members."""

    name = "honest-vh"

    def __init__(self):
        self._dist = None
        self._labels = None
        self._pre = None
        self._by_count = None

    def _prepare(self, inst: VHInstance):
        if self._dist is not None:
            return
        self._dist = exact_dist(inst.circuit)
        params = inst.claimed.params
        self._labels = {y: bucket_index(p, params) for y, p in self._dist.items()}
        self._pre = preimage_map(inst.circuit)
        # support sorted by decreasing preimage count, then value, for image picks
        self._by_count = sorted(self._dist.mass.items(), key=lambda kv: (-kv[1], kv[0]))

    def respond(self, inst: VHInstance, rounds):
        self._prepare(inst)
        last = rounds[-1].payload
        kind = last.get("type")
        if kind == "vh_queries":
            return {"type": "vh_labels",
                    "labels": [self._labels[y] for y in last["ys"]]}
        if kind == "lb_setup":
            return lb_response(inst.circuit, last, self._pre)
        if kind == "vh_image_req":
            members = []
            for req in last["requirements"]:
                floor_count = req["member_size"]
                eligible = [y for y, c in self._by_count if c >= floor_count]
                members.append(sorted(eligible)[: req["count"]])
            return {"type": "vh_image_members", "members": members}
        raise AssertionError(f"unexpected round {kind!r}")


def honest_vh_prover(inst: Optional[VHInstance] = None) -> HonestVHProver:
    return HonestVHProver()


register_protocol(ProtocolDef(
    name="verifyhist",
    run=_runner,
    instance_to_json=VHInstance.to_json_dict,
    instance_from_json=VHInstance.from_json_dict,
))
