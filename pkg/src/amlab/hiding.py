"""Estimating the light-and-yes probability from uniform samples only.

The verifier draws k uniform strings and sends them over.  The prover
labels each with the bucket index of its output probability (or marks it
as having none), points out which samples the witness checker accepts,
and supplies witnesses.  The verifier recomputes everything checkable:
the yes rate must match the advice, witnesses must verify, and the
label-implied probabilities must reproduce the claimed heavy/light
structure.  Finally every finite label is certified from below by the
parallel lower bound protocol, so labels cannot overstate probabilities,
and the mass accounting in the checks stops labels from understating
them in bulk.  The scaled sum of label probabilities over light yes
samples is the protocol's estimate of the light-and-yes probability.

All windows are half-widths of c*sqrt(eps) shape and are decided exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import mpmath
import numpy as np

from .core import BitString, Circuit, NondetCircuit, exact_dist
from .exactnum import (Pow2Sum, cmp_scaled_pow2, format_fraction, parse_fraction,
                       pow2, sign_plus_root)
from .histogram import BucketParams, bucket_index
from .lowerbound import LBClaim, lb_response, plan_claim, preimage_map, _check_claim
from .session import (ProtocolDef, ProtocolReject, ProverStrategy, Session,
                      register_protocol)

SAMPLE_BUDGET = 10 ** 7


def _mpf_to_fraction(x) -> Fraction:
    sign, man, exp, _ = x._mpf_
    fr = Fraction(man) * (Fraction(2) ** exp)
    return -fr if sign else fr


def sample_count(eps: Fraction, alpha: Fraction) -> int:
    """ceil(ln(2/eps) * alpha^2 * 9 / (2 eps^2)), with correctly rounded ln."""
    eps, alpha = Fraction(eps), Fraction(alpha)
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0,1)")
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    mult = alpha * alpha * Fraction(9) / (2 * eps * eps)
    arg = 2 / eps
    with mpmath.workprec(80):
        pass  # ensure mpmath is importable before the interval loop
    for prec in (80, 160, 320, 640):
        old = mpmath.iv.prec
        mpmath.iv.prec = prec
        try:
            val = mpmath.iv.log(mpmath.iv.mpf(arg.numerator) / mpmath.iv.mpf(arg.denominator))
            lo = _mpf_to_fraction(val.a) * mult
            hi = _mpf_to_fraction(val.b) * mult
        finally:
            mpmath.iv.prec = old
        clo = -((-lo.numerator) // lo.denominator)
        chi = -((-hi.numerator) // hi.denominator)
        if clo == chi:
            if clo > SAMPLE_BUDGET:
                raise ValueError(f"sample count {clo} exceeds the desk-scale budget")
            return clo
    raise ArithmeticError("log enclosure did not settle the ceiling")


@dataclass(frozen=True)
class HideInstance:
    circuit: Circuit
    checker: NondetCircuit
    claimed_heavy: Fraction
    claimed_uniform_heavy: Fraction
    claimed_light_yes: Fraction
    eps: Fraction
    alpha: Fraction
    advice_uniform_yes: Fraction

    def __post_init__(self):
        if self.checker.m != self.circuit.m:
            raise ValueError("checker statement width must match circuit output width")
        if not (0 < self.eps < 1):
            raise ValueError("eps must lie in (0,1)")
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")

    @property
    def k(self) -> int:
        return sample_count(self.eps, self.alpha)

    @property
    def bucket_params(self) -> BucketParams:
        return BucketParams.for_width(self.circuit.n, self.eps)

    def to_json_dict(self) -> dict:
        return {
            "circuit": self.circuit.to_json_dict(),
            "checker": self.checker.to_json_dict(),
            "pH": format_fraction(self.claimed_heavy),
            "pUH": format_fraction(self.claimed_uniform_heavy),
            "pYL": format_fraction(self.claimed_light_yes),
            "eps": format_fraction(self.eps),
            "alpha": format_fraction(self.alpha),
            "advice_uniform_yes": format_fraction(self.advice_uniform_yes),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "HideInstance":
        return HideInstance(
            Circuit.from_json_dict(d["circuit"]),
            NondetCircuit.from_json_dict(d["checker"]),
            parse_fraction(d["pH"]), parse_fraction(d["pUH"]), parse_fraction(d["pYL"]),
            parse_fraction(d["eps"]), parse_fraction(d["alpha"]),
            parse_fraction(d["advice_uniform_yes"]),
        )


def is_light_label(label: Optional[int], eps: Fraction, alpha: Fraction, m: int) -> bool:
    """Label-implied lightness: 2**-((u+1) eps) < alpha * 2**-m; no-bucket labels are light."""
    if label is None:
        return True
    return cmp_scaled_pow2(Fraction(1), -(label + 1) * eps, alpha, Fraction(-m)) < 0


def label_term(label: Optional[int], eps: Fraction, m: int) -> Pow2Sum:
    """The probability-mass term 2**m * 2**(-u eps); zero for no-bucket labels."""
    if label is None:
        return Pow2Sum.zero()
    return pow2(m - label * eps)


@dataclass
class HideChecks:
    """Outcome of the five message checks, with the values they examined."""

    failed: Optional[str]
    yes_rate: Fraction
    heavy_rate: Fraction
    light_sum: Pow2Sum
    light_yes_sum: Pow2Sum

    def detail(self) -> dict:
        return {
            "failed": self.failed,
            "yes_rate": format_fraction(self.yes_rate),
            "heavy_rate": format_fraction(self.heavy_rate),
            "light_sum": f"{float(self.light_sum):.9e}",
            "estimate": f"{float(self.light_yes_sum):.9e}",
        }


def verifier_checks(inst: HideInstance, ys: list[int], labels: list[Optional[int]],
                    yes_set: set[int], witnesses: dict[int, int]) -> HideChecks:
    """Evaluate checks (a)-(e) exactly; returns the first failure if any.

    (a) yes rate within eps of the advice; (b) every claimed yes sample
    carries a verifying witness; (c) heavy rate within 3*sqrt(eps) of the
    uniform-heavy claim; (d) light label mass within 5*sqrt(eps) of one
    minus the heavy claim; (e) light yes label mass within 5*sqrt(eps) of
    the light-and-yes claim.
    """
    eps, alpha, m = inst.eps, inst.alpha, inst.circuit.m
    k = len(ys)
    light = [is_light_label(u, eps, alpha, m) for u in labels]
    n_heavy = sum(1 for b in light if not b)
    # group the sums by label so each distinct label contributes one term
    light_counts: dict[Optional[int], int] = {}
    light_yes_counts: dict[Optional[int], int] = {}
    for i, (u, is_l) in enumerate(zip(labels, light)):
        if is_l:
            light_counts[u] = light_counts.get(u, 0) + 1
            if i in yes_set:
                light_yes_counts[u] = light_yes_counts.get(u, 0) + 1
    light_sum = Pow2Sum.zero()
    for u, cnt in light_counts.items():
        light_sum = light_sum + label_term(u, eps, m) * Fraction(cnt, k)
    light_yes_sum = Pow2Sum.zero()
    for u, cnt in light_yes_counts.items():
        light_yes_sum = light_yes_sum + label_term(u, eps, m) * Fraction(cnt, k)

    yes_rate = Fraction(len(yes_set), k)
    heavy_rate = Fraction(n_heavy, k)
    checks = HideChecks(None, yes_rate, heavy_rate, light_sum, light_yes_sum)

    if not abs(yes_rate - inst.advice_uniform_yes) <= eps:
        checks.failed = "a"
        return checks
    for i in yes_set:
        w = witnesses.get(i)
        if w is None or not 0 <= w < (1 << inst.checker.l):
            checks.failed = "b"
            return checks
        if inst.checker.check(BitString(m, ys[i]), BitString(inst.checker.l, w)) != 1:
            checks.failed = "b"
            return checks
    dev_c = heavy_rate - inst.claimed_uniform_heavy
    if not (sign_plus_root(dev_c, Fraction(-3), eps) <= 0
            and sign_plus_root(dev_c, Fraction(3), eps) >= 0):
        checks.failed = "c"
        return checks
    dev_d = light_sum - (1 - inst.claimed_heavy)
    if not (sign_plus_root(dev_d, Fraction(-5), eps) <= 0
            and sign_plus_root(dev_d, Fraction(5), eps) >= 0):
        checks.failed = "d"
        return checks
    dev_e = light_yes_sum - inst.claimed_light_yes
    if not (sign_plus_root(dev_e, Fraction(-5), eps) <= 0
            and sign_plus_root(dev_e, Fraction(5), eps) >= 0):
        checks.failed = "e"
        return checks
    return checks


def _runner(inst: HideInstance, session: Session) -> tuple[bool, dict]:
    k, m, n = inst.k, inst.circuit.m, inst.circuit.n
    ys = [int(v) for v in session.coins.draw_array(k, m)]
    session.verifier_message({"type": "hide_samples", "ys": ys})
    reply = session.prover_message(inst)
    if reply.get("type") != "hide_response":
        raise ProtocolReject("malformed: expected hide_response")
    labels = reply.get("labels")
    yes_list = reply.get("yes")
    wit_raw = reply.get("witnesses")
    if (not isinstance(labels, list) or len(labels) != k
            or not isinstance(yes_list, list) or not isinstance(wit_raw, dict)):
        raise ProtocolReject("malformed: hide_response shape")
    t_cap = inst.bucket_params.t
    for u in labels:
        if u is not None and (not isinstance(u, int) or not 0 <= u <= t_cap):
            raise ProtocolReject("malformed: label out of range")
    yes_set = set()
    for i in yes_list:
        if not isinstance(i, int) or not 0 <= i < k or i in yes_set:
            raise ProtocolReject("malformed: yes index list")
        yes_set.add(i)
    witnesses = {}
    for key, w in wit_raw.items():
        idx = int(key)
        if not isinstance(w, int):
            raise ProtocolReject("malformed: witness value")
        witnesses[idx] = w

    checks = verifier_checks(inst, ys, labels, yes_set, witnesses)
    detail = checks.detail()
    if checks.failed is not None:
        return False, detail

    # lower-bound phase over the finite labels, claims deduplicated
    claim_sizes = {}
    for y, u in zip(ys, labels):
        if u is not None:
            claim_sizes[(y, u)] = pow2(m - (u + 1) * inst.eps)
    lb_claims = [LBClaim.make(BitString(m, y), s) for (y, u), s in sorted(claim_sizes.items())]
    plans = [plan_claim(c, n, inst.eps / 2, session.coins) for c in lb_claims]
    session.verifier_message({"type": "lb_setup", "claims": plans})
    lb_reply = session.prover_message(inst)
    if lb_reply.get("type") != "lb_elements" or len(lb_reply.get("elements", [])) != len(plans):
        raise ProtocolReject("malformed: expected lb_elements")
    lb_outcomes = []
    ok_all = True
    for plan, elems in zip(plans, lb_reply["elements"]):
        ok, why = _check_claim(inst.circuit, plan, elems)
        lb_outcomes.append({"y": plan["y"], "ok": ok, "why": why})
        ok_all = ok_all and ok
    detail["lb_failures"] = [o for o in lb_outcomes if not o["ok"]][:16]
    detail["failed"] = None if ok_all else "lb"
    return ok_all, detail


class HonestHidingProver(ProverStrategy):
    """True labels, true yes set with smallest witnesses, honest count proofs."""

    name = "honest-hiding"

    def __init__(self):
        self._ready = False
        self._labels = None  # per output value: bucket index or None
        self._accept = None  # per output value: smallest witness or -1
        self._pre = None

    def _prepare(self, inst: HideInstance):
        if self._ready:
            return
        dist = exact_dist(inst.circuit)
        params = inst.bucket_params
        m = inst.circuit.m
        self._labels = [None] * (1 << m)
        for y, p in dist.items():
            self._labels[y] = bucket_index(p, params)
        rows = inst.checker.body.eval_all().reshape(1 << m, 1 << inst.checker.l)
        any_hit = rows.any(axis=1)
        first = rows.argmax(axis=1)
        self._accept = np.where(any_hit, first, -1)
        self._pre = preimage_map(inst.circuit)
        self._ready = True

    def respond(self, inst: HideInstance, rounds):
        self._prepare(inst)
        last = rounds[-1].payload
        if last.get("type") == "hide_samples":
            ys = last["ys"]
            labels = [self._labels[y] for y in ys]
            yes = [i for i, y in enumerate(ys) if self._accept[y] >= 0]
            witnesses = {str(i): int(self._accept[ys[i]]) for i in yes}
            return {"type": "hide_response", "labels": labels,
                    "yes": yes, "witnesses": witnesses}
        if last.get("type") == "lb_setup":
            return lb_response(inst.circuit, last, self._pre)
        raise AssertionError(f"unexpected round {last.get('type')!r}")


def honest_hiding_prover(inst: Optional[HideInstance] = None) -> HonestHidingProver:
    return HonestHidingProver()


register_protocol(ProtocolDef(
    name="hide",
    run=_runner,
    instance_to_json=HideInstance.to_json_dict,
    instance_from_json=HideInstance.from_json_dict,
))
