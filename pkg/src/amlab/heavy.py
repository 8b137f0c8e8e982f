"""Estimating heavy-mass probabilities by reading a verified histogram.

Given a threshold alpha, the protocol checks two claimed numbers against
the circuit's output distribution: the probability that a distribution
sample is heavy, and the probability that a uniform sample is heavy.  The
prover sends a finely bucketed histogram (bucket width eps_fine =
(4/100)^2 * eps^2), the histogram is verified, and the verifier then
reads both probabilities off it below the last all-heavy bucket index.
The three acceptance checks bound the band mass around that index, the
prefix mass against the first claim, and the bucket-size-weighted prefix
against the second claim; every bound is decided exactly.

The threshold is sampled outside the protocol: the guarantees hold for
most alpha from the calibrated grid, never for all, and keeping alpha an
input makes that quantifier explicit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import log2
from typing import Optional

from .core import Circuit, exact_dist
from .exactnum import (Pow2Sum, ceil_sqrt_fraction, cmp_scaled_pow2, format_fraction,
                       parse_fraction, pow2, sign_plus_root)
from .histogram import BucketParams, Histogram, compute_histogram
from .session import (ProtocolDef, ProtocolReject, ProverStrategy, Session,
                      register_protocol)
from .verifyhist import (HonestVHProver, VHInstance, VHMode, _oracle_runner,
                         _protocol_runner)

FINE_EPS_NUM = Fraction(4, 100) ** 2  # bucket width multiplier: eps_fine = (4/100)^2 eps^2


def fine_eps(eps: Fraction) -> Fraction:
    """The refined bucket width used by the histogram the prover must send."""
    eps = Fraction(eps)
    if not (0 < eps < 1):
        raise ValueError("eps must lie in (0,1)")
    return FINE_EPS_NUM * eps * eps


def last_heavy_bucket(eps_fine: Fraction, alpha: Fraction, m: int) -> int:
    """Largest index j with 2**-((j+1) eps_fine) > alpha * 2**-m, exactly.

    Buckets up to this index contain only heavy strings.  Raises when no
    index qualifies (the threshold is too close to 1).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")

    def entirely_heavy(j: int) -> bool:
        return cmp_scaled_pow2(Fraction(1), -(j + 1) * eps_fine, alpha, Fraction(-m)) > 0

    cut = float(alpha) * 2.0 ** -m
    if cut >= 1:
        raise ValueError("threshold at or above 1: no bucket is entirely heavy")
    j = max(0, int(-log2(cut) / float(eps_fine)) - 2)
    if not entirely_heavy(j):
        while j >= 0 and not entirely_heavy(j):
            j -= 1
        if j < 0:
            raise ValueError("threshold too close to 1: no bucket is entirely heavy")
        return j
    while entirely_heavy(j + 1):
        j += 1
    return j


def band_radius(eps_fine: Fraction) -> int:
    """ceil(25 / sqrt(eps_fine)), the half-width of the guarded index band."""
    return ceil_sqrt_fraction(Fraction(625) / eps_fine)


@dataclass(frozen=True)
class HeavyInstance:
    circuit: Circuit
    claimed_heavy: Fraction
    claimed_uniform_heavy: Fraction
    eps: Fraction
    alpha: Fraction
    vh_mode: VHMode = VHMode("oracle")

    def __post_init__(self):
        if not (0 < self.eps < 1):
            raise ValueError("eps must lie in (0,1)")
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")

    @property
    def eps_fine(self) -> Fraction:
        return fine_eps(self.eps)

    @property
    def bucket_params(self) -> BucketParams:
        return BucketParams.for_width(self.circuit.n, self.eps_fine)

    def to_json_dict(self) -> dict:
        d = {
            "circuit": self.circuit.to_json_dict(),
            "pH": format_fraction(self.claimed_heavy),
            "pUH": format_fraction(self.claimed_uniform_heavy),
            "eps": format_fraction(self.eps),
            "alpha": format_fraction(self.alpha),
            "vh_mode": self.vh_mode.kind,
        }
        if self.vh_mode.preimage_samples is not None:
            d["vh_samples"] = self.vh_mode.preimage_samples
        if self.vh_mode.preimage_tol is not None:
            d["vh_tol"] = format_fraction(self.vh_mode.preimage_tol)
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "HeavyInstance":
        tol = d.get("vh_tol")
        mode = VHMode(d.get("vh_mode", "oracle"), d.get("vh_samples"),
                      parse_fraction(tol) if tol is not None else None)
        return HeavyInstance(Circuit.from_json_dict(d["circuit"]),
                             parse_fraction(d["pH"]), parse_fraction(d["pUH"]),
                             parse_fraction(d["eps"]), parse_fraction(d["alpha"]), mode)


def verifier_checks(h: Histogram, jstar: int, claimed_heavy: Fraction,
                    claimed_uniform_heavy: Fraction, eps_fine: Fraction,
                    m: int) -> tuple[Optional[str], dict]:
    """The three acceptance checks; returns (failed_check_or_None, details).

    (a) the mass within band_radius buckets of jstar is at most eps_fine^(1/4);
    (b) the prefix mass up to jstar matches the first claim within eps_fine^(1/4);
    (c) the size-weighted prefix, scaled by 2**-m, matches the second claim
        within 4 * eps_fine^(1/4).
    Indices outside [0, t] contribute nothing.
    """
    t = h.params.t
    radius = band_radius(eps_fine)
    lo, hi = max(0, jstar - radius), min(t, jstar + radius)
    band_mass = sum(h.entries[lo:hi + 1], Fraction(0)) if lo <= hi else Fraction(0)
    prefix_mass = sum(h.entries[:min(jstar, t) + 1], Fraction(0))
    weighted = Pow2Sum.zero()
    for j in range(min(jstar, t) + 1):
        if h.entries[j]:
            weighted = weighted + pow2(j * eps_fine - m, h.entries[j])
    detail = {
        "jstar": jstar,
        "band_radius": radius,
        "band_mass": format_fraction(band_mass),
        "prefix_mass": format_fraction(prefix_mass),
        "weighted_prefix": f"{float(weighted):.9e}",
    }
    if band_mass ** 4 > eps_fine:
        return "a", detail
    if (prefix_mass - claimed_heavy) ** 4 > eps_fine:
        return "b", detail
    dev = weighted - claimed_uniform_heavy
    quarter_pow = 256 * eps_fine  # (4 * eps_fine^(1/4))**4
    if sign_plus_root(dev, Fraction(-1), quarter_pow, root=4) > 0:
        return "c", detail
    if sign_plus_root(dev, Fraction(1), quarter_pow, root=4) < 0:
        return "c", detail
    return None, detail


def _runner(inst: HeavyInstance, session: Session) -> tuple[bool, dict]:
    params = inst.bucket_params
    session.verifier_message({"type": "hs_start", "t": params.t,
                              "eps_fine": format_fraction(inst.eps_fine)})
    reply = session.prover_message(inst)
    if reply.get("type") != "hs_hist":
        raise ProtocolReject("malformed: expected hs_hist")
    try:
        h = Histogram(params,
                      tuple(parse_fraction(v) for v in reply["h"]),
                      parse_fraction(reply.get("excluded", "0")))
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolReject(f"malformed histogram: {exc}")

    vh_inst = VHInstance(inst.circuit, inst.eps_fine, h, inst.vh_mode)
    if inst.vh_mode.kind == "oracle":
        vh_ok, vh_detail = _oracle_runner(vh_inst, session)
    else:
        vh_ok, vh_detail = _protocol_runner(vh_inst, session)
    if not vh_ok:
        return False, {"failed": "vh", "vh": vh_detail}

    jstar = last_heavy_bucket(inst.eps_fine, inst.alpha, inst.circuit.m)
    failed, detail = verifier_checks(h, jstar, inst.claimed_heavy,
                                     inst.claimed_uniform_heavy,
                                     inst.eps_fine, inst.circuit.m)
    detail["failed"] = failed
    detail["vh"] = vh_detail
    return failed is None, detail


class HonestHeavyProver(ProverStrategy):
    """Sends the true fine histogram and plays honestly in verification."""

    name = "honest-heavy"

    def __init__(self):
        self._hist = None
        self._vh = HonestVHProver()

    def true_histogram(self, inst: HeavyInstance) -> Histogram:
        if self._hist is None:
            self._hist = compute_histogram(exact_dist(inst.circuit), inst.bucket_params)
        return self._hist

    def respond(self, inst: HeavyInstance, rounds):
        last = rounds[-1].payload
        if last.get("type") == "hs_start":
            h = self.true_histogram(inst)
            return {"type": "hs_hist",
                    "h": [format_fraction(v) for v in h.entries],
                    "excluded": format_fraction(h.excluded_mass)}
        vh_inst = VHInstance(inst.circuit, inst.eps_fine, self.true_histogram(inst),
                             inst.vh_mode)
        return self._vh.respond(vh_inst, rounds)


def honest_heavy_prover(inst: Optional[HeavyInstance] = None) -> HonestHeavyProver:
    return HonestHeavyProver()


register_protocol(ProtocolDef(
    name="heavy",
    run=_runner,
    instance_to_json=HeavyInstance.to_json_dict,
    instance_from_json=HeavyInstance.from_json_dict,
))
