"""Bucketed histograms of exact distributions and Wasserstein distance on arrays.

A bucket width ``eps`` (a positive rational p/q < 1) and a bucket count
bound ``t`` partition probabilities into half-open intervals

    bucket i  <->  (2**(-(i+1)*eps), 2**(-i*eps)]      for i in 0..t.

Bucket membership is decided exactly: with prob = a/b the test
``prob <= 2**(-i*p/q)`` is the big-integer comparison a**q vs b**q *
2**(-ip), so boundary ties never depend on rounding.  Mass whose bucket
index would exceed t is tracked separately as excluded mass instead of
being dropped.

The distance between two bucket-mass vectors is the average absolute
difference of their prefix sums scaled by 1/t, split into a right part
(mass that must move right) and a left part.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import log2
from typing import Optional, Sequence

from .core import ExactDist
from .exactnum import Pow2Sum, cmp_frac_pow2, format_fraction, parse_fraction, pow2


@dataclass(frozen=True)
class BucketParams:
    eps: Fraction
    t: int

    def __post_init__(self):
        if not (0 < self.eps < 1):
            raise ValueError("eps must lie in (0,1)")
        if self.t < 1:
            raise ValueError("t must be >= 1")

    @staticmethod
    def for_width(n: int, eps: Fraction) -> "BucketParams":
        """Parameters with t = ceil(n/eps), enough buckets for all of {0,1}^n."""
        eps = Fraction(eps)
        t = -((-n * eps.denominator) // eps.numerator)
        return BucketParams(eps, max(1, t))


def bucket_index(prob: Fraction, params: BucketParams) -> Optional[int]:
    """Exact bucket index of a probability, or None when it falls past t.

    Raises on zero probability: a zero-mass string has no bucket and the
    caller decides how to treat it.
    """
    if prob <= 0 or prob > 1:
        raise ValueError("probability must lie in (0, 1]")
    eps = params.eps
    # float seed, then exact walk; the seed is only ever a starting point
    guess = 0 if prob == 1 else int(-log2(float(prob)) / float(eps))
    i = max(0, guess)
    # invariant target: 2^{-(i+1)eps} < prob <= 2^{-i eps}
    while cmp_frac_pow2(prob, -i * eps) > 0:  # prob > 2^{-i eps}: too deep
        i -= 1
        if i < 0:
            raise AssertionError("probability above 1 slipped through")
    while cmp_frac_pow2(prob, -(i + 1) * eps) <= 0:  # prob <= next boundary
        i += 1
    return i if i <= params.t else None


@dataclass(frozen=True)
class Histogram:
    params: BucketParams
    entries: tuple[Fraction, ...]
    excluded_mass: Fraction = Fraction(0)

    def __post_init__(self):
        if len(self.entries) != self.params.t + 1:
            raise ValueError("histogram must have t+1 entries")
        if any(h < 0 or h > 1 for h in self.entries):
            raise ValueError("entries must lie in [0,1]")
        if sum(self.entries) + self.excluded_mass > 1:
            raise ValueError("total mass exceeds 1")

    def total_mass(self) -> Fraction:
        return sum(self.entries, Fraction(0))

    def is_distribution(self) -> bool:
        return self.total_mass() == 1

    def to_json_dict(self) -> dict:
        return {
            "eps": format_fraction(self.params.eps),
            "t": self.params.t,
            "h": [format_fraction(h) for h in self.entries],
            "excluded_mass": format_fraction(self.excluded_mass),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "Histogram":
        params = BucketParams(parse_fraction(d["eps"]), int(d["t"]))
        entries = tuple(parse_fraction(h) for h in d["h"])
        excl = parse_fraction(d.get("excluded_mass", "0"))
        return Histogram(params, entries, excl)

    @staticmethod
    def load(path: str) -> "Histogram":
        with open(path) as f:
            return Histogram.from_json_dict(json.load(f))


def compute_histogram(dist: ExactDist, params: BucketParams) -> Histogram:
    """Exact bucket masses of a distribution; deep mass is reported, not dropped."""
    entries = [Fraction(0)] * (params.t + 1)
    excluded = Fraction(0)
    for _, p in dist.items():
        idx = bucket_index(p, params)
        if idx is None:
            excluded += p
        else:
            entries[idx] += p
    return Histogram(params, tuple(entries), excluded)


def bucket_members(dist: ExactDist, params: BucketParams) -> dict[Optional[int], list[int]]:
    """Bucket index -> list of strings in it (None collects past-t strings)."""
    out: dict[Optional[int], list[int]] = {}
    for y, p in dist.items():
        out.setdefault(bucket_index(p, params), []).append(y)
    return out


def wasserstein(x: Sequence[Fraction], y: Sequence[Fraction]) -> tuple[Fraction, Fraction, Fraction]:
    """(right, left, total) distance between two distribution vectors.

    Right distance: prefix mass of x exceeding that of y, averaged over
    positions and scaled by 1/t; left symmetric.  Inputs must be equal
    length and each sum to 1.
    """
    if len(x) != len(y):
        raise ValueError("vectors must have equal length")
    t = len(x) - 1
    if t < 1:
        raise ValueError("need at least two buckets")
    if sum(x) != 1 or sum(y) != 1:
        raise ValueError("inputs must be distribution vectors")
    right = left = Fraction(0)
    ax = ay = Fraction(0)
    for xi, yi in zip(x, y):
        ax += xi
        ay += yi
        if ax > ay:
            right += ax - ay
        elif ay > ax:
            left += ay - ax
    return right / t, left / t, (right + left) / t


def wasserstein_hist(hx: Histogram, hy: Histogram) -> tuple[Fraction, Fraction, Fraction]:
    if hx.params != hy.params:
        raise ValueError("histograms use different bucket parameters")
    return wasserstein(hx.entries, hy.entries)


def bucket_size_bounds(h_i: Fraction, i: int, params: BucketParams) -> tuple[Pow2Sum, Pow2Sum]:
    """Exact bounds (h_i * 2**(i*eps), h_i * 2**((i+1)*eps)) on a bucket's size."""
    if not 0 <= h_i <= 1:
        raise ValueError("bucket mass must lie in [0,1]")
    return pow2(i * params.eps, h_i), pow2((i + 1) * params.eps, h_i)
