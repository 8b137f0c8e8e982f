"""Random heaviness thresholds and the exact statistics they induce.

A threshold alpha splits {0,1}^m into heavy strings (output probability
at least alpha * 2**-m) and light ones.  Fixed thresholds are fragile:
all the mass can sit just next to the cut, so alpha is drawn from a
geometric grid  alpha0 * (1+3*delta)**i,  i = 0..floor(1/delta),  which
guarantees that on average only a delta fraction of mass lands within a
(1 +- delta) window of the cut.  Everything here is exact: thresholds are
rationals and window membership is decided in rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .core import Circuit, ExactDist, NondetCircuit, exact_dist
from .exactnum import sign_plus_root


@dataclass(frozen=True)
class SqrtWidth:
    """A window half-width of the form coef * sqrt(radicand), kept exact."""

    coef: Fraction
    radicand: Fraction


Width = Union[Fraction, SqrtWidth]


def threshold_support(alpha0: Fraction, delta: Fraction) -> list[Fraction]:
    """The grid {alpha0 * (1+3*delta)**i : 0 <= i <= floor(1/delta)}."""
    alpha0, delta = Fraction(alpha0), Fraction(delta)
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0,1]")
    steps = int(Fraction(1) / delta)
    ratio = 1 + 3 * delta
    out = [alpha0]
    for _ in range(steps):
        out.append(out[-1] * ratio)
    return out


@dataclass(frozen=True)
class ThresholdDist:
    """Uniform distribution over the geometric threshold grid.

    The budget guarantee behind the grid needs delta < 1/3, so that is a
    construction-time requirement here; sweeps over wider grids can use
    :func:`threshold_support` directly.
    """

    alpha0: Fraction
    delta: Fraction

    def __post_init__(self):
        if Fraction(self.alpha0) <= 0:
            raise ValueError("alpha0 must be positive")
        if not (0 < Fraction(self.delta) < Fraction(1, 3)):
            raise ValueError("delta must lie in (0, 1/3)")

    @property
    def support(self) -> list[Fraction]:
        return threshold_support(self.alpha0, self.delta)


def sample_threshold(td: ThresholdDist, coins) -> Fraction:
    """Uniform draw from the grid using the recorded coin stream."""
    support = td.support
    return support[coins.draw_below(len(support))]


@dataclass(frozen=True)
class HeavyLightStats:
    """The four exact probabilities attached to (distribution, checker, alpha).

    dist_heavy      -- a distribution sample is heavy
    uniform_heavy   -- a uniform sample is heavy
    uniform_yes     -- a uniform sample is accepted by the checker
    dist_light_yes  -- a distribution sample is light and accepted
    """

    dist_heavy: Fraction
    uniform_heavy: Fraction
    uniform_yes: Fraction
    dist_light_yes: Fraction


def heavy_cut(alpha: Fraction, m: int) -> Fraction:
    return Fraction(alpha) / (1 << m)


def heavy_light_stats(circuit: Circuit, checker: NondetCircuit, alpha: Fraction,
                      *, dist: Optional[ExactDist] = None,
                      yes_table: Optional[np.ndarray] = None) -> HeavyLightStats:
    """Exhaustive computation of the four probabilities.

    The distribution and the checker's acceptance table can be passed in
    when precomputed; otherwise both are enumerated here.
    """
    if checker.m != circuit.m:
        raise ValueError("checker statement width must match circuit output width")
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if dist is None:
        dist = exact_dist(circuit)
    if yes_table is None:
        yes_table = checker.accept_table()
    cut = heavy_cut(alpha, circuit.m)
    dist_heavy = Fraction(0)
    dist_light_yes = Fraction(0)
    heavy_count = 0
    for y, p in dist.items():
        if p >= cut:
            dist_heavy += p
            heavy_count += 1
        elif bool(yes_table[y]):
            dist_light_yes += p
    uniform_heavy = Fraction(heavy_count, 1 << circuit.m)
    uniform_yes = Fraction(int(yes_table.sum()), 1 << circuit.m)
    return HeavyLightStats(dist_heavy, uniform_heavy, uniform_yes, dist_light_yes)


def mass_near_threshold(dist: ExactDist, alpha: Fraction, band: Width) -> Fraction:
    """Total mass with probability inside [(1-band), (1+band)] * alpha * 2**-m."""
    cut = heavy_cut(alpha, dist.m)
    total = Fraction(0)
    for _, p in dist.items():
        x = p / cut - 1
        if isinstance(band, SqrtWidth):
            if band.radicand < 0:
                raise ValueError("negative radicand")
            inside = (sign_plus_root(x, -band.coef, band.radicand) <= 0
                      and sign_plus_root(x, band.coef, band.radicand) >= 0)
        else:
            if band <= 0:
                raise ValueError("band must be positive")
            inside = -band <= x <= band
        if inside:
            total += p
    return total


def band_mass_within(dist: ExactDist, alpha: Fraction, band: Width, bound: Width) -> bool:
    """Exactly decide mass_near_threshold(...) <= bound."""
    mass = mass_near_threshold(dist, alpha, band)
    if isinstance(bound, SqrtWidth):
        return sign_plus_root(mass, -bound.coef, bound.radicand) <= 0
    return mass <= bound


def good_alphas(dist: ExactDist, support: Sequence[Fraction], band: Width, bound: Width) -> list[Fraction]:
    """Thresholds in the grid whose near-cut mass stays under the bound."""
    return [a for a in support if band_mass_within(dist, a, band, bound)]


def mean_band_mass(dist: ExactDist, alpha0: Fraction, delta: Fraction) -> Fraction:
    """Average near-cut mass over the full grid, window half-width delta.

    The grid construction promises this average never exceeds delta; the
    value returned here is exact so the promise can be asserted verbatim.
    """
    support = threshold_support(alpha0, delta)
    total = sum((mass_near_threshold(dist, a, Fraction(delta)) for a in support), Fraction(0))
    return total / len(support)


def good_alpha_fraction(dist: ExactDist, alpha0: Fraction, eps: Fraction) -> Fraction:
    """Fraction of the eps-calibrated grid with band mass <= sqrt(eps)/5.

    Grid spacing 4*eps, window half-width 4*sqrt(eps).  The companion
    guarantee says this fraction is at least 1 - 20*sqrt(eps).
    """
    eps = Fraction(eps)
    support = threshold_support(alpha0, 4 * eps)
    band = SqrtWidth(Fraction(4), eps)
    bound = SqrtWidth(Fraction(1, 5), eps)
    good = good_alphas(dist, support, band, bound)
    return Fraction(len(good), len(support))


def tail_bound(kind: str, k: int, eps: float, value_range: float = 1.0) -> float:
    """Upper bounds on the deviation probability of k-sample means.

    ``chernoff`` covers Bernoulli means (exp(-eps^2 k / 2)), ``hoeffding``
    bounded variables with the given range (exp(-2 eps^2 k / range^2)).
    Used for sizing trial counts, so plain floats are fine here.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if eps < 0:
        raise ValueError("deviation must be nonnegative")
    if kind == "chernoff":
        return math.exp(-(eps ** 2) * k / 2)
    if kind == "hoeffding":
        if value_range <= 0:
            raise ValueError("range must be positive")
        return math.exp(-2 * (eps ** 2) * k / value_range ** 2)
    raise ValueError(f"unknown bound kind {kind!r}")
