"""Exact arithmetic for dyadic-exponent quantities.

Every verdict in this package must be reproducible bit for bit, so no
comparison that decides an accept/reject outcome may go through floating
point.  The quantities that actually occur are all of one of two shapes:

* power products  ``c * 2**(a/b)``  with rational ``c`` and rational
  exponent ``a/b`` (bucket boundaries, set-size claims, threshold grids);
* finite sums of such terms with a common root index ``b``
  (bucket-weighted sums like ``sum_j h_j * 2**(j*eps)``), possibly
  compared against windows of the form ``center +- c*sqrt(s)``.

Sums with a common root index live in the real field Q(2**(1/b)).  The
monomials 1, 2**(1/b), ..., 2**((b-1)/b) are linearly independent over Q
(x**b - 2 is irreducible by Eisenstein), so the coefficient vector of a
sum is unique: a sum is zero iff every coefficient is zero, and it is
rational iff every non-constant coefficient is zero.  That gives an exact
zero test, after which adaptive-precision interval refinement always
terminates when deciding a sign.

Floats appear in exactly two places, and never decide anything: as search
seeds for exponent hunts, and in ``float()`` conversions for display.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import isqrt
from typing import Iterable, Optional, Union

Rat = Union[int, Fraction]

_DEFAULT_START_PREC = 64
_MAX_PREC = 1 << 14


def integer_nth_root(x: int, n: int) -> int:
    """Floor of the n-th root of a nonnegative integer."""
    if x < 0:
        raise ValueError("negative radicand")
    if n < 1:
        raise ValueError("root index must be >= 1")
    if x in (0, 1) or n == 1:
        return x
    if n == 2:
        return isqrt(x)
    # Newton iteration seeded from the bit length; monotone from above.
    r = 1 << -(-x.bit_length() // n)
    while True:
        nr = ((n - 1) * r + x // r ** (n - 1)) // n
        if nr >= r:
            break
        r = nr
    while r ** n > x:
        r -= 1
    return r


def exact_nth_root(fr: Fraction, n: int) -> Optional[Fraction]:
    """The exact rational n-th root of ``fr``, or None if irrational."""
    if fr < 0:
        raise ValueError("negative radicand")
    p, q = fr.numerator, fr.denominator
    rp, rq = integer_nth_root(p, n), integer_nth_root(q, n)
    if rp ** n == p and rq ** n == q:
        return Fraction(rp, rq)
    return None


def ceil_sqrt_fraction(fr: Fraction) -> int:
    """Smallest integer k with k*k >= fr (fr >= 0)."""
    if fr < 0:
        raise ValueError("negative argument")
    k = isqrt(fr.numerator // fr.denominator)
    while k * k < fr:
        k += 1
    return k


@lru_cache(maxsize=1 << 16)
def _pow_bitlen(base: int, expo: int) -> int:
    return (base ** expo).bit_length()


def _cmp_intpow_vs_pow2(u: int, q: int, k: int) -> int:
    """Sign of u**q - 2**k for odd u >= 1, q >= 1.

    Needs only the bit length of u**q: an odd power never equals a power
    of two (except 1 == 2**0).
    """
    if u == 1:
        return -1 if k > 0 else (0 if k == 0 else 1)
    if k < 0:
        return 1
    bl = _pow_bitlen(u, q)
    if bl <= k:
        return -1
    return 1  # bl >= k+1 and u**q is odd, so strictly bigger


def cmp_frac_pow2(fr: Fraction, e: Fraction) -> int:
    """Sign of fr - 2**e, exactly, for fr > 0 and rational e."""
    if fr <= 0:
        raise ValueError("fr must be positive")
    p, q = e.numerator, e.denominator
    a, b = fr.numerator, fr.denominator
    # Strip powers of two into the exponent: fr = (ua/ub) * 2**s.
    sa = (a & -a).bit_length() - 1
    sb = (b & -b).bit_length() - 1
    ua, ub = a >> sa, b >> sb
    # (ua/ub)**q vs 2**(p - (sa-sb)q)  <=>  ua**q vs ub**q * 2**k
    k = p - (sa - sb) * q
    if ub == 1:
        return _cmp_intpow_vs_pow2(ua, q, k)
    if ua == 1:
        return -_cmp_intpow_vs_pow2(ub, q, -k)
    bla, blb = _pow_bitlen(ua, q), _pow_bitlen(ub, q)
    # ua**q in [2**(bla-1), 2**bla); ub**q * 2**k in [2**(blb-1+k), 2**(blb+k))
    if bla <= blb - 1 + k:
        return -1
    if bla - 1 >= blb + k:
        return 1
    lhs = ua ** q
    rhs = ub ** q
    rhs = rhs << k if k >= 0 else rhs
    lhs = lhs if k >= 0 else lhs << -k
    return (lhs > rhs) - (lhs < rhs)


def cmp_scaled_pow2(c1: Fraction, e1: Fraction, c2: Fraction, e2: Fraction) -> int:
    """Sign of c1*2**e1 - c2*2**e2, exactly, for c1, c2 >= 0."""
    if c1 < 0 or c2 < 0:
        raise ValueError("coefficients must be nonnegative")
    if c1 == 0:
        return -1 if c2 > 0 else 0
    if c2 == 0:
        return 1
    return cmp_frac_pow2(c1 / c2, e2 - e1)


def floor_log2_fraction(fr: Fraction) -> int:
    """Largest integer k with 2**k <= fr (fr > 0)."""
    if fr <= 0:
        raise ValueError("fr must be positive")
    p, q = fr.numerator, fr.denominator
    k = p.bit_length() - q.bit_length()
    if (p >> k if k >= 0 else p << -k) < q:
        k -= 1
    return k


def _nth_root_bounds(p: int, q: int, root: int, prec: int) -> tuple[int, int]:
    """Integers (lo, hi) with lo <= (p/q)**(1/root) * 2**prec <= hi, hi-lo <= 2."""
    scaled = (p << (root * prec)) // q
    lo = integer_nth_root(scaled, root)
    hi = lo + 1
    while hi ** root * q < p << (root * prec):
        hi += 1
    return lo, hi


class Pow2Sum:
    """An exact real number of the form sum_r c_r * 2**(r/b).

    Immutable.  ``b`` is the root index; coefficients are rationals keyed
    by residue r in [0, b).  Supports ring arithmetic, exact sign/compare,
    and floor/ceil.  Construct via :func:`pow2`, :meth:`from_fraction`, or
    arithmetic on existing values.
    """

    __slots__ = ("b", "coeffs")

    def __init__(self, b: int, coeffs: dict[int, Fraction]):
        self.b = b
        self.coeffs = {r: c for r, c in coeffs.items() if c != 0}

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero() -> "Pow2Sum":
        return Pow2Sum(1, {})

    @staticmethod
    def from_fraction(fr: Rat) -> "Pow2Sum":
        fr = Fraction(fr)
        return Pow2Sum(1, {0: fr} if fr else {})

    # -- representation changes -------------------------------------------

    def _rescaled(self, b_new: int) -> "Pow2Sum":
        if b_new == self.b:
            return self
        if b_new % self.b:
            raise ValueError("incompatible root index")
        f = b_new // self.b
        return Pow2Sum(b_new, {r * f: c for r, c in self.coeffs.items()})

    @staticmethod
    def _common(x: "Pow2Sum", y: "Pow2Sum") -> tuple["Pow2Sum", "Pow2Sum"]:
        if x.b == y.b:
            return x, y
        from math import lcm

        b = lcm(x.b, y.b)
        return x._rescaled(b), y._rescaled(b)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other) -> "Pow2Sum":
        other = _coerce(other)
        a, b = Pow2Sum._common(self, other)
        coeffs = dict(a.coeffs)
        for r, c in b.coeffs.items():
            coeffs[r] = coeffs.get(r, Fraction(0)) + c
        return Pow2Sum(a.b, coeffs)

    __radd__ = __add__

    def __neg__(self) -> "Pow2Sum":
        return Pow2Sum(self.b, {r: -c for r, c in self.coeffs.items()})

    def __sub__(self, other) -> "Pow2Sum":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "Pow2Sum":
        return _coerce(other) + (-self)

    def __mul__(self, other) -> "Pow2Sum":
        if isinstance(other, (int, Fraction)):
            f = Fraction(other)
            return Pow2Sum(self.b, {r: c * f for r, c in self.coeffs.items()})
        other = _coerce(other)
        a, b = Pow2Sum._common(self, other)
        coeffs: dict[int, Fraction] = {}
        for r1, c1 in a.coeffs.items():
            for r2, c2 in b.coeffs.items():
                r = r1 + r2
                c = c1 * c2
                if r >= a.b:  # beta**b == 2
                    r -= a.b
                    c *= 2
                coeffs[r] = coeffs.get(r, Fraction(0)) + c
        return Pow2Sum(a.b, coeffs)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Pow2Sum":
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        raise TypeError("division only by rationals")

    # -- exactness queries --------------------------------------------------

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_rational(self) -> bool:
        return all(r == 0 for r in self.coeffs)

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError("value is irrational")
        return self.coeffs.get(0, Fraction(0))

    def __eq__(self, other) -> bool:
        try:
            other = _coerce(other)
        except TypeError:
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        if self.is_rational():
            return hash(self.as_fraction())
        return hash((self.b, tuple(sorted(self.coeffs.items()))))

    # -- numeric bounds ------------------------------------------------------

    def bounds(self, prec: int) -> tuple[Fraction, Fraction]:
        """Fractions (lo, hi) with lo <= value <= hi, width shrinking in prec."""
        if not self.coeffs:
            return Fraction(0), Fraction(0)
        scale = Fraction(1, 1 << prec)
        pw = _residue_power_bounds(self.b, prec)
        lo = hi = Fraction(0)
        for r, c in self.coeffs.items():
            plo, phi = pw(r)
            if c >= 0:
                lo += c * plo * scale
                hi += c * phi * scale
            else:
                lo += c * phi * scale
                hi += c * plo * scale
        return lo, hi

    def sign(self) -> int:
        """Exact sign: -1, 0 or +1."""
        if not self.coeffs:
            return 0
        if len(self.coeffs) == 1 or self.is_rational():
            # single monomial: sign of its coefficient
            if len(self.coeffs) == 1:
                return 1 if next(iter(self.coeffs.values())) > 0 else -1
            return 1 if self.coeffs[0] > 0 else -1
        prec = _DEFAULT_START_PREC
        while prec <= _MAX_PREC:
            lo, hi = self.bounds(prec)
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            prec *= 2
        # Unreachable for nonzero values of sane size; the representation
        # is unique so a all-coefficients-nonzero sum cannot be 0.
        raise ArithmeticError("sign undecided at maximum precision")

    def cmp(self, other) -> int:
        return (self - _coerce(other)).sign()

    def __lt__(self, other):
        return self.cmp(other) < 0

    def __le__(self, other):
        return self.cmp(other) <= 0

    def __gt__(self, other):
        return self.cmp(other) > 0

    def __ge__(self, other):
        return self.cmp(other) >= 0

    def floor(self) -> int:
        if self.is_rational():
            fr = self.as_fraction()
            return fr.numerator // fr.denominator
        prec = _DEFAULT_START_PREC
        while True:
            lo, hi = self.bounds(prec)
            flo = lo.numerator // lo.denominator
            fhi = hi.numerator // hi.denominator
            if flo == fhi:
                return flo
            prec *= 2
            if prec > _MAX_PREC:
                raise ArithmeticError("floor undecided at maximum precision")

    def ceil(self) -> int:
        return -((-self).floor())

    def __float__(self) -> float:
        lo, hi = self.bounds(96)
        return float((lo + hi) / 2)

    def __repr__(self):
        if self.is_rational():
            return f"Pow2Sum({self.as_fraction()})"
        terms = " + ".join(
            f"({c})*2^({r}/{self.b})" for r, c in sorted(self.coeffs.items())
        )
        return f"Pow2Sum[{terms}]"


def _coerce(x) -> Pow2Sum:
    if isinstance(x, Pow2Sum):
        return x
    if isinstance(x, (int, Fraction)):
        return Pow2Sum.from_fraction(x)
    raise TypeError(f"cannot coerce {type(x).__name__} to Pow2Sum")


class _ResiduePowers:
    """Directed-rounding bounds for 2**(r/b) at a fixed precision."""

    def __init__(self, b: int, prec: int):
        self.b = b
        self.prec = prec
        scaled = 1 << (1 + b * prec)
        glo = integer_nth_root(scaled, b)
        self.glo, self.ghi = glo, glo + 1
        self.cache: dict[int, tuple[int, int]] = {0: (1 << prec, 1 << prec)}

    def __call__(self, r: int) -> tuple[int, int]:
        got = self.cache.get(r)
        if got is not None:
            return got
        half = self(r // 2)
        lo = (half[0] * half[0]) >> self.prec
        hi = ((half[1] * half[1]) >> self.prec) + 1
        if r & 1:
            lo = (lo * self.glo) >> self.prec
            hi = ((hi * self.ghi) >> self.prec) + 1
        self.cache[r] = (lo, hi)
        return lo, hi


_residue_cache: dict[tuple[int, int], _ResiduePowers] = {}


def _residue_power_bounds(b: int, prec: int) -> _ResiduePowers:
    key = (b, prec)
    got = _residue_cache.get(key)
    if got is None:
        if len(_residue_cache) > 64:
            _residue_cache.clear()
        got = _ResiduePowers(b, prec)
        _residue_cache[key] = got
    return got


def pow2(expo: Rat, coef: Rat = 1) -> Pow2Sum:
    """The exact value coef * 2**expo for rational expo."""
    coef = Fraction(coef)
    if coef == 0:
        return Pow2Sum.zero()
    expo = Fraction(expo)
    b = expo.denominator
    k, r = divmod(expo.numerator, b)
    c = coef * (Fraction(1 << k) if k >= 0 else Fraction(1, 1 << -k))
    return Pow2Sum(b, {r: c})


def sign_plus_root(x, coef: Rat, radicand: Rat, root: int = 2) -> int:
    """Exact sign of x + coef * radicand**(1/root).

    ``x`` may be a Pow2Sum or a rational.  ``radicand`` must be
    nonnegative.  Ties against irrational roots are resolved exactly when
    ``x`` is rational or small; generic nonzero values resolve by interval
    refinement.
    """
    x = _coerce(x)
    coef, radicand = Fraction(coef), Fraction(radicand)
    if radicand < 0:
        raise ValueError("negative radicand")
    if coef == 0 or radicand == 0:
        return x.sign()
    exact = exact_nth_root(radicand, root)
    if exact is not None:
        return (x + coef * exact).sign()
    if x.is_rational():
        s = x.as_fraction()
        if s == 0:
            return 1 if coef > 0 else -1
        if (s > 0) == (coef > 0):
            return 1 if s > 0 else -1
        # opposite signs: compare |s|**root vs |coef|**root * radicand;
        # equality cannot occur since the root is irrational
        d = abs(s) ** root - abs(coef) ** root * radicand
        return (1 if d > 0 else -1) * (1 if s > 0 else -1)
    # exact-zero test x == -coef * R, feasible while the sum is small
    if len(x.coeffs) <= 32 and x.b <= 512 and root in (2, 4):
        xr = x * x
        if root == 4:
            xr = xr * xr
        if xr == Fraction(coef) ** root * radicand and x.sign() == (-1 if coef > 0 else 1):
            return 0
    prec = _DEFAULT_START_PREC
    p, q = radicand.numerator, radicand.denominator
    while prec <= _MAX_PREC:
        xlo, xhi = x.bounds(prec)
        rlo, rhi = _nth_root_bounds(p, q, root, prec)
        scale = Fraction(1, 1 << prec)
        if coef > 0:
            lo, hi = xlo + coef * rlo * scale, xhi + coef * rhi * scale
        else:
            lo, hi = xlo + coef * rhi * scale, xhi + coef * rlo * scale
        if lo > 0:
            return 1
        if hi < 0:
            return -1
        prec *= 2
    raise ArithmeticError("sign undecided at maximum precision")


def within_root_window(x, center, half_coef: Rat, half_radicand: Rat, root: int = 2) -> bool:
    """Exactly decide |x - center| <= half_coef * half_radicand**(1/root)."""
    d = _coerce(x) - _coerce(center)
    return (
        sign_plus_root(d, -Fraction(half_coef), half_radicand, root) <= 0
        and sign_plus_root(d, Fraction(half_coef), half_radicand, root) >= 0
    )


def within_window(x, center, half: Rat) -> bool:
    """Exactly decide |x - center| <= half for a rational half-width."""
    d = _coerce(x) - _coerce(center)
    return (d - Fraction(half)).sign() <= 0 and (d + Fraction(half)).sign() >= 0


def floor_log2(x) -> int:
    """Largest integer g with 2**g <= x, for a positive Pow2Sum or rational."""
    x = _coerce(x)
    if x.sign() <= 0:
        raise ValueError("argument must be positive")
    if x.is_rational():
        return floor_log2_fraction(x.as_fraction())
    import math

    g = math.frexp(float(x))[1] - 1  # float seed only; fixed up exactly below
    while x.cmp(pow2(Fraction(g))) < 0:
        g -= 1
    while x.cmp(pow2(Fraction(g + 1))) >= 0:
        g += 1
    return g


def parse_fraction(text: str) -> Fraction:
    """Parse 'p/q', an integer, or a decimal literal into a Fraction."""
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(text)


def format_fraction(fr: Rat) -> str:
    fr = Fraction(fr)
    return f"{fr.numerator}/{fr.denominator}" if fr.denominator != 1 else str(fr.numerator)
