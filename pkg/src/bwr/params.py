"""Derived constants of a game and the symbolic representation of powers of b.

The softmax base is ``b = n ** e`` where ``e = 2/eps`` (paper constants) or a
user-chosen integer (practical mode).  ``e`` is irrational for odd ``k`` so it
is stored through its square.  Nothing of the form ``b ** q`` is ever built
as an exact number; :class:`BPow` keeps ``coef * b ** exp`` with rational
``coef`` and ``exp`` and materializes it at a requested precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
from gmpy2 import mpfr

from .game import BwrGame, Owner, scale_rewards

MODES = ("paper", "practical")


def _ceil_sqrt_scaled(square: Fraction, bits: int) -> Fraction:
    """Smallest multiple of ``2**-bits`` that is >= sqrt(square)."""
    num = square.numerator << (2 * bits)
    q, r = divmod(num, square.denominator)
    q += bool(r)
    root = math.isqrt(q)
    if root * root < q:
        root += 1
    return Fraction(root, 1 << bits)


def _floor_sqrt_scaled(square: Fraction, bits: int) -> Fraction:
    num = (square.numerator << (2 * bits)) // square.denominator
    return Fraction(math.isqrt(num), 1 << bits)


@dataclass(frozen=True)
class Base:
    """``b = n ** sqrt(exponent_sq)``."""

    n: int
    exponent_sq: Fraction

    def ln(self) -> mpfr:
        """Natural log of b at the current gmpy2 context precision."""
        return gmpy2.sqrt(mpfr(self.exponent_sq.numerator) / self.exponent_sq.denominator) * gmpy2.log(self.n)

    def log_of(self, value) -> Fraction:
        """Rational upper bound on ``log_b(value)`` for a rational ``value >= 1``."""
        value = Fraction(value)
        if value <= 1:
            return Fraction(0)
        with gmpy2.context(gmpy2.get_context(), precision=128, round=gmpy2.RoundUp):
            num = gmpy2.log(value.numerator) - gmpy2.log(value.denominator)
            est = num / (gmpy2.log(self.n) * _floor_sqrt_scaled(self.exponent_sq, 64))
        return Fraction(*est.as_integer_ratio()) * (1 + Fraction(1, 1 << 40))


@dataclass(frozen=True)
class BPow:
    """The number ``coef * b ** exp``."""

    coef: Fraction
    exp: Fraction = Fraction(0)

    def __mul__(self, other):
        if isinstance(other, BPow):
            return BPow(self.coef * other.coef, self.exp + other.exp)
        return BPow(self.coef * Fraction(other), self.exp)

    __rmul__ = __mul__

    def __neg__(self):
        return BPow(-self.coef, self.exp)

    def value(self, ln_b) -> mpfr:
        """Materialize with ``ln_b`` at the current gmpy2 context precision."""
        if self.coef == 0:
            return mpfr(0)
        c = mpfr(self.coef.numerator) / self.coef.denominator
        if self.exp == 0:
            return c
        return c * gmpy2.exp(ln_b * self.exp.numerator / self.exp.denominator)


def as_bpow(x) -> BPow:
    """Exact conversion of rationals, floats, mpfr values and BPow."""
    if isinstance(x, BPow):
        return x
    if isinstance(x, (int, Fraction)):
        return BPow(Fraction(x))
    if isinstance(x, float) or type(x).__name__ == "mpfr":
        return BPow(Fraction(*x.as_integer_ratio()))
    raise TypeError(f"cannot represent {type(x).__name__} exactly")


@dataclass(frozen=True)
class GameParams:
    """Precision and search constants of a game.

    ``lambda_sq`` is the square of the value-denominator bound actually used,
    ``max(Λ², (n·D^k)²)`` where ``Λ² = k·2^k·D^(2k+2)`` is kept as
    ``lambda_sq_cited``; ``max_den`` is the largest integer denominator it
    admits.  In paper mode the rewards of
    the working game are multiplied by ``scale == D`` and ``U`` is the scaled
    maximum reward.
    """

    mode: str
    n: int
    k: int
    U: int
    D: int
    scale: int
    lambda_sq: Fraction
    L: int
    base: Base
    lambda_sq_cited: Fraction | None = None

    @property
    def max_den(self) -> int:
        return math.isqrt(self.lambda_sq.numerator // self.lambda_sq.denominator)

    @property
    def lambda_upper(self) -> Fraction:
        """Rational over-approximation ``ceil(Λ·2^32)/2^32``."""
        return _ceil_sqrt_scaled(self.lambda_sq, 32)

    @property
    def epsilon_sq(self) -> Fraction:
        return 1 / (4 * self.lambda_sq)

    @property
    def epsilon_lower(self) -> Fraction:
        """Rational lower bound on ``ε = 1/(2Λ)``."""
        return 1 / (2 * self.lambda_upper)

    def epsilon(self) -> mpfr:
        return 1 / (2 * gmpy2.sqrt(mpfr(self.lambda_sq.numerator) / self.lambda_sq.denominator))

    def delta(self, t) -> BPow:
        """Feasibility slack ``½ b^(-t-L) (1 - 1/n)``; n = 1 uses ``1 - 1/2``."""
        return BPow(Fraction(1, 2) * (1 - Fraction(1, max(self.n, 2))), -Fraction(t) - self.L)

    def softmax_slack(self, degree: int) -> Fraction:
        """Upper bound on the gap left by a δ(t)-approximate witness: the
        ``log_b n`` lost to the slack plus ``log_b degree`` lost to softmax."""
        return self.base.log_of(max(self.n, 2)) + self.base.log_of(degree)


def lambda_squared(n: int, k: int, D: int) -> Fraction:
    """``Λ² = k·2^k·D^(2k+2)``, or ``n²`` for k = 0."""
    if k == 0:
        return Fraction(n * n)
    return Fraction(k * 2**k * D ** (2 * k + 2))


def denominator_bound(n: int, k: int, D: int) -> int:
    """Proven bound ``n·D^k`` on the denominator of any recurrent-class gain.

    By the Markov chain tree theorem the stationary weight of a class
    position is a sum over spanning in-trees of arc probability products,
    each with at most k Random factors; scaling by ``D^k`` makes every weight
    an integer and their total at most ``n·D^k``.
    """
    return n * D**k


def derive_params(game: BwrGame, mode: str = "practical", b_exponent: int = 8, potential_bound: int | None = None) -> GameParams:
    """Constants governing precision and search for ``game``.

    Paper mode scales rewards by D (so ``U`` becomes ``U*D``) and uses
    ``b = n^(2/ε)`` and ``L = nUk(2D)^k``.  Practical mode keeps the rewards,
    uses ``b = n^b_exponent`` and, if given, ``potential_bound`` for ``L``.
    BW-games (k = 0) use Λ = n and L = nU.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    n, k, D = game.n, game.k, game.D
    scale = D if mode == "paper" else 1
    U = game.max_reward * scale
    cited = lambda_squared(n, k, D)
    lam_sq = max(cited, Fraction(denominator_bound(n, k, D) ** 2))
    if potential_bound is not None and mode == "practical":
        L = int(potential_bound)
    else:
        L = n * U * k * (2 * D) ** k if k else n * U
    if mode == "paper":
        base = Base(max(n, 2), 16 * lam_sq)
    else:
        if b_exponent <= 0:
            raise ValueError("b exponent must be positive")
        base = Base(max(n, 2), Fraction(b_exponent) ** 2)
    return GameParams(mode, n, k, U, D, scale, lam_sq, L, base, cited)


def working_game(game: BwrGame, params: GameParams) -> BwrGame:
    """The game the pipeline actually runs on (rewards scaled in paper mode)."""
    return scale_rewards(game, params.scale) if params.scale != 1 else game


def relevant_degree(game: BwrGame, owner: Owner) -> int:
    return game.max_out_degree(owner) if game.owned_by(owner) else 1
