"""The two δ-relaxed convex systems in the variables ``y`` and their
semi-weak separation oracle.

``Direction.LOWER`` encodes ``M[r_x] >= t`` with ``y(v) = b^(-x(v))``;
``Direction.UPPER`` encodes ``M[r_x] <= t`` with ``y(v) = b^(x(v))``.  Every
constraint has the shape

    LINEAR:          sum_j  w_j b^(e_j) y(u_j)         >= b^s y(v) - δ
    GEOMETRIC_MEAN:  prod_j (b^(e_j) y(u_j))^(w_j)     >= b^s y(v) - δ

where White positions give one sum constraint (Lower) or one single-term
constraint per move (Upper), Black the other way round, and Random positions
a geometric-mean constraint with the transition probabilities as weights.
The box is ``0 <= y <= b^L + δ`` plus ``b^L y(v) >= 1`` on the bound set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Mapping

import gmpy2
from gmpy2 import mpfr

from .game import BwrGame, Owner
from .params import BPow, GameParams, as_bpow


class Direction(str, Enum):
    LOWER = "lower"
    UPPER = "upper"


class Kind(str, Enum):
    LINEAR = "linear"
    GEOMETRIC_MEAN = "geometric_mean"


@dataclass(frozen=True)
class Constraint:
    vertex: str
    kind: Kind
    terms: tuple  # (successor, b-exponent, weight)
    rhs_exp: Fraction
    label: str

    def weight_denominator(self) -> int:
        return math.lcm(*(w.denominator for _, _, w in self.terms))


@dataclass(frozen=True)
class FeasibilitySystem:
    direction: Direction
    t: Fraction
    delta: BPow
    bound_set: frozenset
    params: GameParams
    positions: tuple
    constraints: tuple

    @property
    def L(self) -> int:
        return self.params.L

    def upper_bound(self) -> list[BPow]:
        """Terms of ``b^L + δ``."""
        return [BPow(Fraction(1), Fraction(self.L)), self.delta]

    def to_json(self) -> str:
        """Debug dump of the constraint list with symbolic exponents."""
        return json.dumps(
            {
                "direction": self.direction.value,
                "t": str(self.t),
                "delta": {"coef": str(self.delta.coef), "b_exp": str(self.delta.exp)},
                "L": self.L,
                "bound_set": sorted(self.bound_set),
                "constraints": [
                    {
                        "vertex": c.vertex,
                        "kind": c.kind.value,
                        "label": c.label,
                        "rhs_b_exp": str(c.rhs_exp),
                        "terms": [{"to": u, "b_exp": str(e), "weight": str(w)} for u, e, w in c.terms],
                    }
                    for c in self.constraints
                ],
            },
            indent=2,
        )



def build_system(
    game: BwrGame,
    params: GameParams,
    direction: Direction,
    t,
    bound_set=(),
    delta=None,
) -> FeasibilitySystem:
    """Encode the relaxed system at threshold ``t`` for ``game``.

    ``game`` must be the working game (rewards already scaled in paper
    mode); ``delta`` defaults to ``params.delta(t)`` and may be a rational
    or a :class:`BPow`.
    """
    t = Fraction(t)
    if not 0 <= t <= params.U:
        raise ValueError(f"threshold {t} outside [0, {params.U}]")
    delta = params.delta(t) if delta is None else as_bpow(delta)
    if delta.coef < 0:
        raise ValueError("δ must be non-negative")
    bound_set = frozenset(bound_set)
    if not bound_set <= set(game.positions):
        raise ValueError("bound set contains unknown positions")
    lower = direction is Direction.LOWER
    sign = 1 if lower else -1
    s = sign * t
    sum_owner, arc_owner = (Owner.WHITE, Owner.BLACK) if lower else (Owner.BLACK, Owner.WHITE)
    constraints = []
    for v in game.positions:
        owner = game.owners[v]
        arcs = [game.arcs[i] for i in game.out_arcs(v)]
        if owner is sum_owner:
            terms = tuple((a.target, Fraction(sign * a.reward), Fraction(1)) for a in arcs)
            constraints.append(Constraint(v, Kind.LINEAR, terms, s, f"{owner.value}-sum:{v}"))
        elif owner is arc_owner:
            for a in arcs:
                constraints.append(
                    Constraint(v, Kind.LINEAR, ((a.target, Fraction(sign * a.reward), Fraction(1)),), s, f"{owner.value}-arc:{v}->{a.target}")
                )
        else:
            terms = tuple((a.target, Fraction(sign * a.reward), a.prob) for a in arcs)
            constraints.append(Constraint(v, Kind.GEOMETRIC_MEAN, terms, s, f"random-gm:{v}"))
    return FeasibilitySystem(direction, t, delta, bound_set, params, tuple(game.positions), tuple(constraints))


# ---------------------------------------------------------------------------
# exact-ish sign evaluation of sums of b-powers


def _collect(terms) -> dict:
    acc: dict[Fraction, Fraction] = {}
    for t in terms:
        if t.coef:
            acc[t.exp] = acc.get(t.exp, Fraction(0)) + t.coef
    return {e: c for e, c in acc.items() if c}


def sign_of_sum(terms, base, start_bits: int = 256, max_bits: int = 1 << 15) -> int:
    """Sign of ``sum(coef * b^exp)``.

    Equal exponents are combined exactly; what remains is evaluated at
    increasing precision until the result clears the rounding error.  A sum
    that never clears ``max_bits`` is reported as zero.
    """
    acc = _collect(terms)
    if not acc:
        return 0
    if len(acc) == 1:
        return 1 if next(iter(acc.values())) > 0 else -1
    bits = start_bits
    while bits <= max_bits:
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            ln_b = base.ln()
            vals = [BPow(c, e).value(ln_b) for e, c in acc.items()]
            total = sum(vals)
            size = sum(abs(x) for x in vals)
            if abs(total) > size * mpfr(2) ** (16 - bits):
                return 1 if total > 0 else -1
        bits *= 4
    return 0


# ---------------------------------------------------------------------------
# membership


@dataclass
class Check:
    label: str
    holds: bool


@dataclass
class PointReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.checks)

    @property
    def violated(self) -> list[str]:
        return [c.label for c in self.checks if not c.holds]


def _box_checks(system, y, base):
    out = []
    for v in system.positions:
        yv = y[v]
        out.append(Check(f"nonneg:{v}", yv.coef >= 0))
        out.append(Check(f"upper:{v}", sign_of_sum(system.upper_bound() + [-yv], base) >= 0))
        if v in system.bound_set:
            out.append(Check(f"lower:{v}", sign_of_sum([yv * BPow(Fraction(1), Fraction(system.L)), BPow(Fraction(-1))], base) >= 0))
    return out


def _linear_terms(c: Constraint, y, delta):
    lhs = [BPow(w, e) * y[u] for u, e, w in c.terms]
    return lhs + [-(BPow(Fraction(1), c.rhs_exp) * y[c.vertex]), delta]


def _gm_holds(c: Constraint, y, delta, base) -> bool:
    """Decide ``A g(y) >= B y(v) - δ`` by raising both sides to the power D."""
    rhs = [BPow(Fraction(1), c.rhs_exp) * y[c.vertex], -delta]
    if sign_of_sum(rhs, base) <= 0:
        return True
    D = c.weight_denominator()
    lhs = BPow(Fraction(1))
    for u, e, w in c.terms:
        m = int(w * D)
        yu = y[u]
        lhs = lhs * BPow(yu.coef**m, yu.exp * m) * BPow(Fraction(1), e * m)
    if lhs.coef == 0:
        return False
    # (B y(v) - δ)^D expanded binomially
    a, d = rhs
    expanded = [
        BPow(math.comb(D, j) * a.coef**j * d.coef ** (D - j), a.exp * j + d.exp * (D - j)) for j in range(D + 1)
    ]
    return sign_of_sum([lhs] + [-x for x in expanded], base) >= 0


def check_point(system: FeasibilitySystem, y: Mapping) -> PointReport:
    """Evaluate every constraint of ``system`` at ``y``.

    Entries of ``y`` may be rationals, floats, mpfr values or :class:`BPow`;
    all are converted exactly, so linear constraints reduce to signs of sums
    of b-powers and geometric-mean constraints to the power-D comparison.
    """
    base = system.params.base
    yb = {v: as_bpow(y[v]) for v in system.positions}
    report = PointReport(_box_checks(system, yb, base))
    for c in system.constraints:
        if c.kind is Kind.LINEAR:
            holds = sign_of_sum(_linear_terms(c, yb, system.delta), base) >= 0
        else:
            holds = _gm_holds(c, yb, system.delta, base)
        report.checks.append(Check(c.label, holds))
    return report


def gm_holds_direct(system: FeasibilitySystem, c: Constraint, y: Mapping, bits: int = 512) -> bool:
    """Direct evaluation of a geometric-mean constraint at ``bits`` precision."""
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        ln_b = system.params.base.ln()
        yv = {v: as_bpow(y[v]).value(ln_b) for v in system.positions}
        lhs = mpfr(1)
        for u, e, w in c.terms:
            lhs *= (BPow(Fraction(1), e).value(ln_b) * yv[u]) ** (mpfr(w.numerator) / w.denominator)
        rhs = BPow(Fraction(1), c.rhs_exp).value(ln_b) * yv[c.vertex] - system.delta.value(ln_b)
        return lhs >= rhs


# ---------------------------------------------------------------------------
# separation


def rational_root_approx(values, exponents, tolerance) -> Fraction:
    """Rational ``g`` with ``g >= prod(values**exponents) >= g - tolerance``.

    ``values`` are non-negative rationals, ``exponents`` positive rationals
    summing to one.  Uses one integer root with upward rounding.
    """
    values = [Fraction(v) for v in values]
    exponents = [Fraction(e) for e in exponents]
    if sum(exponents) != 1:
        raise ValueError("exponents must sum to 1")
    tolerance = Fraction(tolerance)
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    D = math.lcm(*(e.denominator for e in exponents))
    P = Fraction(1)
    for v, e in zip(values, exponents):
        P *= v ** int(e * D)
    if P == 0:
        return Fraction(0)
    K = 1 << max(0, tolerance.denominator.bit_length() - tolerance.numerator.bit_length() + 2)
    num = P.numerator * K**D
    X = -(-num // P.denominator)
    r, exact_root = gmpy2.iroot(gmpy2.mpz(X), D)
    r = int(r) + (0 if exact_root else 1)
    return Fraction(r, K)


@dataclass(frozen=True)
class SeparationResult:
    """``c is None`` means the query point was asserted inside."""

    c: dict | None = None
    label: str = ""

    @property
    def inside(self) -> bool:
        return self.c is None


INSIDE = SeparationResult()


def _to_fraction(x: mpfr) -> Fraction:
    return Fraction(*x.as_integer_ratio())


def separate(system: FeasibilitySystem, ybar: Mapping, delta_prime) -> SeparationResult:
    """Either assert ``ybar`` lies in the relaxed system or return a rational
    ``c`` with ``c·y + δ' >= c·ybar`` for every ``y`` of the system.

    Box and linear violations yield the violated row; a violated
    geometric-mean constraint yields its gradient at ``ybar`` built from an
    upper rational approximation of the geometric mean.  A violated
    geometric-mean constraint with a zero successor coordinate is cut along
    that coordinate axis instead.
    """
    delta_prime = Fraction(delta_prime)
    if delta_prime <= 0:
        raise ValueError("δ' must be positive")
    base = system.params.base
    yb = {v: as_bpow(ybar[v]) for v in system.positions}
    one = Fraction(1)
    for chk in _box_checks(system, yb, base):
        if not chk.holds:
            kind, v = chk.label.split(":", 1)
            return SeparationResult({v: -one if kind == "upper" else one}, chk.label)

    violated = None
    for c in system.constraints:
        if c.kind is Kind.LINEAR and sign_of_sum(_linear_terms(c, yb, system.delta), base) < 0:
            violated = c
            break
    if violated is None:
        for c in system.constraints:
            if c.kind is Kind.GEOMETRIC_MEAN and not _gm_holds(c, yb, system.delta, base):
                violated = c
                break
    if violated is None:
        return INSIDE

    # working precision for rationalizing irrational b-powers: the rounding
    # error times the diameter of the box must stay far below δ'
    L = system.L
    spread = max(abs(e) for _, e, _ in violated.terms) + abs(violated.rhs_exp) + L + 2
    with gmpy2.context(gmpy2.get_context(), precision=64):
        mag = float(spread * base.ln() / gmpy2.log(2))
    bits = int(mag) + 3 * system.params.n + delta_prime.denominator.bit_length() - delta_prime.numerator.bit_length() + 128
    for v in system.positions:
        if yb[v].exp:
            bits += int(abs(yb[v].exp) * mag / spread) + 1
    bits = max(bits, 256)

    with gmpy2.context(gmpy2.get_context(), precision=bits):
        ln_b = base.ln()
        val = {v: yb[v].value(ln_b) for v in system.positions}
        B = _to_fraction(BPow(one, violated.rhs_exp).value(ln_b))
        c: dict[str, Fraction] = {}
        if violated.kind is Kind.LINEAR:
            for u, e, w in violated.terms:
                c[u] = c.get(u, Fraction(0)) + _to_fraction(BPow(w, e).value(ln_b))
            c[violated.vertex] = c.get(violated.vertex, Fraction(0)) - B
            return SeparationResult(c, violated.label)

        zero = next((u for u, _, _ in violated.terms if yb[u].coef == 0), None)
        if zero is not None:
            return SeparationResult({zero: one}, violated.label + ":axis")
        logA = sum(e * w for _, e, w in violated.terms)
        A = _to_fraction(BPow(one, logA).value(ln_b))
        # exact rational upper bounds for the query coordinates
        bump = 1 + Fraction(1, 1 << (bits - 16))
        weights: dict[str, Fraction] = {}
        for u, _, w in violated.terms:
            weights[u] = weights.get(u, Fraction(0)) + w
        succ = sorted(weights)
        upper = [_to_fraction(val[u]) * bump if yb[u].exp else yb[u].coef for u in succ]
        g_hat = rational_root_approx(upper, [weights[u] for u in succ], delta_prime / (2 * A))
        for u, yu in zip(succ, upper):
            c[u] = c.get(u, Fraction(0)) + A * weights[u] * g_hat / yu
        c[violated.vertex] = c.get(violated.vertex, Fraction(0)) - B
        return SeparationResult(c, violated.label)


def potentials_from_point(system: FeasibilitySystem, y: Mapping, bits: int = 256) -> dict:
    """Potentials ``x = -log_b(2y)`` (Lower) or ``log_b(2y)`` (Upper) as mpfr."""
    sign = -1 if system.direction is Direction.LOWER else 1
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        ln_b = system.params.base.ln()
        out = {}
        for v in system.positions:
            yv = as_bpow(y[v])
            if yv.coef <= 0:
                out[v] = None
                continue
            ln_y = gmpy2.log(mpfr(yv.coef.numerator) / yv.coef.denominator) + ln_b * yv.exp.numerator / yv.exp.denominator
            out[v] = sign * (ln_y + gmpy2.log(2)) / ln_b
        return out
