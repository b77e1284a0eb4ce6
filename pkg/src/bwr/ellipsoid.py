"""Ellipsoid method deciding the relaxed feasibility systems.

Cuts go through the violated constraint itself (deep cuts) by default; with
``deep_cuts=False`` every cut passes through the center, the textbook
variant whose volume bound the iteration limit is derived from.

The method runs in scaled coordinates ``z = y * b^(-L)``, so the box becomes
``[0, 1 + δ b^(-L)]`` and the lower bound on the bound set ``b^(-2L)``.  The
ellipsoid ``{center + Q u : |u| <= 1}`` is kept through the factor ``Q``
(shape ``Q Q^T``), which stays positive definite by construction.

Arithmetic is mpfr at a configurable precision; ``precision_bits=53``
selects plain Python floats, which is faster but only safe when every
magnitude of the system stays well inside double range.  A point is
only reported feasible after :func:`bwr.feasibility.check_point` accepts it.
"""

from __future__ import annotations

import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Sequence

import gmpy2
from gmpy2 import mpfr

from .errors import PrecisionError
from .feasibility import BPow, FeasibilitySystem, Kind, check_point, separate

ITERATION_CONSTANT = 4


class _FloatArith:
    bits = 53

    def __init__(self):
        self.exp, self.log, self.sqrt = math.exp, math.log, math.sqrt

    @staticmethod
    def num(x) -> float:
        return float(x)

    @staticmethod
    def finite(x) -> bool:
        return math.isfinite(x)


class _MpfrArith:
    def __init__(self, bits: int):
        self.bits = bits
        self.exp, self.log, self.sqrt = gmpy2.exp, gmpy2.log, gmpy2.sqrt

    @staticmethod
    def num(x):
        if isinstance(x, Fraction):
            return mpfr(x.numerator) / x.denominator
        return mpfr(x)

    @staticmethod
    def finite(x) -> bool:
        return gmpy2.is_finite(x)


@contextmanager
def _arith(bits: int):
    if bits == 53:
        yield _FloatArith()
    else:
        with gmpy2.context(gmpy2.get_context(), precision=bits):
            yield _MpfrArith(bits)


# ---------------------------------------------------------------------------


@dataclass
class EllipsoidState:
    """``center`` and factor ``Q`` in scaled coordinates, plus the analytic
    log-volume ``log|det Q|``."""

    positions: tuple
    center: list
    Q: list
    log_det: float
    iteration: int = 0
    precision_bits: int = 53

    @property
    def dim(self) -> int:
        return len(self.center)

    def shape(self) -> list:
        """The symmetric positive-definite shape matrix ``Q Q^T``."""
        n = self.dim
        return [[sum(self.Q[i][k] * self.Q[j][k] for k in range(n)) for j in range(n)] for i in range(n)]

    def measured_log_det(self) -> float:
        """``log|det Q|`` from an LU factorisation at the working precision."""
        n = self.dim
        M = [row[:] for row in self.Q]
        total = 0.0
        for k in range(n):
            piv = max(range(k, n), key=lambda i: abs(M[i][k]))
            if M[piv][k] == 0:
                return -math.inf
            M[k], M[piv] = M[piv], M[k]
            total += float(gmpy2.log(abs(mpfr(M[k][k]))))
            for i in range(k + 1, n):
                f = M[i][k] / M[k][k]
                for j in range(k, n):
                    M[i][j] -= f * M[k][j]
        return total


def log_volume_decrease(n: int, alpha: float = 0.0) -> float:
    """Exact change of ``log|det Q|`` in one step in dimension n; ``alpha``
    is the depth of the cut (0 for a central cut)."""
    if n == 1:
        return math.log((1 - alpha) / 2)
    return (n / 2) * math.log(n * n * (1 - alpha * alpha) / (n * n - 1)) + 0.5 * math.log(
        (n - 1) * (1 - alpha) / ((n + 1) * (1 + alpha))
    )


def initial_state(positions: Sequence, center: Sequence, radius, bits: int | None = None) -> EllipsoidState:
    """Ball of ``radius`` around ``center``."""
    n = len(center)
    zero = type(radius)(0) if not isinstance(radius, int) else 0.0
    Q = [[radius if i == j else zero for j in range(n)] for i in range(n)]
    return EllipsoidState(tuple(positions), list(center), Q, n * float(gmpy2.log(abs(mpfr(radius)))), 0, bits or 53)


_FACTORS: dict = {}


def _factors(n: int, as_float: bool):
    """``n / sqrt(n^2 - 1)`` and ``1 - sqrt((n-1)/(n+1))`` at the working precision."""
    if as_float:
        return n / math.sqrt(n * n - 1), 1 - math.sqrt((n - 1) / (n + 1))
    key = (n, gmpy2.get_context().precision)
    if key not in _FACTORS:
        _FACTORS[key] = (mpfr(n) / gmpy2.sqrt(mpfr(n * n - 1)), 1 - gmpy2.sqrt(mpfr(n - 1) / (n + 1)))
    return _FACTORS[key]


def step(state: EllipsoidState, c: Sequence, depth=0) -> EllipsoidState:
    """Smallest ellipsoid containing ``{y in E : c·y >= c·center + depth}``.

    ``depth = 0`` is a central cut.  A depth at or beyond the far end of the
    ellipsoid raises :class:`EmptyCut`.
    """
    n = state.dim
    Q = state.Q
    rng = range(n)
    a = [sum([Q[i][j] * c[i] for i in rng]) for j in rng]
    scale = max(map(abs, a))
    if not scale > 0 or not _finite(scale):
        raise PrecisionError(f"degenerate cut at iteration {state.iteration}: |Q^T c| = {scale}")
    a = [x / scale for x in a]
    na2 = sum([x * x for x in a])
    as_float = isinstance(na2, float)
    na = math.sqrt(na2) if as_float else gmpy2.sqrt(na2)
    alpha = 0.0
    if depth:
        alpha = float(depth / (scale * na)) * (1 - 2.0**-40)
        if alpha >= 1:
            raise EmptyCut(state.iteration)
        alpha = max(alpha, 0.0)
    w = [x / na for x in a]
    Qw = [sum([row[j] * w[j] for j in rng]) for row in Q]
    # update factors at the working precision
    al = alpha if as_float else mpfr(alpha)
    if n == 1:
        center = [state.center[0] + Qw[0] * ((1 + al) / 2)]
        newQ = [[Q[0][0] * ((1 - al) / 2)]]
    else:
        if alpha:
            s, gamma = _deep_factors(n, alpha, as_float)
        else:
            s, gamma = _factors(n, as_float)
        shift = (1 + n * al) / (n + 1)
        center = [x + d * shift for x, d in zip(state.center, Qw)]
        gw = [gamma * x for x in w]
        newQ = [[s * (q - qw * g) for q, g in zip(row, gw)] for row, qw in zip(Q, Qw)]
    if not _finite(sum(center)):
        raise PrecisionError("ellipsoid center left the representable range")
    return EllipsoidState(
        state.positions, center, newQ, state.log_det + log_volume_decrease(n, alpha), state.iteration + 1, state.precision_bits
    )


def _deep_factors(n: int, alpha: float, as_float: bool):
    """Deep-cut analogue of :func:`_factors`."""
    sq = math.sqrt if as_float else gmpy2.sqrt
    num = float if as_float else mpfr
    a = num(alpha)
    s = sq(n * n * (1 - a * a) / (n * n - 1))
    return s, 1 - sq((n - 1) * (1 - a) / ((n + 1) * (1 + a)))


class EmptyCut(Exception):
    """The kept halfspace misses the ellipsoid."""

    def __init__(self, iteration):
        super().__init__(f"cut at iteration {iteration} leaves nothing")
        self.iteration = iteration


def _finite(x) -> bool:
    return math.isfinite(x) if isinstance(x, float) else gmpy2.is_finite(x)


# ---------------------------------------------------------------------------


@dataclass
class DecisionConfig:
    """Knobs of :func:`decide`.

    ``log_epsilon`` is the natural log of the volume threshold in the
    original ``y`` coordinates (default ``(b^(-t)δ)^n / 2``); ``log_H`` is the
    natural log of the bounding radius (default ``2 b^L``).  ``precision_bits``
    of ``None`` uses :func:`auto_precision`; 53 means Python floats.
    ``deep_cuts`` moves each cut from the center to the violated constraint
    itself, which never shrinks the volume less than a central cut.
    """

    log_epsilon: float | None = None
    log_H: float | None = None
    max_iterations: int | None = None
    precision_bits: int | None = None
    iteration_constant: float = ITERATION_CONSTANT
    trace: IO | None = None
    measure_volume: bool = False
    deep_cuts: bool = True


@dataclass
class Feasible:
    y: dict
    iterations: int
    log_volumes: list = field(default_factory=list)

    feasible = True


@dataclass
class Infeasible:
    iterations: int
    certified: bool
    log_volumes: list = field(default_factory=list)

    feasible = False


def _ln_b(system: FeasibilitySystem) -> float:
    with gmpy2.context(gmpy2.get_context(), precision=64):
        return float(system.params.base.ln())


def _ln_bpow(bp: BPow, ln_b: float) -> float:
    return math.log(bp.coef) + float(bp.exp) * ln_b


def default_config_values(system: FeasibilitySystem) -> tuple[float, float]:
    """``(ln ε', ln H)`` in ``y`` coordinates."""
    ln_b = _ln_b(system)
    n = len(system.positions)
    side = _ln_bpow(system.delta, ln_b) - float(system.t) * ln_b
    return n * side - math.log(2), system.L * ln_b + math.log(2)


def dynamic_range(system: FeasibilitySystem) -> float:
    """Largest magnitude, in nats, met by the scaled oracle."""
    ln_b = _ln_b(system)
    exps = [abs(float(e)) for c in system.constraints for _, e, _ in c.terms]
    exps += [abs(float(c.rhs_exp)) for c in system.constraints]
    small = -_ln_bpow(system.delta, ln_b) + system.L * ln_b
    return max([small, 2 * system.L * ln_b] + [x * ln_b for x in exps]) + float(system.t) * ln_b


def auto_precision(system: FeasibilitySystem) -> int:
    """Enough mantissa bits to resolve the margin box side ``b^(-t) δ`` (in
    scaled coordinates) against coordinates of order one, plus 64 guard
    bits; at least 256."""
    rng = dynamic_range(system) / math.log(2)
    return max(256, math.ceil(rng) + 64)


class _Oracle:
    """The system compiled to the working arithmetic in scaled coordinates."""

    def __init__(self, system: FeasibilitySystem, ar):
        self.ar = ar
        self.tol = ar.num(2) ** (24 - ar.bits)
        ln_b = system.params.base.ln() if not isinstance(ar, _FloatArith) else _ln_b(system)
        self.index = {v: i for i, v in enumerate(system.positions)}
        bpow = lambda e: ar.exp(ar.num(e) * ln_b) if e else ar.num(1)
        L = system.L
        self.dz = ar.num(system.delta.coef) * bpow(system.delta.exp - L)
        self.upper = 1 + self.dz
        self.lower = bpow(Fraction(-2 * L))
        self.bounded = [self.index[v] for v in system.positions if v in system.bound_set]
        self.linear, self.gm = [], []
        for c in system.constraints:
            v = self.index[c.vertex]
            B = bpow(c.rhs_exp)
            if c.kind is Kind.LINEAR:
                terms = [(self.index[u], ar.num(w) * bpow(e)) for u, e, w in c.terms]
                self.linear.append((c.label, v, terms, B))
            else:
                logA = sum(e * w for _, e, w in c.terms)
                terms = [(self.index[u], ar.num(w)) for u, _, w in c.terms]
                self.gm.append((c.label, v, terms, B, ar.num(logA) * ln_b, ar.exp(ar.num(logA) * ln_b)))

    def query(self, z):
        """``None`` if ``z`` passes with a relative safety margin, else
        ``(label, c, depth)`` with ``c·z >= c·center + depth`` valid on the
        feasible set (``depth`` may be negative).  A constraint that holds by less than the margin is
        cut as if violated, so the exact re-check rarely disagrees; such a
        cut loses only points within rounding distance of its boundary."""
        n = len(z)
        tol = self.tol
        for i, zi in enumerate(z):
            if zi < 0:
                return "nonneg", _unit(n, i, 1), -zi
            if zi > self.upper * (1 - tol):
                return "upper", _unit(n, i, -1), zi - self.upper * (1 + tol)
        for i in self.bounded:
            if z[i] < self.lower * (1 + tol):
                return "lower", _unit(n, i, 1), self.lower * (1 - tol) - z[i]
        dz = self.dz
        for label, v, terms, B in self.linear:
            lhs = sum(a * z[u] for u, a in terms)
            rhs = B * z[v]
            if lhs - rhs + dz < tol * (lhs + rhs + dz):
                c = [0] * n
                for u, a in terms:
                    c[u] += a
                c[v] -= B
                return label, c, rhs - lhs - dz - tol * (lhs + rhs + dz)
        log = self.ar.log
        for label, v, terms, B, logA, A in self.gm:
            rhs = B * z[v] - dz
            if rhs <= 0:
                continue
            zero = next((u for u, _ in terms if z[u] == 0), None)
            if zero is not None:
                return label, _unit(n, zero, 1), 0
            lg = logA + sum(p * log(z[u]) for u, p in terms)
            if lg < log(rhs) + tol * (1 + abs(lg)):
                g = self.ar.exp(lg - logA)
                c = [0] * n
                for u, p in terms:
                    c[u] += A * p * g / z[u]
                c[v] -= B
                # tangent cut of the concave left side, shifted by the violation
                g_full = self.ar.exp(lg)
                return label, c, rhs - g_full - tol * (rhs + g_full)
        return None


def _unit(n, i, s):
    c = [0] * n
    c[i] = s
    return c


def _initial(system: FeasibilitySystem, ar, log_H_y: float, ln_b: float, bits):
    n = len(system.positions)
    dz = float(system.delta.coef) * math.exp(max(-700.0, float(system.delta.exp - system.L) * ln_b))
    mid = ar.num(Fraction(1, 2)) * (1 + ar.num(dz))
    # radius H b^(-L), but never smaller than needed to contain the box
    r_scaled = max(log_H_y - system.L * ln_b, math.log(math.sqrt(n) * (1 + dz) / 2) + 1e-9)
    radius = ar.exp(ar.num(r_scaled))
    return initial_state(system.positions, [mid] * n, radius, bits)


def _log_unit_ball(n: int) -> float:
    return (n / 2) * math.log(math.pi) - math.lgamma(n / 2 + 1)


def decide(system: FeasibilitySystem, config: DecisionConfig | None = None):
    """Feasible(y) with ``y`` passing :func:`check_point`, or Infeasible once
    the ellipsoid volume drops below ``ε'``.

    Infeasible is ``certified`` only in paper mode.  Raises
    :class:`PrecisionError` when the working precision can no longer carry
    the update.
    """
    config = config or DecisionConfig()
    n = len(system.positions)
    log_eps, log_H = default_config_values(system)
    if config.log_epsilon is not None:
        log_eps = config.log_epsilon
    if config.log_H is not None:
        log_H = config.log_H
    ln_b = _ln_b(system)
    # volume threshold in scaled coordinates
    log_eps_z = log_eps - n * system.L * ln_b
    max_iter = config.max_iterations
    if max_iter is None:
        max_iter = math.ceil(config.iteration_constant * (n * abs(log_eps) + n * n * abs(log_H))) + 1
    bits = config.precision_bits if config.precision_bits is not None else auto_precision(system)
    certified = system.params.mode == "paper"
    trace = config.trace
    volumes = []
    if n == 0:
        return Feasible({}, 0)

    with _arith(bits) as ar:
        oracle = _Oracle(system, ar)
        state = _initial(system, ar, log_H, ln_b, bits)
        log_ball = _log_unit_ball(n)
        while True:
            log_vol = log_ball + state.log_det
            if config.measure_volume:
                volumes.append(log_ball + state.measured_log_det())
            if log_vol < log_eps_z:
                return Infeasible(state.iteration, certified, volumes)
            if state.iteration >= max_iter:
                return Infeasible(state.iteration, False, volumes)
            z = state.center
            hit = oracle.query(z)
            if hit is None:
                y = {v: BPow(Fraction(*_ratio(z[i])), Fraction(system.L)) for i, v in enumerate(system.positions)}
                if check_point(system, y).ok:
                    return Feasible(y, state.iteration, volumes)
                res = separate(system, y, _default_delta_prime(y))
                if res.inside:  # pragma: no cover - both checks share their predicates
                    return Feasible(y, state.iteration, volumes)
                label, depth = res.label, 0
                c = [ar.num(res.c.get(v, 0)) for v in system.positions]
            else:
                label, c, depth = hit
                if not config.deep_cuts:
                    depth = 0
                c = [ar.num(x) if isinstance(x, int) else x for x in c]
            if trace is not None:
                trace.write(json.dumps({"iteration": state.iteration, "constraint": label, "log_volume": log_vol}) + "\n")
            try:
                state = step(state, c, depth)
            except EmptyCut:
                return Infeasible(state.iteration + 1, certified, volumes)


def _ratio(x):
    return x.as_integer_ratio()


def _default_delta_prime(y) -> Fraction:
    """``2^-(10 + bit length of the query)``."""
    bitlen = sum(p.coef.numerator.bit_length() + p.coef.denominator.bit_length() for p in y.values())
    return Fraction(1, 1 << (10 + bitlen))
