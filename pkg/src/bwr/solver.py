"""Extreme values, top and bottom classes and optimal strategies from the
relaxed feasibility systems.

Sides: the top class is governed by the Upper system when searching
(feasible at ``t`` means every value is at most ``t`` plus the softmin
slack) and by the Lower system when testing membership; the bottom class
mirrors this.  Witness points are turned into potentials and then into
locally optimal strategies; an exhaustive best response to such a strategy
gives an exact bound on the values, which tightens the search and certifies
the results.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import IO, Iterable

import gmpy2

from . import oracle
from .ellipsoid import DecisionConfig, auto_precision, decide
from .errors import EnumerationCapError, InconsistencyError, PrecisionError
from .feasibility import Direction, build_system, potentials_from_point, sign_of_sum
from .game import BwrGame, GameError, Owner, check_class_properties, induced_subgame
from .oracle import DEFAULT_CAP, GameSolution, Player
from .params import BPow, GameParams, as_bpow, derive_params, working_game

PAPER_GATE = (3, 1)  # largest (n, k) solved with paper constants unless forced


class Side(str, Enum):
    TOP = "top"
    BOTTOM = "bottom"

    @classmethod
    def parse(cls, which) -> "Side":
        if isinstance(which, Side):
            return which
        if isinstance(which, Player):
            return cls.TOP if which is Player.MAX else cls.BOTTOM
        return {"top": cls.TOP, "max": cls.TOP, "bottom": cls.BOTTOM, "min": cls.BOTTOM}[str(which).lower()]


class NotErgodicError(ValueError):
    """The game has more than one value; ``top`` is the computed top class."""

    def __init__(self, top, t_max, t_min):
        super().__init__(f"game is not ergodic: top class {sorted(top)} (value {t_max}) differs from V (bottom value {t_min})")
        self.top = frozenset(top)
        self.t_max, self.t_min = t_max, t_min


class SizeGateError(ValueError):
    pass


@dataclass
class SolverConfig:
    """``potential_bound`` overrides ``L`` in practical mode (default
    ``n * U``); ``escalations`` is the number of times the b exponent is
    doubled after a failed certification."""

    mode: str = "practical"
    b_exponent: int = 8
    potential_bound: int | None = None
    precision_bits: int | None = None
    cap: int = DEFAULT_CAP
    force: bool = False
    escalations: int = 3
    trace: IO | None = None
    deep_cuts: bool = True


@dataclass
class ClassificationResult:
    t_max: Fraction
    t_min: Fraction
    top: frozenset
    bottom: frozenset
    strategies_top: tuple
    strategies_bottom: tuple
    certified: bool = False
    b_exponent: int | None = None
    notes: list = field(default_factory=list)

    @property
    def ergodic(self) -> bool:
        return self.t_max == self.t_min


# ---------------------------------------------------------------------------
# rational rounding


def _simplest(lo: Fraction, hi: Fraction, lo_open=False, hi_open=False) -> Fraction | None:
    """Smallest-denominator rational in the interval, by a Stern-Brocot walk
    that takes whole runs of equal turns at once."""

    def inside(x):
        return (x > lo if lo_open else x >= lo) and (x < hi if hi_open else x <= hi)

    if lo > hi or (lo == hi and (lo_open or hi_open)):
        return None
    n0 = math.floor(lo)
    for cand in (n0, n0 + 1):
        if inside(Fraction(cand)):
            return Fraction(cand)
    if hi > n0 + 1:  # only possible if n0 + 1 is an excluded endpoint
        return None
    a, b, c, d = n0, 1, n0 + 1, 1
    while True:
        m = Fraction(a + c, b + d)
        if inside(m):
            return m
        if m <= lo:
            x = (lo * b - a) / (c - lo * d)
            k = math.floor(x) if lo_open else math.ceil(x) - 1
            k = max(k, 1)
            a, b = a + k * c, b + k * d
        else:
            y = (c - hi * d) / (hi * b - a)
            k = math.floor(y) if hi_open else math.ceil(y) - 1
            k = max(k, 1)
            c, d = c + k * a, d + k * b


def farey_candidates(lo, hi, max_den: int, limit: int | None = None, lo_open=False, hi_open=False) -> list[Fraction]:
    """All rationals with denominator ``<= max_den`` in the interval, sorted
    (at most ``limit`` of them)."""
    lo, hi = Fraction(lo), Fraction(hi)
    found: list[Fraction] = []

    def walk(lo, hi, lo_open, hi_open):
        if limit is not None and len(found) >= limit:
            return
        s = _simplest(lo, hi, lo_open, hi_open)
        if s is None or s.denominator > max_den:
            return
        found.append(s)
        walk(lo, s, lo_open, True)
        walk(s, hi, True, hi_open)

    walk(lo, hi, lo_open, hi_open)
    return sorted(found)


class IntervalTooWide(ValueError):
    pass


def round_to_rational(lo, hi, max_den: int) -> Fraction:
    """The unique rational with denominator ``<= max_den`` in ``[lo, hi]``."""
    lo, hi = Fraction(lo), Fraction(hi)
    if lo > hi:
        raise ValueError("empty interval")
    found = farey_candidates(lo, hi, max_den, limit=2)
    if not found:
        raise ValueError(f"no rational with denominator <= {max_den} in [{lo}, {hi}]")
    if len(found) > 1:
        raise IntervalTooWide(f"[{lo}, {hi}] contains {found[0]} and {found[1]}")
    return found[0]


# ---------------------------------------------------------------------------
# the pipeline on one game at fixed constants


@dataclass
class _Witness:
    """Strategy read off a feasible point, with its exact guarantee."""

    strategy: dict
    values: dict | None  # responder's best-response values in the working game


@dataclass
class _Extreme:
    value: Fraction  # working units
    candidates: list
    bound: Fraction  # exact strategy bound (>= t_max for TOP, <= t_min for BOTTOM)
    witnesses: list
    early: bool = False  # stopped at the strategy bound before the window closed


class _Run:
    def __init__(self, game: BwrGame, config: SolverConfig, b_exponent: int):
        self.game = game
        self.config = config
        L = config.potential_bound
        if config.mode == "practical" and L is None:
            L = max(1, game.n * game.max_reward)
        self.params: GameParams = derive_params(game, config.mode, b_exponent, L)
        self.W = working_game(game, self.params)
        self.scale = self.params.scale
        self.decisions = 0

    # -- systems and decisions ------------------------------------------------

    def decide(self, direction, t, bound_set, game=None, delta=None):
        system = build_system(game or self.W, self.params, direction, t, bound_set, delta)
        bits = self.config.precision_bits or auto_precision(system)
        for attempt in range(4):
            try:
                self.decisions += 1
                res = decide(system, DecisionConfig(precision_bits=bits, trace=self.config.trace, deep_cuts=self.config.deep_cuts))
                return system, res
            except PrecisionError:
                if attempt == 3 or self.config.precision_bits:
                    raise
                bits *= 4
        raise AssertionError("unreachable")

    def slack(self, side: Side, game=None) -> Fraction:
        """Gap between a δ-feasible threshold and the guaranteed bound."""
        g = game or self.W
        owner = Owner.BLACK if side is Side.TOP else Owner.WHITE
        deg = g.max_out_degree(owner) if g.owned_by(owner) else 1
        f = self.params.delta(0).coef
        return self.params.base.log_of(1 / (1 - f)) + self.params.base.log_of(deg)

    def grid(self, lo, hi, lo_open=False, hi_open=False, limit=None):
        """Candidate values (working units) in the interval."""
        s = self.scale
        return [c * s for c in farey_candidates(Fraction(lo) / s, Fraction(hi) / s, self.params.max_den, limit, lo_open, hi_open)]

    # -- strategies from points ---------------------------------------------

    def strategy_from_point(self, system, y, player: Player, game: BwrGame, S=None):
        """Locally optimal moves w.r.t. the potentials of ``y``; arcs leaving
        ``S`` are avoided.  Ties go to the first arc in (target, reward) order."""
        x = potentials_from_point(system, y)
        inf = gmpy2.inf(1)
        S = set(game.positions) if S is None else set(S)
        strat = {}
        for v in game.owned_by(player.owner):
            best, best_val = None, None
            for i in sorted(game.out_arcs(v), key=lambda i: (game.arcs[i].target, game.arcs[i].reward)):
                a = game.arcs[i]
                xu, xv = x.get(a.target), x.get(v)
                if a.target not in S:
                    val = -inf if player is Player.MAX else inf
                elif xu is None or xv is None:
                    # zero coordinate: potential is +inf (Lower) / -inf (Upper)
                    lower = system.direction is Direction.LOWER
                    if xu is None and xv is None:
                        val = gmpy2.mpfr(a.reward)
                    elif xu is None:
                        val = -inf if lower else inf
                    else:
                        val = inf if lower else -inf
                else:
                    val = a.reward + xv - xu
                if best is None or (val > best_val if player is Player.MAX else val < best_val):
                    best, best_val = i, val
            strat[v] = best
        return strat

    def guarantee(self, game, strategy, player: Player):
        """Exact values the opponent's best response leaves, or None over cap."""
        try:
            return oracle.best_response(game, strategy, player.opponent, self.config.cap)[1]
        except EnumerationCapError:
            return None

    # -- extreme values ---------------------------------------------------------

    def extreme(self, side: Side, early: bool = True) -> _Extreme:
        """Bisection on the search system until the candidate window holds
        one value (or cannot shrink further).  With ``early`` (practical mode
        only) it stops once an exact strategy bound is a candidate."""
        U = self.params.U
        top = side is Side.TOP
        direction = Direction.UPPER if top else Direction.LOWER
        player = Player.MIN if top else Player.MAX
        s = self.slack(side)
        lo, hi = Fraction(0), Fraction(U)
        lo_open = hi_open = False
        bound = Fraction(U) if top else Fraction(0)
        witnesses = []
        min_width = Fraction(1, 4 * self.params.max_den**2) * self.scale
        stopped = False
        while True:
            if top:
                w_lo, w_hi, wo_lo, wo_hi = lo, min(hi + s, bound), lo_open, False
            else:
                w_lo, w_hi, wo_lo, wo_hi = max(lo - s, bound), hi, False, hi_open
            cands = self.grid(w_lo, w_hi, wo_lo, wo_hi, limit=3)
            if not cands:
                raise InconsistencyError(f"no candidate value left in [{w_lo}, {w_hi}]")
            if len(cands) == 1 or hi - lo < min_width:
                break
            # the relaxation cannot separate values closer than the slack, so
            # in practical mode the exact strategy bound is tried as soon as
            # it is a candidate; classify certifies it or escalates
            if early and self.params.mode == "practical" and witnesses and bound in cands:
                stopped = True
                break
            mid = (lo + hi) / 2
            system, res = self.decide(direction, mid, self.W.positions)
            if res.feasible:
                strat = self.strategy_from_point(system, res.y, player, self.W)
                vals = self.guarantee(self.W, strat, player)
                witnesses.append(_Witness(strat, vals))
                if vals is not None:
                    bound = min(bound, max(vals.values())) if top else max(bound, min(vals.values()))
                if top:
                    hi = mid
                else:
                    lo = mid
            elif top:
                lo, lo_open = mid, True
            else:
                hi, hi_open = mid, True
        all_cands = self.grid(w_lo, w_hi, wo_lo, wo_hi)
        # the exact strategy bound is attained by the true value when the
        # witness strategy is optimal; otherwise prefer the extreme candidate
        value = bound if bound in all_cands else (all_cands[-1] if top else all_cands[0])
        return _Extreme(value, all_cands, bound, witnesses, stopped)

    # -- classes ----------------------------------------------------------------

    def closed_support(self, system, y, side: Side, game: BwrGame, w):
        """Largest level set ``S`` of ``y`` containing ``w`` that is closed
        for the side's player and separated from the rest, else None.

        Separated means every constraint at ``v`` in ``S`` keeps
        ``b^s y(v) >= K (δ + outside terms)`` with ``K = 2n``: dropping the
        coordinates outside ``S`` and the slack then costs at most a factor
        ``1 - 1/K``, so ``y`` restricted to ``S`` is a potential certificate
        on the closed subgame ``G[S]`` at ``t - log_b(K/(K-1))``.
        """
        base = self.params.base
        yb = {v: as_bpow(y[v]) for v in game.positions}
        positive = [v for v in game.positions if yb[v].coef > 0]
        if w not in positive:
            return None

        def cmp(u, v):
            return sign_of_sum([yb[u], -yb[v]], base)

        ranked = sorted(positive, key=functools.cmp_to_key(cmp), reverse=True)
        keeper = Owner.WHITE if side is Side.TOP else Owner.BLACK
        K = Fraction(2 * max(self.params.n, 2))
        by_vertex: dict = {}
        for c in system.constraints:
            by_vertex.setdefault(c.vertex, []).append(c)
        for cut in range(len(ranked), ranked.index(w), -1):
            support = set(ranked[:cut])
            if not self._closed(game, support, keeper):
                continue
            if all(
                self._separated(c, support, yb, system.delta, K, base) for v in support for c in by_vertex.get(v, ())
            ):
                return support
        return None

    @staticmethod
    def _separated(c, support, yb, delta, K, base) -> bool:
        terms = [BPow(Fraction(1), c.rhs_exp) * yb[c.vertex], BPow(-K * delta.coef, delta.exp)]
        for u, e, wt in c.terms:
            if u not in support:
                terms.append(BPow(-K * wt, e) * yb[u])
        return sign_of_sum(terms, base) >= 0

    @staticmethod
    def _closed(game, support, keeper):
        for v in support:
            succ = {game.arcs[i].target for i in game.out_arcs(v)}
            if game.owners[v] is keeper:
                if not succ & support:
                    return False
            elif not succ <= support:
                return False
        return True

    def membership(self, w, t, side: Side, game=None):
        """Decide membership of ``w`` at the extreme value ``t``.

        A feasible witness counts only if it has a closed, separated level
        set containing ``w`` (see :meth:`closed_support`).  The relaxation
        slack can let ``w`` be feasible without one; the test is then
        repeated with δ reduced by ``2n`` (twice) before answering no.
        Returns ``(member, (support, system, y))``.
        """
        g = game or self.W
        direction = Direction.LOWER if side is Side.TOP else Direction.UPPER
        delta = self.params.delta(t)
        shrink = Fraction(1, 2 * max(self.params.n, 2))
        for _ in range(3):
            system, res = self.decide(direction, t, (w,), g, delta)
            if not res.feasible:
                return False, None
            support = self.closed_support(system, res.y, side, g, w)
            if support is not None:
                return True, (support, system, res.y)
            delta = delta * shrink
        return False, None

    def compute_class(self, side: Side, t: Fraction, ext: _Extreme | None = None):
        """Per-vertex membership tests, marking whole closed supports at once.
        Returns ``(cls, excluded_certified)``."""
        W = self.W
        members: set = set()
        certified_out: set = set()
        bounds = [wt.values for wt in (ext.witnesses if ext else []) if wt.values is not None]
        for v in W.positions:
            # an exact strategy bound strictly beyond t excludes v
            if any((b[v] < t) if side is Side.TOP else (b[v] > t) for b in bounds):
                certified_out.add(v)
        order = list(W.positions)
        if bounds:
            # likely members first
            ref = bounds[-1]
            order.sort(key=lambda v: (-ref[v] if side is Side.TOP else ref[v], v))
        for w in order:
            if w in members or w in certified_out:
                continue
            member, info = self.membership(w, t, side)
            if not member:
                continue
            members |= info[0]
        return members, certified_out

    # -- strategies on closed subgames --------------------------------------------

    def extract(self, S, t):
        """Optimal pair on G[S] at value t, or raise if a system is infeasible."""
        sub = induced_subgame(self.W, S)
        sys1, r1 = self.decide(Direction.LOWER, t, sub.positions, sub)
        sys2, r2 = self.decide(Direction.UPPER, t, sub.positions, sub)
        if not (r1.feasible and r2.feasible):
            return None
        sigma = self.strategy_from_point(sys1, r1.y, Player.MAX, sub)
        tau = self.strategy_from_point(sys2, r2.y, Player.MIN, sub)
        return sub, sigma, tau

    def certify_pair(self, sub, sigma, tau, t):
        """Both strategies hold the value ``t`` on every position of ``sub``."""
        low = self.guarantee(sub, sigma, Player.MAX)
        high = self.guarantee(sub, tau, Player.MIN)
        if low is None or high is None:
            return None
        return all(low[v] >= t for v in sub.positions) and all(high[v] <= t for v in sub.positions)

    # -- everything -----------------------------------------------------------------

    def classify(self):
        notes = []
        sides = {}
        for side in (Side.TOP, Side.BOTTOM):
            ext = self.extreme(side)
            chosen = None
            if ext.early:
                cls, out = self.compute_class(side, ext.value, ext)
                if cls:
                    chosen = (ext.value, cls, out)
                else:
                    # the strategy bound was not the value: finish the search
                    notes.append(f"{side.value}: no member at candidate {ext.value / self.scale}")
                    ext = self.extreme(side, early=False)
            if chosen is None:
                ordered = sorted(ext.candidates, reverse=side is Side.TOP)
                if ext.value in ordered:
                    ordered.remove(ext.value)
                    ordered.insert(0, ext.value)
                for t in ordered:
                    cls, out = self.compute_class(side, t, ext)
                    if cls:
                        chosen = (t, cls, out)
                        break
                    notes.append(f"{side.value}: no member at candidate {t / self.scale}")
            if chosen is None:
                raise InconsistencyError(f"{side.value} class is empty at every candidate")
            sides[side] = (ext, *chosen)
        (ext_t, t_max, T, out_t), (ext_b, t_min, B, out_b) = sides[Side.TOP], sides[Side.BOTTOM]
        if t_max < t_min:
            raise InconsistencyError(f"t_max {t_max} < t_min {t_min}")
        if t_max == t_min:
            T = B = frozenset(self.W.positions)
        report = check_class_properties(self.W, T, B)
        bad = {c: w for c, w in report.items() if w}
        if bad:
            raise InconsistencyError(f"class structure violated: {bad}")
        pairs, held = {}, {}
        for side, S, t in ((Side.TOP, T, t_max), (Side.BOTTOM, B, t_min)):
            got = self.extract(S, t)
            if got is None:
                raise InconsistencyError(f"strategy systems on the {side.value} class are infeasible")
            sub, sigma, tau = got
            held[side] = bool(self.certify_pair(sub, sigma, tau, t))
            if not held[side]:
                notes.append(f"{side.value} strategies not certified")
            pairs[side] = (sigma, tau)
        cert = held[Side.TOP] and held[Side.BOTTOM]
        if t_max != t_min:
            # a certified class pair pins its class at its value, which
            # excludes it from the other class
            if held[Side.BOTTOM]:
                out_t = out_t | B
            if held[Side.TOP]:
                out_b = out_b | T
            V = set(self.W.positions)
            for side, t, cls, out in ((Side.TOP, t_max, T, out_t), (Side.BOTTOM, t_min, B, out_b)):
                if not V - cls <= out:
                    out |= self.exclude_by_level(side, t, V - cls - out)
                if not V - cls <= out:
                    out |= self.exclusion_witness(side, t)[1]
                # a held pair on the class plus every outsider strictly on the
                # other side of t pins the extreme value at t
                cert = cert and V - cls <= out
        return t_max, t_min, frozenset(T), frozenset(B), pairs[Side.TOP], pairs[Side.BOTTOM], cert, notes

    def neighbour(self, t, below: bool):
        """Nearest candidate value strictly below (above) ``t``, or None."""
        s = self.scale
        x, U = Fraction(t) / s, Fraction(self.params.U) / s
        best = None
        for q in range(1, self.params.max_den + 1):
            p = math.ceil(x * q) - 1 if below else math.floor(x * q) + 1
            c = Fraction(p, q)
            if 0 <= c <= U and (best is None or (c > best if below else c < best)):
                best = c
        return None if best is None else best * s

    def exclude_by_level(self, side: Side, t, pending):
        """Positions certified strictly beyond ``t`` on the side's far end.

        A top-class outsider has value at most the candidate ``t'`` below
        ``t``; the bottom-style membership test at ``t'`` then yields a closed
        support whose values are within the relaxation slack of ``t'``.  The
        slack must stay below the gap to ``t`` for the certificate to count.
        """
        top = side is Side.TOP
        t2 = self.neighbour(t, below=top)
        if t2 is None:
            return set()
        K = 2 * max(self.params.n, 2)
        slack = self.slack(side) + self.params.base.log_of(Fraction(K, K - 1))
        if not slack < abs(t - t2):
            return set()
        far = Side.BOTTOM if top else Side.TOP
        done: set = set()
        for v in sorted(pending):
            if v in done:
                continue
            member, info = self.membership(v, t2, far)
            if member:
                done |= info[0]
        return done

    def exclusion_witness(self, side: Side, t):
        """Strategy from the search system at the extreme value itself: its
        exact guarantee bounds the extreme value and excludes every position
        it keeps strictly on the other side of ``t``."""
        top = side is Side.TOP
        direction = Direction.UPPER if top else Direction.LOWER
        player = Player.MIN if top else Player.MAX
        system, res = self.decide(direction, t, self.W.positions)
        if not res.feasible:
            return None, set()
        strat = self.strategy_from_point(system, res.y, player, self.W)
        vals = self.guarantee(self.W, strat, player)
        if vals is None:
            return None, set()
        bound = max(vals.values()) if top else min(vals.values())
        return bound, {v for v in self.W.positions if (vals[v] < t if top else vals[v] > t)}


def _check_gate(game: BwrGame, config: SolverConfig):
    if config.mode == "paper" and not config.force:
        n_max, k_max = PAPER_GATE
        if game.n > n_max or game.k > k_max:
            raise SizeGateError(
                f"paper mode is limited to n <= {n_max}, k <= {k_max} (got n={game.n}, k={game.k}); use force to override"
            )


def _to_original(run: _Run, value: Fraction) -> Fraction:
    return value / run.scale + run.game.offset


def _attempts(game, config):
    _check_gate(game, config)
    c = config.b_exponent
    rounds = config.escalations + 1 if config.mode == "practical" else 1
    for i in range(rounds):
        yield _Run(game, config, c)
        c *= 2


def find_extreme_value(game: BwrGame, which, config: SolverConfig | None = None) -> Fraction:
    """``t_max`` (which = top / max) or ``t_min`` (bottom / min)."""
    config = config or SolverConfig()
    side = Side.parse(which)
    run = next(_attempts(game, config))
    return _to_original(run, run.extreme(side).value)


def membership_in_class(game: BwrGame, w: str, t, which, config: SolverConfig | None = None) -> bool:
    """Is ``w`` in the top (bottom) class, given the extreme value ``t``?"""
    config = config or SolverConfig()
    side = Side.parse(which)
    run = next(_attempts(game, config))
    tw = (Fraction(t) - game.offset) * run.scale
    return run.membership(w, tw, side)[0]


def compute_class(game: BwrGame, which, config: SolverConfig | None = None, t=None) -> frozenset:
    config = config or SolverConfig()
    side = Side.parse(which)
    run = next(_attempts(game, config))
    ext = run.extreme(side) if t is None else None
    tw = ext.value if t is None else (Fraction(t) - game.offset) * run.scale
    cls, _ = run.compute_class(side, tw, ext)
    if not cls:
        raise InconsistencyError(f"{side.value} class at {t} is empty")
    return frozenset(cls)


def extract_strategies(game: BwrGame, S: Iterable[str], t, config: SolverConfig | None = None) -> tuple:
    """Optimal ``(max_strategy, min_strategy)`` on ``G[S]`` with value ``t``.

    Strategies map positions to arc indices of ``induced_subgame(game, S)``.
    Raises :class:`InconsistencyError` if certification fails after all
    escalations.
    """
    config = config or SolverConfig()
    _check_gate(game, config)
    last = None
    for run in _attempts(game, config):
        tw = (Fraction(t) - game.offset) * run.scale
        got = run.extract(S, tw)
        if got is None:
            last = "strategy systems infeasible"
            continue
        sub, sigma, tau = got
        ok = run.certify_pair(sub, sigma, tau, tw)
        if ok or ok is None:
            return sigma, tau
        last = "best-response certification failed"
    raise InconsistencyError(last)


def classify(game: BwrGame, config: SolverConfig | None = None) -> ClassificationResult:
    """Extreme values, classes and optimal pairs on the induced class games.

    In practical mode a result that fails certification is recomputed with
    the b exponent doubled, up to ``config.escalations`` times; the last
    result is returned with ``certified`` False if none of them certifies.
    """
    config = config or SolverConfig()
    result = None
    errors = []
    for run in _attempts(game, config):
        try:
            t_max, t_min, T, B, top_pair, bottom_pair, cert, notes = run.classify()
        except (InconsistencyError, GameError) as exc:
            errors.append(f"b exponent {run.params.base.exponent_sq}: {exc}")
            continue
        result = ClassificationResult(
            _to_original(run, t_max),
            _to_original(run, t_min),
            T,
            B,
            top_pair,
            bottom_pair,
            cert,
            _exponent(run),
            notes + errors,
        )
        if cert or config.mode == "paper":
            return result
    if result is None:
        raise InconsistencyError("; ".join(errors))
    return result


def _exponent(run: _Run):
    sq = run.params.base.exponent_sq
    r = math.isqrt(sq.numerator // sq.denominator)
    return r if r * r == sq else None


def solve_ergodic(game: BwrGame, config: SolverConfig | None = None) -> GameSolution:
    """Common value and optimal pair of an ergodic game."""
    res = classify(game, config)
    if res.top != frozenset(game.positions) or not res.ergodic:
        raise NotErgodicError(res.top, res.t_max, res.t_min)
    sigma, tau = res.strategies_top
    values = {v: res.t_max for v in game.positions}
    return GameSolution(values, sigma, tau, res.certified)
