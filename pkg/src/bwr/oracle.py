"""Ground-truth solver: enumeration of pure stationary strategies and exact
evaluation of the resulting weighted Markov chains.

No floating point is used anywhere in this module.  A pure strategy is a
dict mapping each position of its owner to the index (into ``game.arcs``)
of the chosen move.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import networkx as nx

from . import exact
from .errors import EnumerationCapError, InconsistencyError
from .game import BwrGame, Owner

DEFAULT_CAP = 10**7


class Player(str, Enum):
    MAX = "max"
    MIN = "min"

    @property
    def owner(self) -> Owner:
        return Owner.WHITE if self is Player.MAX else Owner.BLACK

    @property
    def opponent(self) -> "Player":
        return Player.MIN if self is Player.MAX else Player.MAX


PureStrategy = dict


@dataclass
class GameSolution:
    values: dict
    max_strategy: PureStrategy
    min_strategy: PureStrategy
    certified: bool


def _sorted_moves(game: BwrGame, v: str) -> list[int]:
    return sorted(game.out_arcs(v), key=lambda i: (game.arcs[i].target, game.arcs[i].reward))


def strategy_count(game: BwrGame, player: Player) -> int:
    return math.prod(len(game.out_arcs(v)) for v in game.owned_by(player.owner))


def enumerate_pure_strategies(game: BwrGame, player: Player, cap: int = DEFAULT_CAP) -> Iterator[PureStrategy]:
    """All pure stationary strategies of ``player``, lexicographically by
    position id, then target id."""
    count = strategy_count(game, player)
    if count > cap:
        raise EnumerationCapError(f"{player.value} has {count} strategies, cap is {cap}")
    positions = game.owned_by(player.owner)
    choices = [_sorted_moves(game, v) for v in positions]
    return (dict(zip(positions, combo)) for combo in itertools.product(*choices))


def describe(game: BwrGame, strategy: PureStrategy) -> dict:
    """Strategy as ``{position: target id}``."""
    return {v: game.arcs[i].target for v, i in sorted(strategy.items())}


def _bottom_components(succ: Mapping[str, list]) -> list[list[str]]:
    g = nx.DiGraph()
    g.add_nodes_from(succ)
    g.add_edges_from((v, u) for v, row in succ.items() for u, _ in row)
    cond = nx.condensation(g)
    members = cond.graph["mapping"]
    comps: dict[int, list[str]] = {}
    for v, c in members.items():
        comps.setdefault(c, []).append(v)
    return [sorted(comps[c]) for c in cond.nodes if cond.out_degree(c) == 0]


def evaluate_profile(
    game: BwrGame, sigma: PureStrategy, tau: PureStrategy, rewards: Sequence | None = None
) -> dict:
    """Exact limiting mean payoff from every start position under (sigma, tau).

    ``rewards`` optionally overrides the arc rewards (aligned with
    ``game.arcs``), e.g. with a potential-transformed reward mapping.
    """
    rewards = [a.reward for a in game.arcs] if rewards is None else rewards
    succ: dict[str, list] = {}
    gain_rate: dict[str, Fraction] = {}
    for v in game.positions:
        owner = game.owners[v]
        if owner is Owner.RANDOM:
            row: dict[str, Fraction] = {}
            c = Fraction(0)
            for i in game.out_arcs(v):
                a = game.arcs[i]
                row[a.target] = row.get(a.target, Fraction(0)) + a.prob
                c += a.prob * Fraction(rewards[i])
            succ[v] = sorted(row.items())
            gain_rate[v] = c
        else:
            i = (sigma if owner is Owner.WHITE else tau)[v]
            succ[v] = [(game.arcs[i].target, Fraction(1))]
            gain_rate[v] = Fraction(rewards[i])

    values: dict[str, Fraction] = {}
    for comp in _bottom_components(succ):
        values.update(dict.fromkeys(comp, _class_gain(comp, succ, gain_rate)))

    transient = [v for v in game.positions if v not in values]
    if transient:
        pos = {v: j for j, v in enumerate(transient)}
        A = [[Fraction(0)] * len(transient) for _ in transient]
        rhs = [Fraction(0)] * len(transient)
        for j, v in enumerate(transient):
            A[j][j] += 1
            for u, p in succ[v]:
                if u in pos:
                    A[j][pos[u]] -= p
                else:
                    rhs[j] += p * values[u]
        values.update(zip(transient, exact.solve(A, rhs)))
    return {v: values[v] for v in game.positions}


def _class_gain(comp, succ, gain_rate) -> Fraction:
    if len(comp) == 1:
        return gain_rate[comp[0]]
    # stationary distribution: pi (P - I) = 0 on all but one column, sum(pi) = 1
    pos = {v: j for j, v in enumerate(comp)}
    m = len(comp)
    A = [[Fraction(0)] * m for _ in range(m)]
    for i, v in enumerate(comp):
        for u, p in succ[v]:
            A[pos[u]][i] += p
        A[i][i] -= 1
    A[m - 1] = [Fraction(1)] * m
    rhs = [Fraction(0)] * (m - 1) + [Fraction(1)]
    pi = exact.solve(A, rhs)
    return sum(p * gain_rate[v] for p, v in zip(pi, comp))


def _fixed_pair(player: Player, mine: PureStrategy, theirs: PureStrategy):
    return (mine, theirs) if player is Player.MAX else (theirs, mine)


def best_response(
    game: BwrGame, fixed: PureStrategy, responder: Player, cap: int = DEFAULT_CAP, rewards: Sequence | None = None
) -> tuple[PureStrategy, dict]:
    """Responder's uniformly optimal reply to the opponent's fixed strategy.

    Exhaustive over the responder's strategies; ties go to the
    lexicographically first strategy.
    """
    better = max if responder is Player.MAX else min
    evaluated = []
    for s in enumerate_pure_strategies(game, responder, cap):
        sigma, tau = _fixed_pair(responder, s, fixed)
        evaluated.append((s, evaluate_profile(game, sigma, tau, rewards)))
    best = {v: better(vals[v] for _, vals in evaluated) for v in game.positions}
    for s, vals in evaluated:
        if vals == best:
            return s, vals
    raise InconsistencyError("no uniformly optimal response found")


def solve_exact(game: BwrGame, cap: int = DEFAULT_CAP, rewards: Sequence | None = None) -> GameSolution:
    """Values by min over Min strategies of max over Max strategies,
    checked against the max-min order, with a saddle-point profile."""
    n_profiles = strategy_count(game, Player.MAX) * strategy_count(game, Player.MIN)
    if n_profiles > cap:
        raise EnumerationCapError(f"{n_profiles} strategy profiles, cap is {cap}")
    sigmas = list(enumerate_pure_strategies(game, Player.MAX, cap))
    taus = list(enumerate_pure_strategies(game, Player.MIN, cap))
    table = [[evaluate_profile(game, s, t, rewards) for t in taus] for s in sigmas]
    V = game.positions
    # guarantees of each strategy: what Max secures with sigma_i, Min with tau_j
    secured_by_max = [{v: min(row[j][v] for j in range(len(taus))) for v in V} for row in table]
    secured_by_min = [{v: max(table[i][j][v] for i in range(len(sigmas))) for v in V} for j in range(len(taus))]
    minmax = {v: min(s[v] for s in secured_by_min) for v in V}
    maxmin = {v: max(s[v] for s in secured_by_max) for v in V}
    if minmax != maxmin:
        diff = sorted(v for v in V if minmax[v] != maxmin[v])
        raise InconsistencyError(f"max-min differs from min-max at {diff}")
    i_star = next((i for i, s in enumerate(secured_by_max) if s == maxmin), None)
    j_star = next((j for j, s in enumerate(secured_by_min) if s == minmax), None)
    certified = i_star is not None and j_star is not None
    if not certified:
        raise InconsistencyError("no uniformly optimal pure stationary profile found")
    return GameSolution(minmax, sigmas[i_star], taus[j_star], certified)


def guaranteed_values(game: BwrGame, strategy: PureStrategy, player: Player, cap: int = DEFAULT_CAP) -> dict:
    """What ``player`` secures from each position by playing ``strategy``:
    the values of the opponent's best response."""
    return best_response(game, strategy, player.opponent, cap)[1]
