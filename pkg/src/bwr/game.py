"""BWR-game representation, validation and the local operators on it.

A game is a digraph whose positions belong to White (the maximizer), Black
(the minimizer) or Random (nature).  Arc mappings are tuples aligned with
``game.arcs``; vertex mappings are dicts keyed by position id.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence


class GameError(ValueError):
    """Raised for malformed or inconsistent game descriptions."""


class Owner(str, Enum):
    WHITE = "white"
    BLACK = "black"
    RANDOM = "random"


@dataclass(frozen=True)
class Arc:
    source: str
    target: str
    reward: int
    prob: Fraction | None = None


@dataclass(frozen=True)
class BwrGame:
    """A validated game.  Use :func:`validate` to build one.

    ``positions`` is sorted by id, ``arcs`` by (source, target, reward), so
    every iteration order derived from a game is deterministic.
    ``offset`` records a shift applied to all rewards at ingestion; values
    of the stored game plus ``offset`` are values of the original one.
    """

    positions: tuple[str, ...]
    owners: Mapping[str, Owner]
    arcs: tuple[Arc, ...]
    D: int = 1
    offset: int = 0
    _out: Mapping[str, tuple[int, ...]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        out = defaultdict(list)
        for i, arc in enumerate(self.arcs):
            out[arc.source].append(i)
        object.__setattr__(self, "_out", {v: tuple(out[v]) for v in self.positions})

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def k(self) -> int:
        return sum(1 for v in self.positions if self.owners[v] is Owner.RANDOM)

    @property
    def max_reward(self) -> int:
        return max((a.reward for a in self.arcs), default=0)

    def out_arcs(self, v: str) -> tuple[int, ...]:
        """Indices into ``arcs`` of the moves leaving ``v``."""
        return self._out[v]

    def owned_by(self, *owners: Owner) -> list[str]:
        return [v for v in self.positions if self.owners[v] in owners]

    def max_out_degree(self, *owners: Owner) -> int:
        vs = self.owned_by(*owners) if owners else self.positions
        return max((len(self._out[v]) for v in vs), default=1)

    def with_rewards(self, rewards: Sequence[int]) -> "BwrGame":
        arcs = tuple(Arc(a.source, a.target, int(r), a.prob) for a, r in zip(self.arcs, rewards))
        return BwrGame(self.positions, self.owners, arcs, self.D, self.offset)

    def to_dict(self) -> dict:
        arcs = []
        for a in self.arcs:
            d = {"from": a.source, "to": a.target, "reward": a.reward + self.offset}
            if a.prob is not None:
                d["prob"] = {"num": a.prob.numerator, "den": a.prob.denominator}
            arcs.append(d)
        return {
            "positions": [{"id": v, "owner": self.owners[v].value} for v in self.positions],
            "arcs": arcs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _parse_prob(raw: Any) -> Fraction:
    if isinstance(raw, Mapping):
        return Fraction(int(raw["num"]), int(raw["den"]))
    if isinstance(raw, (int, Fraction, str)):
        return Fraction(raw)
    raise GameError(f"cannot parse probability {raw!r}")


def validate(raw: Mapping | str, *, shift_negative: bool = False, merge_unequal: bool = False) -> BwrGame:
    """Check a raw description (dict in the JSON schema, or its text) and build a game.

    Parallel arcs leaving a Random position are merged with their
    probabilities summed.  Merging arcs with different rewards is refused
    unless ``merge_unequal`` is set, in which case they are kept as separate
    arcs; every operator treats such a bundle like one arc carrying the
    probability-weighted reward.

    With ``shift_negative`` the rewards are shifted so the minimum is zero
    and the shift is remembered in ``offset``; otherwise negative rewards
    are an error.
    """
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise GameError(f"invalid JSON: {exc}") from None
    try:
        raw_positions = list(raw["positions"])
        raw_arcs = list(raw["arcs"])
    except (KeyError, TypeError):
        raise GameError("description needs 'positions' and 'arcs' lists") from None

    owners: dict[str, Owner] = {}
    for p in raw_positions:
        pid = str(p["id"])
        if pid in owners:
            raise GameError(f"duplicate position id {pid!r}")
        try:
            owners[pid] = Owner(str(p["owner"]).lower())
        except ValueError:
            raise GameError(f"position {pid!r} has unknown owner {p['owner']!r}") from None
    if not owners:
        raise GameError("game has no positions")

    arcs = []
    for a in raw_arcs:
        src, dst = str(a["from"]), str(a["to"])
        for end in (src, dst):
            if end not in owners:
                raise GameError(f"arc {src}->{dst} references unknown position {end!r}")
        reward = a["reward"]
        if isinstance(reward, bool) or int(reward) != reward:
            raise GameError(f"arc {src}->{dst} has non-integer reward {reward!r}")
        reward = int(reward)
        if owners[src] is Owner.RANDOM:
            if a.get("prob") is None:
                raise GameError(f"arc {src}->{dst} leaves random position {src!r} without a probability")
            prob = _parse_prob(a["prob"])
            if prob <= 0:
                raise GameError(f"arc {src}->{dst} has non-positive probability {prob}")
        else:
            if a.get("prob") is not None:
                raise GameError(f"arc {src}->{dst} carries a probability but {src!r} is not random")
            prob = None
        arcs.append(Arc(src, dst, reward, prob))

    offset = 0
    low = min((a.reward for a in arcs), default=0)
    if low < 0:
        if not shift_negative:
            bad = next(a for a in arcs if a.reward < 0)
            raise GameError(f"negative reward {bad.reward} on arc {bad.source}->{bad.target}")
        offset = low
        arcs = [Arc(a.source, a.target, a.reward - low, a.prob) for a in arcs]

    arcs = _merge_random_parallels(arcs, owners, merge_unequal)

    by_source = defaultdict(list)
    for a in arcs:
        by_source[a.source].append(a)
    for v, owner in owners.items():
        if not by_source[v]:
            raise GameError(f"position {v!r} has no outgoing arc")
        if owner is Owner.RANDOM:
            total = sum(a.prob for a in by_source[v])
            if total != 1:
                raise GameError(f"probabilities at random position {v!r} sum to {total} ≠ 1")

    dens = [a.prob.denominator for a in arcs if a.prob is not None]
    D = math.lcm(*dens) if dens else 1
    return BwrGame(tuple(sorted(owners)), owners, tuple(sorted(arcs, key=_arc_key)), D, offset)


def _arc_key(a: Arc):
    return (a.source, a.target, a.reward)


def _merge_random_parallels(arcs, owners, merge_unequal):
    grouped: dict[tuple, list[Arc]] = defaultdict(list)
    order = []
    for a in arcs:
        key = (a.source, a.target) if owners[a.source] is Owner.RANDOM else id(a)
        if key not in grouped:
            order.append(key)
        grouped[key].append(a)
    merged = []
    for key in order:
        group = grouped[key]
        if len(group) == 1:
            merged.append(group[0])
            continue
        rewards = {a.reward for a in group}
        if len(rewards) > 1 and not merge_unequal:
            src, dst = key
            raise GameError(f"parallel arcs {src}->{dst} from a random position have different rewards {sorted(rewards)}")
        by_reward = defaultdict(Fraction)
        for a in group:
            by_reward[a.reward] += a.prob
        merged.extend(Arc(key[0], key[1], r, p) for r, p in by_reward.items())
    return merged


def load(path, **kwargs) -> BwrGame:
    with open(path) as fh:
        return validate(fh.read(), **kwargs)


def scale_rewards(game: BwrGame, factor: int) -> BwrGame:
    return game.with_rewards([a.reward * factor for a in game.arcs])


# ---------------------------------------------------------------------------
# potentials and local operators


def apply_potential(game: BwrGame, x: Mapping[str, Any]) -> tuple:
    """Transformed rewards ``r(v,u) + x(v) - x(u)``, aligned with ``game.arcs``."""
    missing = [v for v in game.positions if v not in x]
    if missing:
        raise KeyError(f"potential undefined at {missing}")
    return tuple(a.reward + x[a.source] - x[a.target] for a in game.arcs)


def _aggregate(game: BwrGame, v: str, pick) -> Any:
    idx = game.out_arcs(v)
    owner = game.owners[v]
    if owner is Owner.WHITE:
        return max(pick(i) for i in idx)
    if owner is Owner.BLACK:
        return min(pick(i) for i in idx)
    return sum(game.arcs[i].prob * pick(i) for i in idx)


def m_of_rewards(game: BwrGame, f: Sequence) -> dict:
    """Local max / min / expectation of an arc mapping at every position."""
    return {v: _aggregate(game, v, lambda i: f[i]) for v in game.positions}


def m_of_values(game: BwrGame, g: Mapping[str, Any]) -> dict:
    """Local max / min / expectation of successor values at every position."""
    return {v: _aggregate(game, v, lambda i: g[game.arcs[i].target]) for v in game.positions}


@dataclass
class CanonicalReport:
    c1_ok: dict
    c2_ok: dict
    tol: Any

    @property
    def ok(self) -> bool:
        return all(self.c1_ok.values()) and all(self.c2_ok.values())

    def failures(self) -> list:
        return [("C1", v) for v, ok in self.c1_ok.items() if not ok] + [
            ("C2", e) for e, ok in self.c2_ok.items() if not ok
        ]


def check_canonical(game: BwrGame, mu: Mapping, x: Mapping, tol=None) -> CanonicalReport:
    """Check whether potentials ``x`` bring the game to canonical form with values ``mu``.

    C1 is checked within ``tol`` per position; C2 requires, for every
    controlled arc whose transformed reward is within ``tol`` of ``mu(v)``,
    that ``mu(u) == mu(v)`` exactly.  ``tol`` defaults to a quarter of the
    value-grid resolution of the game.
    """
    if tol is None:
        from .params import derive_params

        tol = derive_params(game, "paper").epsilon_lower / 4
    rx = apply_potential(game, x)
    m_mu = m_of_values(game, mu)
    m_rx = m_of_rewards(game, rx)
    c1 = {v: abs(mu[v] - m_mu[v]) <= tol and abs(mu[v] - m_rx[v]) <= tol for v in game.positions}
    c2 = {}
    for i, a in enumerate(game.arcs):
        if game.owners[a.source] is Owner.RANDOM:
            continue
        if abs(rx[i] - mu[a.source]) <= tol:
            c2[(a.source, a.target)] = c2.get((a.source, a.target), True) and mu[a.target] == mu[a.source]
    return CanonicalReport(c1, c2, tol)


def induced_subgame(game: BwrGame, S: Iterable[str]) -> BwrGame:
    """Restriction of the game to ``S``.

    Raises :class:`GameError` if a Random position of ``S`` can leave ``S``
    ("not closed") or a controlled position keeps no move inside ``S``
    ("dead end").
    """
    S = set(S)
    if not S:
        raise GameError("induced subgame of an empty set")
    unknown = S - set(game.positions)
    if unknown:
        raise GameError(f"unknown positions {sorted(unknown)}")
    keep = []
    for v in sorted(S):
        inside = [game.arcs[i] for i in game.out_arcs(v) if game.arcs[i].target in S]
        if game.owners[v] is Owner.RANDOM:
            if len(inside) != len(game.out_arcs(v)):
                leaving = next(game.arcs[i].target for i in game.out_arcs(v) if game.arcs[i].target not in S)
                raise GameError(f"not closed: random position {v!r} has an arc to {leaving!r} outside the set")
        elif not inside:
            raise GameError(f"dead end at {v!r}: no move stays inside the set")
        keep.extend(inside)
    owners = {v: game.owners[v] for v in S}
    dens = [a.prob.denominator for a in keep if a.prob is not None]
    return BwrGame(tuple(sorted(S)), owners, tuple(keep), math.lcm(*dens) if dens else 1, game.offset)


CLASS_CONDITIONS = ("i", "ii", "iii", "iv", "v", "vi", "vii", "viii")


def check_class_properties(game: BwrGame, T: Iterable[str], B: Iterable[str]) -> dict:
    """Evaluate the eight structural conditions every top class ``T`` and
    bottom class ``B`` must satisfy.

    Returns ``{condition: witnesses}``; a condition holds iff its witness
    list is empty.  Witnesses are offending arcs ``(v, u)`` for the four
    forbidden-arc conditions and offending positions for the four
    existence conditions.
    """
    T, B = set(T), set(B)
    W, Bl, R = Owner.WHITE, Owner.BLACK, Owner.RANDOM
    own = game.owners
    out = {c: [] for c in CLASS_CONDITIONS}
    for a in game.arcs:
        v, u = a.source, a.target
        if own[v] in (W, R) and v in B and u not in B:
            out["i"].append((v, u))
        if own[v] in (Bl, R) and v in T and u not in T:
            out["ii"].append((v, u))
        if own[v] is W and v not in T and u in T:
            out["iii"].append((v, u))
        if own[v] is Bl and v not in B and u in B:
            out["iv"].append((v, u))
    for v in game.positions:
        succ = {game.arcs[i].target for i in game.out_arcs(v)}
        if own[v] is W and v in T and not succ & T:
            out["v"].append(v)
        if own[v] is Bl and v in B and not succ & B:
            out["vi"].append(v)
        if own[v] in (Bl, R) and v not in T and not succ - T:
            out["vii"].append(v)
        if own[v] in (W, R) and v not in B and not succ - B:
            out["viii"].append(v)
    for c in out:
        out[c] = sorted(set(out[c]))
    return out


# ---------------------------------------------------------------------------
# DOT export

_SHAPES = {Owner.WHITE: "box", Owner.BLACK: "diamond", Owner.RANDOM: "circle"}


def to_dot(game: BwrGame, name: str = "G") -> str:
    lines = [f"digraph {name} {{"]
    for v in game.positions:
        lines.append(f'  "{v}" [shape={_SHAPES[game.owners[v]]}];')
    for a in game.arcs:
        label = f"r={a.reward + game.offset}"
        if a.prob is not None:
            label += f", p={a.prob.numerator}/{a.prob.denominator}"
        lines.append(f'  "{a.source}" -> "{a.target}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
