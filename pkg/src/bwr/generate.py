"""Seeded random game instances."""

from __future__ import annotations

import random
from fractions import Fraction

from .game import BwrGame, GameError, validate


def _composition(rng: random.Random, total: int, parts: int) -> list[int]:
    cuts = sorted(rng.sample(range(1, total), parts - 1))
    edges = [0] + cuts + [total]
    return [b - a for a, b in zip(edges, edges[1:])]


def generate(n: int, k: int, U: int, D: int, degrees: tuple[int, int] = (1, 3), seed: int = 0) -> BwrGame:
    """Random game with positions ``v0 .. v{n-1}``, exactly ``k`` of them Random.

    Out-degrees are uniform in ``degrees`` (capped by ``n``, and by ``D`` at
    Random positions), targets are distinct, rewards uniform in ``0..U`` and
    Random probabilities a uniform composition of ``D`` into positive parts,
    divided by ``D``.  The same arguments always give the same game.
    """
    lo, hi = degrees
    if n < 1 or not 0 <= k <= n or U < 0 or D < 1:
        raise GameError(f"invalid parameters n={n}, k={k}, U={U}, D={D}")
    if lo < 1 or hi < lo:
        raise GameError(f"invalid degree range {degrees}")
    if lo > n:
        raise GameError(f"minimum out-degree {lo} exceeds n={n}")
    if k and lo > D:
        raise GameError(f"D={D} is too small to split among out-degree {lo}")
    rng = random.Random(seed)
    ids = [f"v{i}" for i in range(n)]
    random_ids = set(rng.sample(ids, k))
    owners = {v: "random" if v in random_ids else rng.choice(("white", "black")) for v in ids}
    arcs = []
    for v in ids:
        cap = min(hi, n, D) if v in random_ids else min(hi, n)
        deg = rng.randint(lo, cap)
        targets = sorted(rng.sample(ids, deg), key=ids.index)
        probs = _composition(rng, D, deg) if v in random_ids else None
        for j, u in enumerate(targets):
            arc = {"from": v, "to": u, "reward": rng.randint(0, U)}
            if probs is not None:
                p = Fraction(probs[j], D)
                arc["prob"] = {"num": p.numerator, "den": p.denominator}
            arcs.append(arc)
    return validate({"positions": [{"id": v, "owner": owners[v]} for v in ids], "arcs": arcs})


def sample_game(seed: int, n_max: int = 5, k_max: int = 2, U_max: int = 3, D_max: int = 2, degrees=(1, 3)) -> BwrGame:
    """A game with sizes themselves drawn from ``seed``: n in 1..n_max,
    k in 0..min(k_max, n), U in 0..U_max, D in 1..D_max."""
    rng = random.Random(f"sizes-{seed}")
    n = rng.randint(1, n_max)
    k = rng.randint(0, min(k_max, n))
    U = rng.randint(0, U_max)
    D = rng.randint(1, D_max)
    return generate(n, k, U, D, degrees, seed)
