import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bwr.game import (
    CLASS_CONDITIONS,
    GameError,
    Owner,
    apply_potential,
    check_canonical,
    check_class_properties,
    induced_subgame,
    m_of_rewards,
    m_of_values,
    to_dot,
    validate,
)
from bwr.generate import sample_game
from bwr.params import denominator_bound, derive_params, lambda_squared

from conftest import make_game

W, B, R = "white", "black", "random"


# -- validate ---------------------------------------------------------------


def test_smallest_game(G_loop):
    assert (G_loop.n, G_loop.k, G_loop.max_reward, G_loop.D) == (1, 0, 5, 1)


def test_probabilities_must_sum_to_one():
    with pytest.raises(GameError, match=r"'r'.*5/6"):
        make_game([("r", R), ("a", W), ("b", W)], [("r", "a", 0, 1, 2), ("r", "b", 0, 1, 3), ("a", "a", 0), ("b", "b", 0)])


def test_two_halves_give_D_2():
    g = make_game([("r", R), ("a", W), ("b", W)], [("r", "a", 0, 1, 2), ("r", "b", 0, 1, 2), ("a", "a", 0), ("b", "b", 0)])
    assert g.D == 2 and g.k == 1


@pytest.mark.parametrize(
    "positions, arcs, message",
    [
        ([("a", W)], [], "no outgoing arc"),
        ([("a", W)], [("a", "a", -1)], "negative reward"),
        ([("a", W)], [("a", "z", 0)], "unknown position"),
        ([("a", W), ("a", B)], [("a", "a", 0)], "duplicate"),
        ([("r", R)], [("r", "r", 0, 0, 1)], "non-positive probability"),
    ],
)
def test_validation_errors(positions, arcs, message):
    with pytest.raises(GameError, match=message):
        make_game(positions, arcs)


def test_random_arc_needs_probability():
    raw = {"positions": [{"id": "r", "owner": "random"}], "arcs": [{"from": "r", "to": "r", "reward": 0}]}
    with pytest.raises(GameError, match="without a probability"):
        validate(raw)


def test_parallel_random_arcs_merge():
    g = make_game([("r", R), ("a", W)], [("r", "a", 1, 1, 3), ("r", "a", 1, 2, 3), ("a", "r", 0)])
    arcs = [g.arcs[i] for i in g.out_arcs("r")]
    assert len(arcs) == 1 and arcs[0].prob == 1 and g.D == 1


def test_parallel_random_arcs_with_unequal_rewards():
    pos, arcs = [("r", R), ("a", W)], [("r", "a", 1, 1, 2), ("r", "a", 3, 1, 2), ("a", "r", 0)]
    with pytest.raises(GameError, match="rewards"):
        make_game(pos, arcs)
    raw = {
        "positions": [{"id": v, "owner": o} for v, o in pos],
        "arcs": [{"from": s, "to": t, "reward": r, "prob": {"num": p, "den": q}} for s, t, r, p, q in arcs[:2]]
        + [{"from": "a", "to": "r", "reward": 0}],
    }
    g = validate(raw, merge_unequal=True)
    assert m_of_rewards(g, [a.reward for a in g.arcs])["r"] == 2


def test_shift_negative_offset():
    raw = {"positions": [{"id": "a", "owner": "white"}], "arcs": [{"from": "a", "to": "a", "reward": -2}]}
    g = validate(raw, shift_negative=True)
    assert g.offset == -2 and g.arcs[0].reward == 0
    assert validate(g.to_json(), shift_negative=True).to_dict() == g.to_dict()


# -- potentials and M operators -----------------------------------------------


def test_apply_potential_substitution():
    g = make_game([("v", W), ("u", W)], [("v", "u", 3), ("u", "v", 0)])
    rx = apply_potential(g, {"v": 1, "u": 2})
    assert rx[[a.source for a in g.arcs].index("v")] == 2


def test_zero_potential_is_identity(G_rand):
    assert list(apply_potential(G_rand, dict.fromkeys(G_rand.positions, 0))) == [a.reward for a in G_rand.arcs]


def test_missing_potential_entry(G_cycle):
    with pytest.raises(KeyError):
        apply_potential(G_cycle, {"w": 0})


@pytest.mark.parametrize("owner, expected", [(W, 5), (B, 2)])
def test_m_of_rewards_controlled(owner, expected):
    g = make_game([("v", owner), ("x", W), ("y", W), ("z", W)], [("v", "x", 2), ("v", "y", 5), ("v", "z", 3)] + [(u, u, 0) for u in "xyz"])
    assert m_of_rewards(g, [a.reward for a in g.arcs])["v"] == expected


def test_m_of_rewards_random(G_rand):
    f = [0 if a.source == "r" and a.target == "w" else 6 if a.source == "r" else 0 for a in G_rand.arcs]
    assert m_of_rewards(G_rand, f)["r"] == 3


@pytest.mark.parametrize("owner, expected", [(W, 4), (B, 1), (R, 3)])
def test_m_of_values(owner, expected):
    vals = {"x": 1, "y": 4} if owner != R else {"x": 4, "y": 2}
    arcs = [("v", "x", 0, 1, 2), ("v", "y", 0, 1, 2)] if owner == R else [("v", "x", 0), ("v", "y", 0)]
    g = make_game([("v", owner), ("x", W), ("y", W)], arcs + [("x", "x", 0), ("y", "y", 0)])
    assert m_of_values(g, {**vals, "v": 0})["v"] == expected


# -- canonical form -----------------------------------------------------------


def test_canonical_cycle(G_cycle):
    rx = apply_potential(G_cycle, {"w": 0, "b": 2})
    assert set(rx) == {3}
    assert check_canonical(G_cycle, {"w": 3, "b": 3}, {"w": 0, "b": 2}).ok


def test_canonical_fails_without_potential(G_cycle):
    report = check_canonical(G_cycle, {"w": 3, "b": 3}, {"w": 0, "b": 0})
    assert not report.c1_ok["w"]
    assert ("C1", "w") in report.failures()


def test_canonical_self_loop(G_loop):
    assert check_canonical(G_loop, {"a": 5}, {"a": 0}).ok


def test_canonical_default_tolerance(G_cycle):
    # a quarter of the rational lower bound on the grid resolution
    report = check_canonical(G_cycle, {"w": 3, "b": 3}, {"w": 0, "b": 2})
    assert report.tol == derive_params(G_cycle, "paper").epsilon_lower / 4
    off = check_canonical(G_cycle, {"w": 3, "b": 3}, {"w": 0, "b": 2 + 2 * report.tol})
    assert not off.ok


# -- parameters ---------------------------------------------------------------


def _game(n, k, U, D):
    """n positions; the first k are Random with D equiprobable arcs to
    consecutive positions, the others White self-loops.  Needs D <= n."""
    ids = [f"p{i}" for i in range(n)]
    positions = [(v, R if i < k else W) for i, v in enumerate(ids)]
    arcs = []
    for i, v in enumerate(ids):
        if i < k:
            arcs += [(v, ids[(i + j) % n], U if j == 0 else 0, 1, D) for j in range(D)]
        else:
            arcs.append((v, v, U))
    return make_game(positions, arcs)


def test_L_formula():
    g = _game(4, 1, 2, 2)
    assert (g.n, g.k, g.D, g.max_reward) == (4, 1, 2, 2)
    assert derive_params(g, "practical").L == 4 * 2 * 1 * 4
    # paper mode scales rewards by D first, so U becomes 4
    paper = derive_params(g, "paper")
    assert paper.U == 4 and paper.L == 4 * 4 * 1 * 4
    assert derive_params(g, "practical", potential_bound=7).L == 7


def test_lambda_k1_D2():
    assert lambda_squared(5, 1, 2) == 32  # Λ = 4√2
    p = derive_params(_game(3, 1, 1, 2), "paper")
    assert p.lambda_sq_cited == 32 and p.lambda_upper >= Fraction(5656854, 10**6)
    assert p.epsilon_sq == Fraction(1, 4 * 36)  # effective Λ = n·D = 6


def test_lambda_k0_is_n(G_cycle):
    p = derive_params(G_cycle)
    assert p.lambda_sq == 4 and p.max_den == 2


def test_effective_bound_is_max():
    assert denominator_bound(7, 1, 2) == 14
    p = derive_params(_game(7, 1, 1, 2))
    assert p.lambda_sq == 196 and p.lambda_sq_cited == 32


def test_base_never_materialized(G_rand):
    p = derive_params(G_rand, "paper")
    assert p.base.n == 3 and p.base.exponent_sq == 16 * p.lambda_sq


@given(st.integers(0, 200))
def test_params_scale_consistent(seed):
    g = sample_game(seed)
    g2 = g.with_rewards([2 * a.reward for a in g.arcs])
    p, p2 = derive_params(g), derive_params(g2)
    assert p2.U == 2 * p.U and p2.L == 2 * p.L
    assert p2.lambda_sq == p.lambda_sq and p2.epsilon_sq == p.epsilon_sq
    assert derive_params(g) == p


# -- induced subgames and class conditions ------------------------------------


def test_induced_subgame(G_choice):
    sub = induced_subgame(G_choice, {"w", "a"})
    assert sub.positions == ("a", "w") and len(sub.arcs) == 2


def test_induced_dead_end(G_choice):
    with pytest.raises(GameError, match="dead end at 'w'"):
        induced_subgame(G_choice, {"w"})


def test_induced_not_closed(G_rand):
    with pytest.raises(GameError, match="not closed"):
        induced_subgame(G_rand, {"r", "w"})


def test_class_conditions_pass(G_choice):
    assert not any(check_class_properties(G_choice, {"w", "a"}, {"b"}).values())


def test_class_conditions_iii(G_choice):
    report = check_class_properties(G_choice, {"a"}, {"b"})
    assert report["iii"] == [("w", "a")]
    assert report["v"] == []


def test_class_conditions_trivial(G_rand):
    V = set(G_rand.positions)
    report = check_class_properties(G_rand, V, V)
    assert set(report) == set(CLASS_CONDITIONS) and not any(report.values())


# -- round trips --------------------------------------------------------------


@given(st.integers(0, 300))
def test_json_round_trip(seed):
    g = sample_game(seed)
    assert validate(json.loads(g.to_json())) == g


def test_dot_shapes(G_rand):
    dot = to_dot(G_rand)
    assert '"w" [shape=box]' in dot and '"b" [shape=diamond]' in dot and '"r" [shape=circle]' in dot
    assert 'label="r=0, p=1/2"' in dot and 'label="r=6"' in dot


# -- properties ---------------------------------------------------------------

potentials = st.dictionaries(st.sampled_from([f"v{i}" for i in range(5)]), st.fractions(-10, 10), min_size=5, max_size=5)


def _cycles(g):
    import networkx as nx

    graph = nx.MultiDiGraph()
    for i, a in enumerate(g.arcs):
        graph.add_edge(a.source, a.target, key=i)
    for cyc in nx.simple_cycles(nx.DiGraph(graph)):
        yield cyc


@given(st.integers(0, 300), potentials)
def test_telescoping(seed, x):
    g = sample_game(seed)
    x = {v: x.get(v, 0) for v in g.positions}
    rx = apply_potential(g, x)
    first = {}
    for i, a in enumerate(g.arcs):
        first.setdefault((a.source, a.target), i)
    for cyc in _cycles(g):
        pairs = list(zip(cyc, cyc[1:] + cyc[:1]))
        idx = [first[p] for p in pairs]
        assert sum(rx[i] for i in idx) == sum(g.arcs[i].reward for i in idx)


values = st.lists(st.fractions(-5, 5), min_size=5, max_size=5)


@given(st.integers(0, 300), values, values, st.fractions(-3, 3))
def test_m_operator_monotone_and_shift(seed, a, d, c):
    g = sample_game(seed)
    lo = {v: a[i] for i, v in enumerate(g.positions)}
    hi = {v: a[i] + abs(d[i]) for i, v in enumerate(g.positions)}
    m_lo, m_hi = m_of_values(g, lo), m_of_values(g, hi)
    assert all(m_lo[v] <= m_hi[v] for v in g.positions)
    shifted = m_of_values(g, {v: lo[v] + c for v in g.positions})
    assert all(shifted[v] == m_lo[v] + c for v in g.positions)


def test_owner_enum_values():
    assert {o.value for o in Owner} == {W, B, R}
