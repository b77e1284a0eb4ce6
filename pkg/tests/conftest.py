import json
import math
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from bwr.feasibility import Direction
from bwr.game import apply_potential, load, m_of_rewards, validate

CORPUS = Path(__file__).parent / "corpus"
EXPECTED = CORPUS / "expected.json"

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def corpus_names():
    return sorted(p.stem for p in CORPUS.glob("G_*.json"))


def corpus_game(name):
    return load(CORPUS / f"{name}.json")


def expected():
    return json.loads(EXPECTED.read_text())


def make_game(positions, arcs):
    """Game from ``[(id, owner)]`` and ``[(from, to, reward[, num, den])]``."""
    raw_arcs = []
    for a in arcs:
        d = {"from": a[0], "to": a[1], "reward": a[2]}
        if len(a) > 3:
            d["prob"] = {"num": a[3], "den": a[4]}
        raw_arcs.append(d)
    return validate({"positions": [{"id": v, "owner": o} for v, o in positions], "arcs": raw_arcs})


def looped(n, U=3):
    """n White positions on a cycle, each with a self-loop of reward U: the
    Lower system at t <= U is just the box."""
    ids = [f"v{i}" for i in range(n)]
    arcs = [(v, v, U) for v in ids] + [(ids[i], ids[(i + 1) % n], 0) for i in range(n)]
    return make_game([(v, "white") for v in ids], arcs)


def volume_bound_ok(log_volumes, n):
    drop = 1 / (2 * (n + 1))
    return all(b - a <= -drop + 1e-9 for a, b in zip(log_volumes, log_volumes[1:]))


@pytest.fixture(scope="session")
def G_loop():
    return corpus_game("G_loop")


@pytest.fixture(scope="session")
def G_cycle():
    return corpus_game("G_cycle")


@pytest.fixture(scope="session")
def G_choice():
    return corpus_game("G_choice")


@pytest.fixture(scope="session")
def G_rand():
    return corpus_game("G_rand")


@pytest.fixture(scope="session")
def G_rand2():
    return corpus_game("G_rand2")


# -- exact feasible points of the unrelaxed systems -----------------------------
#
# In practical mode b = n^c is an integer, so y = b^(-x) (Lower) or b^(x)
# (Upper) is an exact rational for integer potentials x.  Such a y satisfies
# the unrelaxed Lower system at every t <= min_v M[r_x](v) and the Upper
# system at every t >= max_v M[r_x](v).


def b_int(params):
    c = math.isqrt(params.base.exponent_sq.numerator)
    assert params.base.exponent_sq == c * c
    return params.base.n**c


def threshold_of(game, x, direction):
    m = m_of_rewards(game, apply_potential(game, x))
    return min(m.values()) if direction is Direction.LOWER else max(m.values())


def point_of(params, x, direction):
    b = b_int(params)
    sign = -1 if direction is Direction.LOWER else 1
    return {v: Fraction(b) ** (sign * e) for v, e in x.items()}


def random_potentials(rng, game, params, direction, tries=200):
    """Integer potentials in [0, L] whose point is feasible at some t in [0, U]."""
    for _ in range(tries):
        x = {v: rng.randint(0, params.L) for v in game.positions}
        t = threshold_of(game, x, direction)
        if 0 <= t <= params.U:
            return x, t
    x = dict.fromkeys(game.positions, 0)
    return x, threshold_of(game, x, direction)


def margin(params, t):
    """Rational lower bound on the margin box side ``b^(-t) δ(t)``."""
    d = params.delta(t)
    return d.coef * Fraction(b_int(params)) ** (math.floor(d.exp - t))


def feasible_pool(rng, game, params, direction, size=6):
    """``(t, points)``: unrelaxed-feasible points sharing one threshold."""
    xs = [random_potentials(rng, game, params, direction) for _ in range(size)]
    xs.append((dict.fromkeys(game.positions, 0), threshold_of(game, dict.fromkeys(game.positions, 0), direction)))
    ts = [t for _, t in xs]
    t = min(ts) if direction is Direction.LOWER else max(ts)
    t = min(max(t, 0), params.U)
    return t, [point_of(params, x, direction) for x, _ in xs]


def sample_hull(rng, points, positions, s=0, with_zero=True):
    """Random convex combination of ``points`` (and 0), shifted by up to ``s``
    on a random subset of coordinates."""
    w = [Fraction(rng.randint(0, 8)) for _ in points]
    total = sum(w) + (rng.randint(0, 8) if with_zero else 0)
    if total == 0:
        w[0], total = Fraction(1), 1
    y = {v: sum(wi * p[v] for wi, p in zip(w, points)) / total for v in positions}
    if s:
        for v in positions:
            if rng.random() < 0.5:
                y[v] += s
    return y


# -- acceptance report -------------------------------------------------------------
#
# Tests marked ``acceptance("ACn", text)`` get one PASS/FAIL line each in the
# terminal summary.  A strict xfail is reported as FAIL with its reason.

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    cid, text = mark.args
    if rep.passed and not hasattr(rep, "wasxfail"):
        status = "PASS"
    elif hasattr(rep, "wasxfail"):
        status = f"FAIL (known: {rep.wasxfail})"
    else:
        status = "FAIL"
    _ACCEPTANCE[cid] = f"{cid} {status}: {text} [{rep.duration:.1f}s]"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_ACCEPTANCE, key=lambda c: int(c[2:])):
        terminalreporter.write_line(_ACCEPTANCE[cid])
