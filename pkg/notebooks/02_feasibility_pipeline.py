# %% [markdown]
# # From canonical forms to an ellipsoid run
#
# The value of a game is at least `t` from every position exactly when
# some potential `x` makes the transformed local rewards clear `t`.
# Writing `y = b^(-x)` and replacing max and min by softmax versions
# turns this into a convex system of linear and geometric-mean
# constraints, which the ellipsoid method decides.  Binary search over
# `t` on the grid of possible values then gives the extreme values.

# %%
import io
import json
from fractions import Fraction

from bwr.ellipsoid import DecisionConfig, decide
from bwr.feasibility import Direction, build_system, check_point
from bwr.game import validate
from bwr.generate import generate
from bwr.oracle import solve_exact
from bwr.params import derive_params
from bwr.solver import SolverConfig, classify

# %% [markdown]
# A two-position BW cycle with rewards 5 and 1 has value 3.  In practical
# mode the softmax base is `b = n^8` and the potential bound is `L = nU`.

# %%
cycle = validate(
    {
        "positions": [{"id": "w", "owner": "white"}, {"id": "b", "owner": "black"}],
        "arcs": [{"from": "w", "to": "b", "reward": 5}, {"from": "b", "to": "w", "reward": 1}],
    }
)
params = derive_params(cycle, "practical")
print(params.U, params.L, params.max_den)

# %% [markdown]
# The Lower system at `t = 3` is feasible and the returned point passes
# the exact check; at `t = 4` the volume runs out.  The trace records the
# constraint behind every cut and the shrinking log volume.

# %%
for t in (3, 4):
    system = build_system(cycle, params, Direction.LOWER, t, cycle.positions)
    buf = io.StringIO()
    res = decide(system, DecisionConfig(trace=buf))
    rows = [json.loads(line) for line in buf.getvalue().splitlines()]
    print(t, res.feasible, res.iterations, rows[-1] if rows else None)
    if res.feasible:
        print(check_point(system, res.y).ok)

# %% [markdown]
# `classify` finds both extreme values, the top and bottom classes and a
# pair of optimal strategies on each class game, certified by exact best
# responses.  Here it is compared with the oracle on a random game.

# %%
g = generate(5, 2, 3, 2, (1, 3), seed=42)
res = classify(g)
vals = solve_exact(g).values
print(res.t_max, res.t_min, sorted(res.top), sorted(res.bottom), res.certified)
print(max(vals.values()), min(vals.values()))

# %% [markdown]
# Paper mode uses the proven constants: base `n^(4Λ)` kept symbolically,
# slack `δ(t)` and volume threshold from the analysis.  It is only
# practical for tiny games.

# %%
res = classify(cycle, SolverConfig(mode="paper"))
print(res.t_max, res.t_min, res.certified, Fraction(3) == res.t_max)
