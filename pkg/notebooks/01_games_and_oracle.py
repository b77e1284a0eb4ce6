# %% [markdown]
# # Games, values and the exact oracle
#
# A BWR-game is a digraph whose positions belong to White (maximizer),
# Black (minimizer) or Random (chance).  Every position has an outgoing
# arc, arcs carry integer rewards, and the payoff is the limiting mean
# reward.  Pure stationary strategies are optimal, so small games can be
# solved exactly by enumerating strategy profiles.

# %%
from fractions import Fraction

from bwr.game import apply_potential, check_class_properties, to_dot, validate
from bwr.oracle import describe, evaluate_profile, solve_exact

# %% [markdown]
# White at `w` chooses between a loop of reward 4 at `a` and a Black
# position `b` stuck on a loop of reward 2.

# %%
choice = validate(
    {
        "positions": [{"id": "w", "owner": "white"}, {"id": "a", "owner": "white"}, {"id": "b", "owner": "black"}],
        "arcs": [
            {"from": "w", "to": "a", "reward": 0},
            {"from": "w", "to": "b", "reward": 0},
            {"from": "a", "to": "a", "reward": 4},
            {"from": "b", "to": "b", "reward": 2},
        ],
    }
)
sol = solve_exact(choice)
print(sol.values, describe(choice, sol.max_strategy))

# %% [markdown]
# The game is not ergodic: the top class is `{w, a}` at value 4 and the
# bottom class is `{b}` at value 2.  Both satisfy the eight structural
# class conditions (every list of offending positions is empty).

# %%
T, B = {"w", "a"}, {"b"}
print(check_class_properties(choice, T, B))

# %% [markdown]
# With chance: a fair coin at `r` sends play to `w` or `b`, each of which
# must return to `r`.  The arc `w -> r` pays 6, so the stationary
# distribution (1/2, 1/4, 1/4) gives the value 6/4 everywhere.

# %%
rand = validate(
    {
        "positions": [{"id": "r", "owner": "random"}, {"id": "w", "owner": "white"}, {"id": "b", "owner": "black"}],
        "arcs": [
            {"from": "r", "to": "w", "reward": 0, "prob": {"num": 1, "den": 2}},
            {"from": "r", "to": "b", "reward": 0, "prob": {"num": 1, "den": 2}},
            {"from": "w", "to": "r", "reward": 6},
            {"from": "b", "to": "r", "reward": 0},
        ],
    }
)
print(solve_exact(rand).values)

# %% [markdown]
# A potential transformation `r_x(v, u) = r(v, u) + x(v) - x(u)` adds and
# removes the same amount around every cycle, so values do not move.

# %%
x = {"r": Fraction(1, 3), "w": Fraction(-2), "b": Fraction(5)}
print(solve_exact(rand, rewards=apply_potential(rand, x)).values == solve_exact(rand).values)

# %% [markdown]
# Values of a single profile come from the recurrent classes of its Markov
# chain; `to_dot` renders a game for Graphviz.

# %%
rand_sol = solve_exact(rand)
print(evaluate_profile(rand, rand_sol.max_strategy, rand_sol.min_strategy))
print(to_dot(rand))
