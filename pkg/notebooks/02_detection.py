# %% [markdown]
# # Catching attackers
#
# Three kinds of misbehavior on small graphs, and what each scheme makes of them.

# %%
from twohop.adversary import AttackBehavior
from twohop.engine import RunConfig, evaluate, run
from twohop.graph import complete_graph, cycle_graph, layered_graph

x0 = (8, 10, 4, 2, 1)

# %% [markdown]
# A node that jumps to 120 at round 3. The value is out of range, but the
# check that fires is the update rule: 120 is not the mean of what it heard.

# %%
cfg = RunConfig(complete_graph(5), "scheme1", 1, x0,
                [(1, AttackBehavior("static-value", k_on=3, constant=120.0))])
rec = run(cfg)
for v in rec.verdicts[:4]:
    print(v)
print("latency:", evaluate(rec, cfg).latency)

# %% [markdown]
# Relay tampering: the attacker computes its own value honestly but forwards a
# wrong value for one neighbor. Only the neighbors that also heard the victim
# directly can tell.

# %%
g = layered_graph(3, 3)
cfg = RunConfig(g, "scheme2", 1, tuple(range(0, 90, 10)),
                [(5, AttackBehavior("relay-tamper", k_on=2, target=min(g.in_neighbors(5))))])
rec = run(cfg)
print(sorted({(v.detector, v.suspect, v.reason.value) for v in rec.verdicts})[:6])
print("safety:", rec.safety_ok, " outcome:", rec.outcome)

# %% [markdown]
# Two adjacent attackers on a 4-cycle covering for each other. No check
# fires, and the final value drifts. This is the price of an f too large
# for the graph.

# %%
g = cycle_graph(4)
attacks = [(1, AttackBehavior("collusion-pair", k_on=3, partner=2)),
           (2, AttackBehavior("collusion-pair", k_on=3, partner=1))]
bad = run(RunConfig(g, "scheme1", 2, (30, 70, 0, 100), attacks, max_rounds=200))
good = run(RunConfig(g, "scheme1", 2, (30, 70, 0, 100), max_rounds=200))
print("verdicts:", len(bad.verdicts))
print("node 3 ends at", round(float(bad.values[-1][2]), 3), "instead of",
      round(float(good.values[-1][2]), 3))
