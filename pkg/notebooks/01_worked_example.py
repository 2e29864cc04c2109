# %% [markdown]
# # One round by hand
#
# A nine-node undirected network, fault free. We follow node 2 through its
# first update and compare with the message the engine actually sends.

# %%
from fractions import Fraction

from twohop.engine import RunConfig, run
from twohop.graph import DirectedGraph
from twohop.harness import PHI2_EDGES, PHI2_X0

g = DirectedGraph.from_edges(9, PHI2_EDGES, undirected=True)
print("in-neighbors of 2:", sorted(g.in_neighbors(2)))
print("initial values:", PHI2_X0)

# %%
# node 2 averages itself with its four neighbors
heard = [PHI2_X0[j - 1] for j in sorted(g.in_neighbors(2) | {2})]
by_hand = Fraction(sum(heard), len(heard))
by_hand

# %%
rec = run(RunConfig(g, "scheme1", 1, PHI2_X0, arithmetic="exact", backend="reference",
                    keep_messages=True, max_rounds=100))
msg = rec.messages[1][2]
print("engine:", msg.own_value, " by hand:", by_hand)
print("relayed:", dict(msg.neighbor_values))
print("declared malicious:", set(msg.declared_malicious))

# %% [markdown]
# Every receiver of this message can redo the average from the relayed
# values. That is the whole trick: an update that does not match its own
# inputs is evidence.

# %%
print(rec.outcome, "after", rec.rounds_to_converge, "rounds; spread", float(rec.final_spread))
