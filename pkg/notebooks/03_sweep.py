# %% [markdown]
# # Success rate against radius
#
# A scaled-down Monte Carlo sweep on random sensor fields: 40 nodes, a few
# draws per cell. The full-size run is `twohop sweep` with node_count=100.

# %%
import numpy as np

from twohop.harness import SweepConfig, sweep

radii = (10, 20, 30, 40, 50, 60)
cfg = SweepConfig(node_count=40, radius_grid=radii, f_grid=(0, 4), runs_per_cell=5,
                  attack_scenario="static-120", max_rounds=300, base_seed=11)
res = sweep(cfg)

# %%
for f in cfg.f_grid:
    print(f"f={f}")
    for scheme in cfg.schemes:
        rates = [res.success_rate(scheme, f, float(r)) for r in radii]
        print(f"  {scheme:8s}", " ".join(f"{x:4.2f}" for x in rates))

# %% [markdown]
# The plain row is an attack-free baseline, repeated for every f: it needs
# nothing but a connected graph, so its curve is the connectivity rate. With
# four attackers the detecting schemes stay close to that baseline, while
# W-MSR needs a denser field before trimming stops cutting it apart.

# %%
rounds = {s: np.nanmean([res.table[(s, 4, float(r))].mean_rounds or np.nan for r in radii[3:]])
          for s in ("scheme1", "scheme2", "wmsr")}
print("mean rounds to converge, f=4, r>=40:", {s: round(float(v), 1) for s, v in rounds.items()})
