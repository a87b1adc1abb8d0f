# %% [markdown]
# # A small Monte Carlo comparison
#
# A handful of replicates per scenario, enough to see the pattern without
# waiting for the full 100-replicate runs (use `dpdspline bench` for those).

# %%
from dpdspline import bench

reports = [
    bench.run_benchmark(bench.Scenario("gaussian", "g1", n=200, eps=eps, seed=1), reps=5)
    for eps in (0.0, 0.1)
]
print(bench.format_table(reports))
