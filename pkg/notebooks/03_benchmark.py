# %% [markdown]
# # Synthetic three-class benchmark
#
# 120 songs in three constructed classes, four snippets each, 5-fold
# song-ordered cross-validation with a reduced network. Takes about four
# minutes on one core.

# %%
from hyperwave.benchmark import run_benchmark

run = run_benchmark(seed=0)
print(run.report_csv.decode())
print(run.result.aggregate)
print("seconds:", {k: round(v) for k, v in run.seconds.items()})

# %% [markdown]
# No song ever contributes snippets to both sides of a fold.

# %%
for train, test in run.plan.folds:
    assert not {run.plan.songs[i] for i in train} & {run.plan.songs[i] for i in test}
print([r.epochs_run for r in run.result.reports])
print([r.song_precision_at for r in run.result.reports])
