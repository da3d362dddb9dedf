# %% [markdown]
# # Temperature sweep
#
# Run the protocol at 41 qubit temperatures, with and without the demon,
# and write one CSV per figure panel.

# %%
import sys
from pathlib import Path

from qdemon.cli import emit_sweep
from qdemon.dynamics import ImperfectionSpec
from qdemon.experiment import default_grid, sweep

n_th = 0.63
out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-sweep")

# %%
ideal = sweep(default_grid(n_th), n_th, ImperfectionSpec.ideal(), config={"n_th": n_th, "model": "ideal"})
noisy = sweep(default_grid(n_th), n_th, ImperfectionSpec(), config={"n_th": n_th, "model": "imperfect"})

# %% [markdown]
# With the demon the cavity gains heat at every temperature, even when the
# qubit is the colder body (negative `dbeta_tilde`).

# %%
print(f"{'dbeta~':>8} {'Q_C demon':>10} {'Q_C plain':>10} {'Q_C noisy':>10}")
for pt, bad in zip(ideal.points[::5], noisy.points[::5]):
    print(f"{pt.dbeta_tilde:8.2f} {pt.demon.Q_C:10.4f} {pt.no_demon.Q_C:10.4f} {bad.demon.Q_C:10.4f}")

# %%
for name, res in (("ideal", ideal), ("imperfect", noisy)):
    for path in emit_sweep(res, out / name):
        print("wrote", path)
