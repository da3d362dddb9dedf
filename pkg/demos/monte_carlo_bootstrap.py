# %% [markdown]
# # Finite shots
#
# Emulate 25 000 detected atoms, estimate the thermodynamic quantities from
# the counts and attach bootstrap error bars.

# %%
from qdemon.dynamics import ImperfectionSpec, run_stages
from qdemon.experiment import bootstrap_errors, estimate_report, monte_carlo_run
from qdemon.statespace import ThermalSpec
from qdemon.thermo import slt_report

spec = ThermalSpec(0.5, 0.63)

# %%
for label, imp in (("ideal", ImperfectionSpec.ideal()), ("imperfect", ImperfectionSpec())):
    exact = slt_report(run_stages(spec, imp), spec)
    pre, post = monte_carlo_run(spec, imp, shots=25_000, seed=7)
    est = estimate_report(post, spec, pre)
    err = bootstrap_errors(post, spec, pre, B=1000, seed=8)
    print(f"{label}: {post.detected} of {post.shots} final atoms detected")
    for name in ("n_mean", "Q_C", "Q_Q", "I_readout", "I_feedback"):
        e, s, m = getattr(est, name), err[name], getattr(exact, name)
        print(f"  {name:11s} {e:8.4f} +- {s:.4f}   model {m:8.4f}   ({(e - m) / s:+.1f} sigma)")

# %% [markdown]
# The model column describes the atoms before detection. Misattributed labels
# bias the imperfect estimates, the read-out information most of all, and the
# bootstrap only measures the spread, not that bias.
