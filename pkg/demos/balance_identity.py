# %% [markdown]
# # Where the heat comes from
#
# For one cold qubit, split the cavity's entropy-weighted heat into the
# information the demon spends and the distance from equilibrium it leaves
# behind.

# %%
from qdemon.dynamics import ImperfectionSpec, run_stages
from qdemon.statespace import ThermalSpec
from qdemon.thermo import slt_report

spec = ThermalSpec(p_e=0.1, n_th=0.63)
print(f"dbeta_tilde = {spec.dbeta_tilde:.3f}  (qubit colder than the cavity)")

# %%
trace = run_stages(spec, ImperfectionSpec.ideal())
r = slt_report(trace, spec)

print(f"Q_C                 {r.Q_C: .6f} photons")
print(f"Q_C * dbeta         {r.clausius: .6f}")
print(f"dI_QC:D             {r.dI_QC_D: .6f}")
print(f"D_QC                {r.D_QC: .6f}")
print(f"residual            {r.residual: .1e}")
print(f"generalized law     {r.generalized_slt: .6f} >= 0")

# %% [markdown]
# The Clausius term alone is negative: heat went from cold to hot. Adding the
# consumed correlation restores a non-negative balance.

# %%
for name in ("Q", "C"):
    print(name, "dS =", getattr(r, f"dS_{name}"), "D =", getattr(r, f"D_{name}"))
print("D_QC two ways:", r.D_QC, r.D_QC_direct)
