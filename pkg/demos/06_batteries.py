# %% [markdown]
# # Inequality batteries
#
# Reproducible random-metric batteries checking the headline inequalities:
# the energy-distance bound, monotonicity of the energy slope along
# geodesics, the Calabi-energy lower bound with its proof chain, and the
# estimate monitors (exhaustion uniformity, maximum principle, distance
# lower bound).  Reports carry every margin; nothing is reduced to a bare
# boolean.  Small sample counts here; the acceptance suite runs the full
# sizes.

# %%
from mabuchi_lab import (run_calabi_bound, run_estimate_monitors, run_lemma43,
                         run_thm12)

rep = run_thm12("P1", n_pairs=10, seed=1)
print("thm12:", rep.summary, " acceptance rate:", rep.acceptance_rate)

# %%
rep = run_lemma43("P1", n_pairs=10, seed=2)
print("lemma43:", rep.summary)

# %%
rep = run_calabi_bound("PF1", n_metrics=10, seed=3, optimize=False)
print("calabi bound:", {k: v for k, v in rep.summary.items()})

# %%
rep = run_estimate_monitors("P1", n_samples=10, seed=4)
print("monitors:", {k: v for k, v in rep.summary.items()})
for name, v in rep.verdicts.items():
    print(f"  {name}: pass={v['pass']} margin={v['margin']:.3g}")
