# %% [markdown]
# # Energy functionals along geodesics
#
# Geodesics of the L2 metric on the space of potentials are linear
# interpolations of symplectic potentials.  Along them the slope of the
# functional I is constant, the K-energy is convex, and the
# energy-distance inequality d(u0,u1) sqrt(Ca(u1)) >= E(u1) - E(u0) holds
# sample by sample.

# %%
import numpy as np

from mabuchi_lab import (PolynomialMap, PotentialPath, calabi_energy,
                         geodesic_distance, guillemin_potential, i_functional,
                         j_functional, k_energy_delta, make_polytope,
                         make_potential, path_length)

u0 = guillemin_potential(make_polytope("P1"))
u1 = make_potential(u0, PolynomialMap([0.0, 0.3, -0.5, 0.2], 1))
path = PotentialPath.linear(u0, u1, n_nodes=11)

vals, dvals, delta = i_functional(path)
print("dI/dt spread along the geodesic:", dvals.max() - dvals.min())

L, speeds = path_length(path)
print("length =", L, " speed spread =", speeds.max() - speeds.min())
print("distance (closed form) =", geodesic_distance(u0, u1))

# %% [markdown]
# The J functional is nonnegative and vanishes exactly on constants.

# %%
print("J(u1; u0) =", j_functional(u1, u0))
print("J(u0; u0) =", j_functional(u0, u0))

# %% [markdown]
# The energy-distance inequality, both orientations.

# %%
dE = k_energy_delta(path)
d = geodesic_distance(u0, u1)
print("E(u1)-E(u0) =", dE)
print("forward margin :", d * np.sqrt(calabi_energy(u1)) - dE)
print("reverse margin :", d * np.sqrt(calabi_energy(u0)) + dE)
