# %% [markdown]
# # Model polytopes and scalar curvature
#
# The laboratory's "manifolds" are Delzant moment polytopes: the unit
# segment (the projective line), the unit simplex (the projective plane)
# and the trapezoid PF1 (the plane blown up in a point).  A torus-invariant
# metric is a convex symplectic potential u on the polytope; its scalar
# curvature is the double divergence of the inverse Hessian,
# S = -sum_ij d_i d_j u^{ij}, and the class average is the fixed constant
# S_bar = 2 Vol(dP) / Vol(P) in the lattice normalization.

# %%
import numpy as np

from mabuchi_lab import (PolynomialMap, calabi_energy, guillemin_potential,
                         make_polytope, make_potential, s_bar, scalar_curvature)

for name in ("P1", "P2", "PF1"):
    P = make_polytope(name)
    print(f"{name}: Vol = {P.volume():g}, lattice perimeter = "
          f"{P.lattice_perimeter():g}, S_bar = {s_bar(P):g}")

# %% [markdown]
# The Guillemin potential of the segment is the round metric: its inverse
# Hessian is the polynomial 2x(1-x), so S is exactly 4 and the Calabi
# energy vanishes.

# %%
u0 = guillemin_potential(make_polytope("P1"))
cf = scalar_curvature(u0)
print("sup |S - 4| =", np.abs(cf.S - 4).max())
print("Ca(round)   =", calabi_energy(u0))

# %% [markdown]
# Perturbing the potential bends the curvature; the residual S - S_bar
# keeps zero mean (it pairs to the boundary measure through the divergence
# structure) and the Calabi energy grows quadratically in the perturbation.

# %%
for eps in (0.04, 0.02, 0.01):
    u = make_potential(u0, PolynomialMap([0, eps, -eps], 1))
    print(f"eps={eps}: Ca = {calabi_energy(u):.3e}")

# %% [markdown]
# On PF1 the Guillemin metric is far from curvature-constant; this is the
# polytope whose class carries a nonzero Futaki character.

# %%
uF = guillemin_potential(make_polytope("PF1"))
cfF = scalar_curvature(uF)
print("PF1 Guillemin: S range", (cfF.S.min(), cfF.S.max()),
      " Ca =", calabi_energy(uF))
