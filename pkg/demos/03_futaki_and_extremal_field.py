# %% [markdown]
# # Futaki invariant, extremal field, Calabi-energy lower bound
#
# Torus fields have affine holomorphy potentials on the polytope.  The
# Futaki pairing F(f) = int theta_f (S_bar - S) dx is independent of the
# metric used to compute it; for affine f an integration by parts turns it
# into pure polytope data, S_bar int f dx - 2 int_{dP} f dsigma, which is
# the oracle the quadrature is checked against.

# %%
import numpy as np

from mabuchi_lab import (AffineField, PolynomialMap, extremal_field,
                         futaki_boundary_oracle, futaki_invariant,
                         guillemin_potential, hwang_bound, make_polytope,
                         make_potential)

PF1 = make_polytope("PF1")
uF = guillemin_potential(PF1)
fx = AffineField([1.0, 0.0], 0.0)
print("F(x) quadrature :", futaki_invariant(fx, uF))
print("F(x) oracle     :", futaki_boundary_oracle(fx, PF1), " (= 4/9)")

# %% [markdown]
# Metric independence: five perturbed metrics, one invariant.

# %%
rng = np.random.default_rng(1)
bump = PolynomialMap(np.zeros((2, 2)), 2)
vals = []
for _ in range(5):
    coef = np.zeros((4, 4))
    coef[1, 1] = rng.uniform(-0.05, 0.05)   # xy-bump times facet product
    u = make_potential(uF, PolynomialMap(coef, 2))
    vals.append(futaki_invariant(fx, u))
print("spread over metrics:", max(vals) - min(vals))

# %% [markdown]
# The extremal field is the Riesz representative of the Futaki character in
# the Futaki-Mabuchi pairing.  On PF1 the mirror symmetry y -> 2 - x - y
# forces it along the x-direction; its Futaki value 64/39 is the a-priori
# lower bound for the Calabi energy of every metric in the class.

# %%
xc = extremal_field(PF1)
print("X_c potential coefficients:", xc.coefficients, " (exact -64/39, 48/13, 0)")
print("F_{X_c} =", xc.futaki_value, " (exact 64/39)")

out = hwang_bound(uF, xc)
print("Guillemin metric: Ca =", out["calabi"], " margin =", out["margin"])
