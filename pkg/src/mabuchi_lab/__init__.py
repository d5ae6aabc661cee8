"""Numerical laboratory for toric Kahler potential spaces.

Moment polytopes stand in for the model manifolds; symplectic potentials
for the metrics.  The package computes the scalar-curvature energy
functionals, the symmetry invariants, exact and regularized geodesics, and
runs the inequality batteries that verify the theory at desk scale.
"""

from .errors import (ConfigError, GridMismatch, MabuchiLabError, NewtonDivergence,
                     NonConvexIterate, NonMonotoneTrace, NotAdmissible, NotDelzant,
                     PolytopeMismatch, SingularGram, TruncationTooSmall, Unbounded)
from .polytope import (BoundaryMeasure, InteriorGrid, MomentPolytope,
                       integrate_boundary, integrate_interior, make_polytope,
                       unimodular_image)
from .potentials import (AffineField, KahlerSidePotential, PolynomialMap,
                         SymplecticPotential, check_admissible, guillemin_potential,
                         legendre_dual, legendre_values, make_potential)
from .functionals import (CurvatureField, PotentialPath, calabi_energy,
                          curvature_mass_defect, distance_lower_bound, energy_slope,
                          entropy, geodesic_distance, i_functional, j_functional,
                          k_energy_delta, path_length, s_bar, scalar_curvature)
from .futaki import (ExtremalField, HolomorphyPotential, extremal_field, fm_inner,
                     futaki_boundary_oracle, futaki_invariant, hwang_bound,
                     theta_of_affine)
from .geodesics import (GeodesicRay, GeodesicSegment, effectiveness_profile,
                        exact_geodesic, geodesic_residual, ray_by_exhaustion,
                        ray_from_affine, tamed_diagnostics, yen_invariant)
from .hcma import StripSolution, solve_hcma_regularized, solve_hcma_sequence
from .experiments import (ExperimentReport, RandomMetrics, run_calabi_bound,
                          run_estimate_monitors, run_lemma43, run_thm12)

__version__ = "0.1.0"
