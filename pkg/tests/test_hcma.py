import numpy as np
import pytest

from mabuchi_lab import (PolynomialMap, PolytopeMismatch, guillemin_potential,
                         make_polytope, make_potential, solve_hcma_regularized,
                         solve_hcma_sequence)
from mabuchi_lab.potentials import legendre_values


@pytest.fixture(scope="module")
def u0():
    return guillemin_potential(make_polytope("P1"))


@pytest.fixture(scope="module")
def u1(u0):
    return make_potential(u0, PolynomialMap([0, 0.05, -0.05], 1))


def exact_dual_field(u0, u1, sol):
    ex = np.empty_like(sol.Psi)
    fp = u1.v_poly + (-1.0) * u0.v_poly
    for i, tv in enumerate(sol.t):
        ut = u0.with_smooth_part((1 - tv) * u0.v + tv * u1.v,
                                 u0.v_poly + float(tv) * fp)
        ex[i] = legendre_values(ut, sol.xi[:, None])
    return ex


def test_eps_zero_rejected(u0, u1):
    with pytest.raises(ValueError):
        solve_hcma_regularized(u0, u1, T=1.0, eps=0.0)
    with pytest.raises(ValueError):
        solve_hcma_regularized(u0, u1, T=1.0, eps=-1e-3)
    with pytest.raises(ValueError):
        solve_hcma_regularized(u0, u1, T=-1.0, eps=1e-2)


def test_dimension_guard(u0):
    uF = guillemin_potential(make_polytope("PF1"))
    with pytest.raises(PolytopeMismatch):
        solve_hcma_regularized(uF, uF, T=1.0, eps=1e-2)


def test_constancy_oracle(u0):
    """Equal boundary data: the eps -> 0 limit is t-independent."""
    sol = solve_hcma_regularized(u0, u0, T=1.0, eps=1e-2, grid_shape=(48, 48))
    psi0 = legendre_values(u0, sol.xi[:, None])
    err = np.abs(sol.Psi - psi0[None, :]).max()
    assert err <= 0.5 * sol.eps
    assert sol.newton_residual <= 1e-10
    assert sol.boundary_defect() == 0.0


def test_convergence_to_exact_geodesic(u0, u1):
    """The central solver test at a smoke-scale grid (32 x 32)."""
    sols = solve_hcma_sequence(u0, u1, 1.0, [1e-1, 1e-2, 1e-3],
                               grid_shape=(32, 32))
    errs = [s.sup_error_vs(exact_dual_field(u0, u1, s)) for s in sols]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] <= 5e-2 * sols[2].value_range()
    for s in sols:
        assert s.newton_residual <= 1e-10
        assert s.boundary_defect() == 0.0
        # every continuation stage converged below tolerance
        assert all(raw <= 1e-10 for _, _, raw in s.stages)


def test_monitor_boundary_max(u0, u1):
    for s in solve_hcma_sequence(u0, u1, 1.0, [1e-2, 1e-3], grid_shape=(48, 48)):
        rep = s.monitor_report()
        assert rep["excess"] <= 0.02


def test_data_continuation_path(u0):
    """Boundary data far from the background exercises the data ladder.

    The coefficients come from a sampler draw for which the direct convex
    initializer provably fails at this grid.
    """
    coef = [0.0, 0.25680011, 0.43354206, -1.1588363, 0.67663845, -0.20814432]
    big = make_potential(u0, PolynomialMap(coef, 1))
    sol = solve_hcma_regularized(u0, big, T=1.0, eps=1e-2, grid_shape=(32, 32))
    assert sol.newton_residual <= 1e-10
    assert sol.boundary_defect() == 0.0
    assert sol.monitor_report()["excess"] <= 0.02


def test_psi_tilde_gauge(u0, u1):
    sol = solve_hcma_regularized(u0, u1, T=1.0, eps=1e-2, grid_shape=(32, 32))
    # relative potential vanishes on the full boundary (shared Dirichlet data)
    r = sol.psi_tilde
    assert np.abs(r[0]).max() < 1e-12
    assert np.abs(r[-1]).max() < 1e-12
    assert np.abs(r[:, 0]).max() < 1e-12
    assert np.abs(r[:, -1]).max() < 1e-12
