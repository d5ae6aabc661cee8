import math

import numpy as np
import pytest

from mabuchi_lab import (AffineField, PolynomialMap, PolytopeMismatch,
                         PotentialPath, calabi_energy, curvature_mass_defect,
                         distance_lower_bound, entropy, geodesic_distance,
                         guillemin_potential, i_functional, j_functional,
                         k_energy_delta, make_polytope, make_potential,
                         path_length, s_bar, scalar_curvature)
from mabuchi_lab.potentials import legendre_values


@pytest.fixture(scope="module")
def P1():
    return make_polytope("P1")


@pytest.fixture(scope="module")
def u0(P1):
    return guillemin_potential(P1)


def bump(*coefs):
    base = np.array([0.0, 1.0, -1.0])
    out = np.zeros(len(base) + len(coefs) - 1)
    for k, c in enumerate(coefs):
        mono = np.zeros(k + 1)
        mono[k] = c
        prod = np.polynomial.polynomial.polymul(base, mono)
        out[:len(prod)] += prod
    return PolynomialMap(out, 1)


@pytest.fixture(scope="module")
def u1(u0):
    return make_potential(u0, bump(0.05))


# -- scalar curvature ---------------------------------------------------------


def test_round_metric_curvature(u0):
    cf = scalar_curvature(u0)
    # inverse Hessian 2x(1-x), double divergence -(-4) = 4
    assert np.abs(cf.S - 4.0).max() < 1e-4
    assert cf.S_bar == 4.0


def test_s_bar_class_formula():
    assert s_bar(make_polytope("P1")) == pytest.approx(4.0)
    assert s_bar(make_polytope("P2")) == pytest.approx(12.0)
    assert s_bar(make_polytope("PF1")) == pytest.approx(20.0 / 3.0)


def test_mass_defect(u0, u1):
    assert abs(curvature_mass_defect(u0)) < 1e-10
    cf = scalar_curvature(u1)
    assert cf.S.max() - cf.S.min() > 1e-3   # genuinely nonconstant
    assert abs(curvature_mass_defect(u1)) < 1e-6


def test_calabi_round_zero(u0):
    assert 0.0 <= calabi_energy(u0) <= 1e-6


def test_calabi_nonnegative(u0):
    rng = np.random.default_rng(0)
    for _ in range(5):
        try:
            u = make_potential(u0, bump(*rng.uniform(-0.8, 0.8, 3)))
        except Exception:
            continue
        assert calabi_energy(u) >= 0.0


def test_calabi_quadratic_smallness(u0):
    cas = [calabi_energy(make_potential(u0, bump(e))) for e in (0.04, 0.02, 0.01)]
    p1 = math.log(cas[0] / cas[1]) / math.log(2)
    p2 = math.log(cas[1] / cas[2]) / math.log(2)
    assert p1 >= 1.9
    assert p2 >= 1.9


# -- I functional -------------------------------------------------------------


def test_i_constant_path(u0):
    path = PotentialPath.from_map(lambda t: u0, lambda t: np.zeros(u0.grid.n_nodes),
                                  np.linspace(0, 1, 5))
    vals, dvals, endpoint = i_functional(path)
    assert np.abs(np.diff(vals)).max() == 0.0
    assert np.abs(dvals).max() == 0.0
    assert endpoint == 0.0


def test_i_geodesic_slope_constant(u0, u1):
    path = PotentialPath.linear(u0, u1, n_nodes=11)
    vals, dvals, endpoint = i_functional(path)
    assert dvals.max() - dvals.min() <= 1e-6 * max(1.0, np.abs(dvals).max())
    # with constant slope the sampled increment is slope times sampled span
    span = float(path.times[-1] - path.times[0])
    assert endpoint == pytest.approx(dvals[0] * span, abs=1e-12)


def test_i_normalized_affine_direction(u0):
    f = AffineField([1.0], 0.0).normalized(u0.grid)
    path = PotentialPath.from_map(
        lambda t: u0.add_affine(AffineField(t * f.a, t * f.b)),
        lambda t: f(u0.grid.nodes), np.linspace(0, 1, 5))
    _, dvals, _ = i_functional(path)
    assert np.abs(dvals).max() < 1e-10


# -- J functional -------------------------------------------------------------


def test_j_zero_cases(u0):
    assert j_functional(u0, u0) == pytest.approx(0.0, abs=1e-10)
    shifted = u0.add_affine(AffineField([0.0], 0.37))
    assert j_functional(shifted, u0) == pytest.approx(0.0, abs=1e-10)


def test_j_positive(u0, u1):
    val = j_functional(u1, u0)
    assert val > 1e-6


def test_j_zero_implies_constant(u0):
    """The converse direction: tiny J forces a near-constant difference."""
    rng = np.random.default_rng(4)
    for _ in range(5):
        u = make_potential(u0, bump(*rng.uniform(-0.5, 0.5, 2)))
        j = j_functional(u, u0)
        diff = u.v - u0.v
        osc = float(diff.max() - diff.min())
        if j < 1e-8:
            assert osc < 1e-3
        else:
            assert osc > 0


def test_j_polytope_mismatch(u0):
    uF = guillemin_potential(make_polytope("PF1"))
    with pytest.raises(PolytopeMismatch):
        j_functional(uF, u0)


# -- K-energy -----------------------------------------------------------------


def test_k_energy_constant_path(u0):
    path = PotentialPath.from_map(lambda t: u0, lambda t: np.zeros(u0.grid.n_nodes),
                                  np.linspace(0, 1, 5))
    assert k_energy_delta(path) == pytest.approx(0.0, abs=1e-14)


def test_k_energy_path_independence(u0):
    ua = make_potential(u0, bump(0.3, -0.2))
    ub = make_potential(u0, bump(-0.25, 0.15, 0.1))
    direct = k_energy_delta(PotentialPath.linear(ua, ub, n_nodes=11))
    # reparametrize time: s = tau^2 (same endpoints, non-constant speed)
    x, w = np.polynomial.legendre.leggauss(17)
    taus = (x + 1) / 2
    f = ub.v - ua.v
    fp = ub.v_poly + (-1.0) * ua.v_poly

    def u_of(tau):
        s = tau ** 2
        return ua.with_smooth_part((1 - s) * ua.v + s * ub.v,
                                   ua.v_poly + float(s) * fp)

    path2 = PotentialPath(taus, tuple(u_of(t) for t in taus),
                          tuple(2 * t * f for t in taus), weights=w / 2)
    warped = k_energy_delta(path2)
    assert warped == pytest.approx(direct, abs=1e-5)


def test_k_energy_critical_at_round(u0):
    """E is critical at the csc metric: delta E = O(||v||^2)."""
    vals = []
    for e in (0.04, 0.02, 0.01):
        path = PotentialPath.linear(u0, make_potential(u0, bump(e)))
        vals.append(abs(k_energy_delta(path)))
    p1 = math.log(vals[0] / vals[1]) / math.log(2)
    p2 = math.log(vals[1] / vals[2]) / math.log(2)
    assert p1 >= 1.9
    assert p2 >= 1.9


# -- entropy ------------------------------------------------------------------


def test_entropy_cases(u0, u1):
    assert entropy(u0, u0) == 0.0
    shifted = u0.add_affine(AffineField([0.4], -0.1))
    assert abs(entropy(shifted, u0)) < 1e-8
    assert entropy(u1, u0) > 0.0


# -- path length and distance -------------------------------------------------


def test_path_length_cases(u0, u1):
    const = PotentialPath.from_map(lambda t: u0,
                                   lambda t: np.zeros(u0.grid.n_nodes),
                                   np.linspace(0, 1, 5))
    L, _ = path_length(const)
    assert L == 0.0
    path = PotentialPath.linear(u0, u1, n_nodes=11)
    L, speeds = path_length(path)
    f2 = float(np.sum(u0.grid.weights * (u1.v - u0.v) ** 2))
    assert L ** 2 == pytest.approx(f2, abs=1e-5)
    assert (speeds.max() - speeds.min()) <= 1e-5 * max(speeds.max(), 1e-30)


def test_path_length_complex_side_oracle(u0, u1):
    """Brute-force quadrature of the velocity on the log-coordinate side."""
    s_max = 4.0
    n = 401
    xi = np.linspace(-s_max, s_max, n)[:, None]
    dt = 1e-3
    fpoly = u1.v_poly + (-1.0) * u0.v_poly
    psi_p = legendre_values(u0.with_smooth_part(u0.v + dt * (u1.v - u0.v),
                                                u0.v_poly + dt * fpoly), xi)
    psi_m = legendre_values(u0.with_smooth_part(u0.v - dt * (u1.v - u0.v),
                                                u0.v_poly + (-dt) * fpoly), xi)
    phidot = (psi_p - psi_m) / (2 * dt)
    psi = legendre_values(u0, xi)
    dens = np.gradient(np.gradient(psi, xi[:, 0]), xi[:, 0])
    val = np.trapezoid(phidot ** 2 * dens, xi[:, 0])
    f2 = float(np.sum(u0.grid.weights * (u1.v - u0.v) ** 2))
    assert val == pytest.approx(f2, abs=1e-5)


def test_distance_properties(u0):
    rng = np.random.default_rng(11)
    pots = []
    while len(pots) < 9:
        try:
            pots.append(make_potential(u0, bump(*rng.uniform(-0.8, 0.8, 3))))
        except Exception:
            continue
    for a, b, c in zip(pots[::3], pots[1::3], pots[2::3]):
        assert geodesic_distance(a, a) == 0.0
        assert geodesic_distance(a, b) == geodesic_distance(b, a)
        assert (geodesic_distance(a, c)
                <= geodesic_distance(a, b) + geodesic_distance(b, c) + 1e-6)


def test_distance_lower_bound(u0):
    rng = np.random.default_rng(5)
    for _ in range(5):
        try:
            u = make_potential(u0, bump(*rng.uniform(-0.8, 0.8, 3)))
        except Exception:
            continue
        out = distance_lower_bound(u, u0)
        assert out["margin"] >= -1e-6
