"""Futaki invariant, bilinear form, extremal field: frozen-oracle checks.

Exact values for the trapezoid model, derived by hand from the polytope
moments (Vol = 3/2, int x = 2/3, int y = 7/6, int x^2 = 5/12,
int xy = 11/24, int y^2 = 5/4, boundary moments int x = 2, int y = 4):
the Riesz system gives X_c potential -64/39 + (48/13) x and
F_{X_c} = 64/39.
"""

import numpy as np
import pytest

from mabuchi_lab import (AffineField, PolynomialMap, extremal_field, fm_inner,
                         futaki_boundary_oracle, futaki_invariant,
                         guillemin_potential, hwang_bound, k_energy_delta,
                         make_polytope, make_potential, theta_of_affine,
                         PotentialPath)

F_X_EXACT = 4.0 / 9.0
F_Y_EXACT = -2.0 / 9.0
F_XC_EXACT = 64.0 / 39.0
XC_COEF_EXACT = np.array([-64.0 / 39.0, 48.0 / 13.0, 0.0])


@pytest.fixture(scope="module")
def uP1():
    return guillemin_potential(make_polytope("P1"))


@pytest.fixture(scope="module")
def uPF1():
    return guillemin_potential(make_polytope("PF1"))


def conv2(A, B):
    out = np.zeros((A.shape[0] + B.shape[0] - 1, A.shape[1] + B.shape[1] - 1))
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            if A[i, j]:
                out[i:i + B.shape[0], j:j + B.shape[1]] += A[i, j] * B
    return out


def pf1_bump(coefs):
    X = np.array([[0.0], [1.0]])
    Y = np.array([[0.0, 1.0]])
    TWO = np.array([[2.0, -1.0], [-1.0, 0.0]])
    ONEMX = np.array([[1.0], [-1.0]])
    B0 = conv2(conv2(conv2(X, Y), TWO), ONEMX)
    monos = [np.array([[1.0]]), X, Y, conv2(X, X), conv2(X, Y), conv2(Y, Y)]
    C = np.zeros((10, 10))
    for c, mo in zip(coefs, monos):
        Q = conv2(B0, mo) * c
        C[:Q.shape[0], :Q.shape[1]] += Q
    return PolynomialMap(C, 2)


def test_theta_normalization(uP1):
    th = theta_of_affine(AffineField([1.0], 0.0), uP1)
    assert th.normalized.a[0] == 1.0
    assert th.normalized.b == pytest.approx(-0.5, abs=1e-8)
    g = uP1.grid
    assert abs(np.sum(g.weights * th.normalized(g.nodes))) < 1e-8
    # constants die
    tc = theta_of_affine(AffineField([0.0], 3.2), uP1)
    assert abs(tc.normalized.b) < 1e-12
    # the constant is polytope data only: any admissible metric gives the same
    up = make_potential(uP1, PolynomialMap([0, 0.05, -0.05], 1))
    th2 = theta_of_affine(AffineField([1.0], 0.0), up)
    assert th2.normalized.b == pytest.approx(th.normalized.b, abs=1e-12)


def test_futaki_vanishes_csc_classes(uP1):
    assert abs(futaki_invariant(AffineField([1.0], 0.0), uP1)) < 1e-5
    uP2 = guillemin_potential(make_polytope("P2"))
    assert abs(futaki_invariant(AffineField([1.0, 0.0], 0.0), uP2)) < 1e-5
    assert abs(futaki_invariant(AffineField([0.0, 1.0], 0.0), uP2)) < 1e-5


def test_futaki_pf1_oracle(uPF1):
    fx = AffineField([1.0, 0.0], 0.0)
    val = futaki_invariant(fx, uPF1)
    oracle = futaki_boundary_oracle(fx, uPF1.polytope)
    assert oracle == pytest.approx(F_X_EXACT, abs=1e-8)
    assert val == pytest.approx(oracle, abs=1e-5)
    fy = AffineField([0.0, 1.0], 0.0)
    assert futaki_invariant(fy, uPF1) == pytest.approx(F_Y_EXACT, abs=1e-5)


def test_futaki_metric_independence(uPF1):
    rng = np.random.default_rng(11)
    fx = AffineField([1.0, 0.0], 0.0)
    vals = []
    for _ in range(5):
        u = make_potential(uPF1, pf1_bump(rng.uniform(-0.06, 0.06, 6)))
        vals.append(futaki_invariant(fx, u))
    spread = max(vals) - min(vals)
    assert spread <= 1e-5 * abs(np.mean(vals))
    assert max(abs(v - F_X_EXACT) for v in vals) <= 1e-5


def test_fm_inner(uP1, uPF1):
    f = AffineField([1.0], 0.0)
    val = fm_inner(f, f, uP1)
    assert val == pytest.approx(1.0 / 12.0, abs=1e-4)
    assert val > 0
    fx = AffineField([1.0, 0.0], 0.0)
    fy = AffineField([0.0, 1.0], 0.0)
    assert fm_inner(fx, fy, uPF1) == fm_inner(fy, fx, uPF1)  # bit-for-bit
    # metric independence is exact in this model: same numbers at any metric
    up = make_potential(uPF1, pf1_bump(np.full(6, 0.03)))
    assert fm_inner(fx, fy, up) == pytest.approx(fm_inner(fx, fy, uPF1), abs=1e-12)


def test_gram_positive_definite(uPF1):
    fields = [AffineField([1.0, 0.0], 0.0), AffineField([0.0, 1.0], 0.0)]
    G = np.array([[fm_inner(a, b, uPF1) for b in fields] for a in fields])
    eigs = np.linalg.eigvalsh(G)
    assert eigs.min() > 0


def test_extremal_field_trivial():
    for name in ("P1", "P2"):
        xc = extremal_field(make_polytope(name))
        assert abs(xc.futaki_value) < 1e-10
        assert np.abs(xc.coefficients).max() < 1e-5


def test_extremal_field_pf1():
    xc = extremal_field(make_polytope("PF1"))
    assert np.abs(xc.coefficients - XC_COEF_EXACT).max() < 1e-4
    assert xc.futaki_value == pytest.approx(F_XC_EXACT, abs=1e-4)
    # mirror symmetry in y kills the y-component
    assert abs(xc.coefficients[2]) < 1e-4
    # checked identity: F_{X_c} = (X_c, X_c)
    c = xc.coefficients
    quad = float(c @ xc.gram @ c)
    assert quad == pytest.approx(xc.futaki_value, rel=1e-10)


def test_hwang_bound_round(uP1):
    out = hwang_bound(uP1)
    assert abs(out["calabi"]) < 1e-6
    assert abs(out["futaki_extremal"]) < 1e-10
    assert abs(out["margin"]) < 1e-6


def test_hwang_bound_battery(uPF1):
    xc = extremal_field(uPF1.polytope)
    rng = np.random.default_rng(7)
    for _ in range(10):
        u = make_potential(uPF1, pf1_bump(rng.uniform(-0.2, 0.2, 6)))
        out = hwang_bound(u, xc)
        assert out["margin"] >= -1e-5
        assert abs(out["pythagoras_defect"]) < 1e-10
        # Cauchy-Schwarz link is an equality for the projection
        assert out["cauchy_schwarz_bound"] == pytest.approx(out["rho_sq"], rel=1e-8)
        # the chain: Ca >= |rho|^2 >= F; the projection reproduces the
        # metric-independent extremal norm at single-grid accuracy
        assert out["calabi_grid"] + 1e-12 >= out["rho_sq"]
        assert out["rho_sq"] == pytest.approx(out["futaki_extremal"], abs=1e-1)


def test_energy_slope_futaki_consistency(uPF1):
    """d/dt of the K-energy along u + t f at t = 0 equals -F(X_f)."""
    fx = AffineField([1.0, 0.0], 0.0)
    eps = 0.05
    end = uPF1.add_affine(AffineField(eps * fx.a, eps * fx.b))
    dE = k_energy_delta(PotentialPath.linear(uPF1, end, n_nodes=3), refine=True) / eps
    assert dE == pytest.approx(-futaki_invariant(fx, uPF1), abs=1e-5)
