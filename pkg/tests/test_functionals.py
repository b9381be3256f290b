import math

import numpy as np
import pytest

from landaulab.errors import DomainError, InadmissibleWeight, Infeasible, ValidationError
from landaulab.functionals import (
    abscissa,
    asymptotic_ratio,
    find_cutoff,
    norm_eval,
    phi_mp,
    phi_tilde_mp,
    psi_m1,
    verify_cutoff,
)
from landaulab.grids import DistributionField, SpatialGrid, VelocityGrid
from landaulab.kernels import ModelSpec, WeightSpec

INF = math.inf
P10 = ModelSpec(0.0, WeightSpec.polynomial(10))

# (gamma, weight, p, expected value, branch)
ABSCISSA_TABLE = [
    (1.0, WeightSpec.polynomial(8), 2, INF, "H1(i)"),
    (0.5, WeightSpec.polynomial(10), 1, INF, "H1(i)"),
    (1.0, WeightSpec.stretched(1.0, 1.0), 2, INF, "H1(ii)"),
    (0.5, WeightSpec.gaussian(0.25), 2, INF, "H1(iii)"),
    (0.0, WeightSpec.polynomial(10), 2, 17.0, "H2(i)"),
    (0.0, WeightSpec.polynomial(6), 1, 12.0, "H2(i)"),
    (0.0, WeightSpec.polynomial(8), INF, 10.0, "H2(i)"),
    (0.0, WeightSpec.stretched(0.5, 1.5), 2, INF, "H2(ii)"),
    (0.0, WeightSpec.gaussian(0.4), 2, INF, "H2(iii)"),
    (-1.0, WeightSpec.stretched(1.0, 1.5), 2, INF, "H3(i)"),
    (-1.5, WeightSpec.gaussian(0.3), 2, INF, "H3(ii)"),
    (-2.0, WeightSpec.gaussian(0.25), 2, 0.5, "H3(iii)"),
]


@pytest.mark.parametrize("gamma,weight,p,value,tag", ABSCISSA_TABLE)
def test_abscissa_table(gamma, weight, p, value, tag):
    res = abscissa(ModelSpec(gamma, weight), p)
    assert res.value == value
    assert res.tag == tag


def test_abscissa_phi_variant():
    res = abscissa(ModelSpec(-2.0, WeightSpec.gaussian(0.1)), 2)
    assert res.value == 4 * 0.1 * (1 - 2 * 0.1)
    assert res.phi_value == 4 * 0.1 * (1 - 2 * 0.1 * 2)
    assert abscissa(ModelSpec(-2.0, WeightSpec.gaussian(0.3)), 2).phi_value is None


@pytest.mark.parametrize("gamma,weight,p,key", [
    (-1.0, WeightSpec.polynomial(10), 2, "weight.family"),
    (0.0, WeightSpec.polynomial(3.5), 2, "weight.k"),
    (-1.0, WeightSpec.stretched(1.0, 0.8), 2, "weight.s"),
    (-2.0, WeightSpec.stretched(1.0, 1.5), 2, "weight.family"),
])
def test_abscissa_inadmissible(gamma, weight, p, key):
    with pytest.raises(InadmissibleWeight) as exc:
        abscissa(ModelSpec(gamma, weight), p)
    assert exc.value.key == key


def test_abscissa_bad_p():
    with pytest.raises(DomainError):
        abscissa(P10, 0.5)


def test_phi_at_origin():
    # abar(0) = 2I, bbar(0) = 0, cbar = -6, D2m/m = k I
    assert phi_mp(P10, 2, np.zeros(3)) == pytest.approx(63.0, abs=1e-12)


def test_phi_radial(rng):
    v = rng.standard_normal((5, 3)) * 3
    rot = v[:, [1, 2, 0]]
    assert np.allclose(phi_mp(P10, 2, v), phi_mp(P10, 2, rot), rtol=1e-12)


def test_phi_and_tilde_agree_at_p2_for_polynomial_limit():
    assert asymptotic_ratio(P10, 2, "phi") == pytest.approx(1.0, abs=0.05)
    assert asymptotic_ratio(P10, 2, "phi_tilde") == pytest.approx(1.0, abs=0.05)


def test_tilde_better_gaussian_constant():
    m = ModelSpec(-1.0, WeightSpec.gaussian(0.2))
    assert asymptotic_ratio(m, 2, "phi") == pytest.approx(1.0, abs=0.05)
    assert asymptotic_ratio(m, 2, "phi_tilde") == pytest.approx(1.0, abs=0.05)
    v = np.array([40.0, 0, 0])
    assert phi_tilde_mp(m, 2, v) < phi_mp(m, 2, v)


def test_psi_requires_exponential_weight():
    with pytest.raises(InadmissibleWeight):
        psi_m1(P10, np.zeros(3))
    m = ModelSpec(0.0, WeightSpec.stretched(0.5, 1.0))
    v = np.array([30.0, 0, 0])
    # bbar.Dm/m ~ -2 r s <v>^s dominates r s ell2 <v>^{s-2} ~ r s <v>^s
    assert psi_m1(m, v) < 0


def test_find_cutoff_examples():
    res = find_cutoff(P10, 2, 10.0, 1.0)
    assert res.witness.worst <= 0
    assert verify_cutoff(res, P10) <= 1.0 / 10
    with pytest.raises(Infeasible):
        find_cutoff(P10, 2, 20.0, 1.0)
    with pytest.raises(DomainError):
        find_cutoff(P10, 2, 10.0, 8.0)


def test_find_cutoff_part1_smaller_radius():
    r1 = find_cutoff(P10, 2, 8.5, 1.0, part=1)
    r2 = find_cutoff(P10, 2, 8.5, 1.0, part=2)
    assert r1.R <= r2.R
    assert verify_cutoff(r1, P10) <= 0.1


@pytest.mark.slow
def test_find_cutoff_infinite_abscissa():
    m = ModelSpec(1.0, WeightSpec.polynomial(10))
    res = find_cutoff(m, 2, 100.0, 1.0)
    assert res.M > 100
    assert verify_cutoff(res, m) <= 0.1


# ------------------------------------------------------------------ norms
@pytest.fixture(scope="module")
def vg():
    return VelocityGrid(8.0, 24)


def test_l2_norm_of_maxwellian():
    # mu^2 is narrower than mu, so dv = 0.5 keeps the midpoint rule exact to rounding
    vg = VelocityGrid(8.0, 32)
    f = DistributionField(SpatialGrid(0), vg, vg.maxwellian())
    one = ModelSpec(0.0, WeightSpec.polynomial(0))
    assert norm_eval(f, "Lp", one) == pytest.approx((8 * np.pi ** 1.5) ** -0.5, rel=1e-10)


def test_hh3_reduces_to_l2_for_x_independent(vg):
    sp = SpatialGrid(1, 8)
    vals = np.broadcast_to(vg.maxwellian(), sp.shape + vg.shape).copy()
    f = DistributionField(sp, vg, vals)
    assert norm_eval(f, "HH3xL2", P10) == pytest.approx(norm_eval(f, "Lp", P10), rel=1e-13)
    assert norm_eval(f, "HH3xH1*", P10) == pytest.approx(norm_eval(f, "H1*", P10), rel=1e-13)


def test_hh3_in_homogeneous_mode(vg):
    f = DistributionField(SpatialGrid(0), vg, vg.mesh[0] * vg.maxwellian())
    assert norm_eval(f, "HH3xL2", P10) == pytest.approx(norm_eval(f, "Lp", P10), rel=1e-14)
    assert norm_eval(f, "HH3xH1*", P10) == pytest.approx(norm_eval(f, "H1*", P10), rel=1e-14)


def test_h1_orderings_and_norm_axioms(rng):
    vg = VelocityGrid(5.0, 10)
    sp = SpatialGrid(1, 8)
    mu = vg.maxwellian()
    mk = lambda: DistributionField(sp, vg, rng.standard_normal(sp.shape + vg.shape) * mu)
    m = ModelSpec(0.5, WeightSpec.stretched(0.5, 1.0))
    for _ in range(3):
        f, g = mk(), mk()
        for tag in ("Lp", "H1*", "H1**", "HH3xL2", "HH3xH1*"):
            nf, ng = norm_eval(f, tag, m), norm_eval(g, tag, m)
            fg = DistributionField(sp, vg, f.values + g.values)
            assert norm_eval(fg, tag, m) <= nf + ng + 1e-14
            neg = DistributionField(sp, vg, -2.5 * f.values)
            assert norm_eval(neg, tag, m) == pytest.approx(2.5 * nf, rel=1e-13)
        assert norm_eval(f, "H1**", m) >= norm_eval(f, "H1*", m)


def test_x_resolution_guard():
    vg = VelocityGrid(4.0, 4)
    sp = SpatialGrid(1, 4)
    f = DistributionField(sp, vg, np.ones(sp.shape + vg.shape))
    with pytest.raises(ValidationError):
        norm_eval(f, "HH3xL2", P10)
    with pytest.raises(ValidationError):
        norm_eval(f, "W1", P10)
