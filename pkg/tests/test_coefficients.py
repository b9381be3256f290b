"""Mollified coefficients against closed forms and independent quadrature."""
import math

import numpy as np
import pytest
from scipy import integrate, special

from landaulab import coefficients as C
from landaulab.errors import DomainError
from landaulab.grids import VelocityGrid


def shell_oracle(gamma, s):
    """Radial and transverse eigenvalues of a*mu by brute 2D quadrature."""
    pref = (2 * math.pi) ** -0.5

    def integrand(tau, rho, w):
        return pref * rho ** (gamma + 4) * np.exp(-0.5 * (s * s + rho * rho - 2 * s * rho * tau)) * w(tau)

    lo, hi = 0.0, s + 14.0
    opts = dict(epsabs=1e-13, epsrel=1e-11)
    l1 = integrate.dblquad(integrand, lo, hi, -1, 1, args=(lambda t: 1 - t * t,), **opts)[0]
    l2 = integrate.dblquad(integrand, lo, hi, -1, 1, args=(lambda t: 0.5 * (1 + t * t),), **opts)[0]
    return l1, l2


def test_j_alpha_examples():
    assert C.j_alpha(2, [0, 0, 0]) == pytest.approx(3, rel=1e-12)
    assert C.j_alpha(2, [1, 0, 0]) == pytest.approx(4, rel=1e-12)
    assert C.j_alpha(0, [0.3, 2, 1]) == pytest.approx(1, rel=1e-12)
    # Newtonian potential of a unit Gaussian: erf(s/sqrt 2)/s
    assert C.j_alpha(-1, [5, 0, 0]) == pytest.approx(special.erf(5 / math.sqrt(2)) / 5, rel=1e-10)
    for s in (0.0, 0.4, 3.0, 12.0):
        if s == 0:
            exact = 2 * math.sqrt(2 / math.pi)
        else:
            exact = math.sqrt(2 / math.pi) * math.exp(-s * s / 2) + (s + 1 / s) * special.erf(s / math.sqrt(2))
        assert C.j_alpha(1, [0, s, 0]) == pytest.approx(exact, rel=1e-10)
    with pytest.raises(DomainError):
        C.j_alpha(-3, [1, 0, 0])
    with pytest.raises(DomainError):
        C.j_alpha(3.5, [1, 0, 0])


def test_j_alpha_singular_range():
    # alpha close to -3 is still integrable; at v=0 the integral is explicit
    a = -2.5
    exact = 2 ** (a / 2) * special.gamma((a + 3) / 2) / special.gamma(1.5)
    assert C.j_alpha(a, [0, 0, 0]) == pytest.approx(exact, rel=1e-8)


@pytest.mark.parametrize("gamma,s", [(1.0, 8.0), (-1.0, 0.7), (-2.0, 2.5), (0.5, 0.05)])
def test_eigenvalues_against_shell_oracle(gamma, s):
    l1, l2 = shell_oracle(gamma, s)
    e1, e2 = C.radial_eigenvalues(gamma, np.array([s]))
    assert e1[0] == pytest.approx(l1, rel=1e-8)
    assert e2[0] == pytest.approx(l2, rel=1e-8)


def test_gamma0_closed_forms_match_quadrature():
    g = VelocityGrid(L=4.0, N=8)
    closed = C.mollify_coefficients(g, 0.0, method="closed")
    quad = C.mollify_coefficients(g, 0.0, method="quadrature")
    v = g.points
    abar = (np.einsum("ni,ni->n", v, v) + 2)[:, None, None] * np.eye(3) - v[:, :, None] * v[:, None, :]
    np.testing.assert_allclose(closed.abar, abar, atol=1e-12)
    np.testing.assert_allclose(quad.abar, abar, rtol=1e-8, atol=1e-8)
    np.testing.assert_allclose(quad.ell1, 2.0, rtol=1e-8)
    np.testing.assert_allclose(quad.cbar, -6.0, rtol=1e-8)
    np.testing.assert_allclose(quad.bbar, -2 * v, atol=1e-8)


def test_point_examples():
    f = C.coefficients_at(0.0, [[1.0, 0, 0]])
    np.testing.assert_allclose(f["abar"][0], np.diag([2, 3, 3]), atol=1e-12)
    assert f["ell1"][0] == pytest.approx(2) and f["ell2"][0] == pytest.approx(3)
    np.testing.assert_allclose(f["bbar"][0], [-2, 0, 0], atol=1e-12)


@pytest.mark.parametrize("gamma", [-2.0, -1.0, 0.5, 1.0])
def test_coefficient_identities(gamma):
    g = VelocityGrid(L=6.0, N=8)
    fld = C.mollify_coefficients(g, gamma)
    v = g.points
    j = np.array([C.j_alpha(gamma + 2, x) for x in v[:20]])
    np.testing.assert_allclose(fld.ell1[:20] + 2 * fld.ell2[:20], 2 * j, rtol=1e-8)
    np.testing.assert_allclose(np.trace(fld.abar, axis1=1, axis2=2), fld.ell1 + 2 * fld.ell2, rtol=1e-12)
    # b̄ comes from its own quadrature and still equals -ell1 v
    np.testing.assert_allclose(fld.bbar, -fld.ell1[:, None] * v, rtol=1e-8, atol=1e-10)
    av = np.einsum("nij,nj->ni", fld.abar, v)
    np.testing.assert_allclose(av, fld.ell1[:, None] * v, rtol=1e-8, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(fld.abar) > 0)
    rep = C.check_field(fld)
    assert rep["trace_err"] < 1e-6 and rep["bbar_err"] < 1e-6


def test_asymptotics_report():
    rep = C.ell_asymptotics_report(0.0, radii=[2, 4, 8, 16])
    s2 = np.array([4, 16, 64, 256.0])
    np.testing.assert_allclose(rep["ell1_ratio"], 1.0, rtol=1e-12)
    np.testing.assert_allclose(rep["ell2_ratio"], (s2 + 2) / (s2 + 1), rtol=1e-12)
    rep1 = C.ell_asymptotics_report(1.0, radii=[8.0])
    assert abs(rep1["ell1_ratio"][-1] - 1) < 0.10
    assert abs(rep1["ell2_ratio"][-1] - 1) < 0.10
    assert rep1["flagged"] is False


def test_coercivity_and_j_bounds():
    c0 = C.measure_coercivity(1.0, samples=200, seed=3)
    assert c0 > 0
    fits = C.j_alpha_bound_constants([-1.0, 1.0, 3.0], radii=np.linspace(0, 12, 25))
    for alpha, cst in fits.items():
        assert np.isfinite(cst) and cst >= 0


def test_cache_roundtrip(tmp_path):
    g = VelocityGrid(L=4.0, N=6)
    fld = C.mollify_coefficients(g, -1.0, cache_dir=tmp_path)
    files = list(tmp_path.glob("*.lcoef"))
    assert len(files) == 1
    again = C.mollify_coefficients(g, -1.0, cache_dir=tmp_path)
    np.testing.assert_array_equal(fld.abar, again.abar)
    np.testing.assert_array_equal(fld.ell2, again.ell2)
    raw = C.read_cache(files[0])
    assert raw.gamma == -1.0 and raw.grid_hash == g.content_hash()
