"""Pointwise kernels, weights, projector and cutoff."""
import math

import numpy as np
import pytest

from landaulab import kernels as K
from landaulab.errors import SingularityError, DomainError


def test_kernel_a_examples():
    np.testing.assert_allclose(K.kernel_a(0.0, [1, 0, 0]), np.diag([0, 1, 1]), atol=1e-15)
    np.testing.assert_allclose(K.kernel_a(1.0, [0, 2, 0]), 8 * np.diag([1, 0, 1]), atol=1e-13)
    for g in (-2.0, -1.0, 0.0, 1.0):
        assert np.allclose(K.kernel_a(g, [3.0, 0, 0]) @ [3.0, 0, 0], 0)
        np.testing.assert_array_equal(K.kernel_a(g, [0, 0, 0]), np.zeros((3, 3)))


def test_kernel_b_c_examples():
    np.testing.assert_allclose(K.kernel_b(0.0, [1, 0, 0]), [-2, 0, 0])
    assert K.kernel_c(0.0, [1, 0, 0]) == pytest.approx(-6)
    np.testing.assert_allclose(K.kernel_b(1.0, [0, 0, 2]), [0, 0, -8])
    assert K.kernel_c(1.0, [0, 0, 2]) == pytest.approx(-16)
    np.testing.assert_allclose(K.kernel_b(-2.0, [2, 0, 0]), [-1, 0, 0])
    assert K.kernel_c(-2.0, [2, 0, 0]) == pytest.approx(-0.5)
    with pytest.raises(SingularityError):
        K.kernel_b(-1.0, [0, 0, 0])
    with pytest.raises(SingularityError):
        K.kernel_c(-0.5, [0, 0, 0])


def test_potential_range():
    K.Potential(-2.0)
    K.Potential(1.0)
    with pytest.raises(DomainError):
        K.Potential(2.0)
    with pytest.raises(DomainError):
        K.Potential(-3.0)


def test_kernel_a_symmetric_psd(rng):
    z = rng.normal(size=(200, 3)) * 3
    for g in (-2.0, -0.7, 0.0, 0.5, 1.0):
        a = K.kernel_a(g, z)
        np.testing.assert_allclose(a, np.swapaxes(a, -1, -2), atol=1e-12)
        assert np.linalg.eigvalsh(a).min() > -1e-10 * np.abs(a).max()
        az = np.einsum("nij,nj->ni", a, z)
        assert np.abs(az).max() < 1e-12 * np.abs(a).max() * np.abs(z).max()


@pytest.mark.parametrize("gamma", [-2.0, -1.0, 0.0, 0.5, 1.0])
def test_divergence_identities(gamma, rng):
    # rows of a differentiate into b, and b into c, at second order
    n = np.sqrt(rng.uniform(0.25, 100, size=20))
    d = rng.normal(size=(20, 3))
    z = d / np.linalg.norm(d, axis=1)[:, None] * n[:, None]
    errs = []
    for h in (1e-2, 5e-3):
        div_a = np.zeros((20, 3))
        div_b = np.zeros(20)
        for j in range(3):
            e = np.zeros(3)
            e[j] = h
            div_a += (K.kernel_a(gamma, z + e)[:, :, j] - K.kernel_a(gamma, z - e)[:, :, j]) / (2 * h)
            div_b += (K.kernel_b(gamma, z + e)[:, j] - K.kernel_b(gamma, z - e)[:, j]) / (2 * h)
        errs.append((np.abs(div_a - K.kernel_b(gamma, z)).max(),
                     np.abs(div_b - K.kernel_c(gamma, z)).max()))
    ea, eb = np.array(errs).T
    assert ea[1] < 1e-3 and eb[1] < 1e-3
    # halving h divides the error by about four
    for e in (ea, eb):
        # exact (polynomial) cases have round-off error only
        assert e[1] < 1e-8 or e[0] / e[1] > 3.0


def test_maxwellian():
    assert K.maxwellian([0, 0, 0]) == pytest.approx(0.0634936359342410, rel=1e-12)
    assert K.maxwellian([1, 1, 1]) == pytest.approx((2 * math.pi) ** -1.5 * math.exp(-1.5), rel=1e-14)


def test_weight_examples():
    w = K.WeightSpec.polynomial(10)
    m, d1, d2 = K.weight_eval(w, [0, 0, 0]), *K.weight_log_derivs(w, [0, 0, 0])
    assert m == 1.0
    np.testing.assert_allclose(d1, 0)
    np.testing.assert_allclose(d2, 10 * np.eye(3))
    ws = K.WeightSpec.stretched(1.0, 1.0)
    d1, _ = K.weight_log_derivs(ws, [1, 0, 0])
    assert d1[0] == pytest.approx(2 ** -0.5, rel=1e-14)
    wg = K.WeightSpec.gaussian(0.25)
    assert K.weight_eval(wg, [2, 0, 0]) == pytest.approx(math.exp(1.25), rel=1e-14)
    assert (w.sigma, ws.sigma, wg.sigma) == (0.0, 1.0, 2.0)


def test_weight_constraints():
    with pytest.raises(DomainError):
        K.WeightSpec.gaussian(0.5)
    with pytest.raises(DomainError):
        K.WeightSpec.stretched(1.0, 2.0)
    with pytest.raises(DomainError):
        K.WeightSpec.stretched(-1.0, 1.0)


@pytest.mark.parametrize("w", [K.WeightSpec.polynomial(7.5), K.WeightSpec.stretched(0.7, 1.3),
                               K.WeightSpec.gaussian(0.2)])
def test_weight_log_derivs_match_finite_differences(w, rng):
    v = rng.normal(size=(10, 3)) * 2
    h = 1e-4
    logm = lambda x: np.log(K.weight_eval(w, x))
    d1, d2 = K.weight_log_derivs(w, v)
    m0 = K.weight_eval(w, v)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (logm(v + e) - logm(v - e)) / (2 * h)
        np.testing.assert_allclose(d1[:, i], fd, rtol=1e-6, atol=1e-8)
        for j in range(3):
            f = np.zeros(3)
            f[j] = h
            fd2 = (K.weight_eval(w, v + e + f) - K.weight_eval(w, v + e - f)
                   - K.weight_eval(w, v - e + f) + K.weight_eval(w, v - e - f)) / (4 * h * h)
            np.testing.assert_allclose(d2[:, i, j], fd2 / m0, rtol=1e-5, atol=1e-6)


def test_radial_projector():
    np.testing.assert_allclose(K.radial_projector([1, 0, 0], [1, 2, 3]), [1, 0, 0])
    np.testing.assert_array_equal(K.radial_projector([0, 0, 0], [1, 2, 3]), [0, 0, 0])
    np.testing.assert_allclose(K.radial_projector([1, 1, 0], [1, 0, 0]), [0.5, 0.5, 0])


def test_radial_projector_properties(rng):
    v = rng.normal(size=(50, 3))
    xi = rng.normal(size=(50, 3))
    p = K.radial_projector(v, xi)
    np.testing.assert_allclose(K.radial_projector(v, p), p, atol=1e-14)
    assert np.all(np.linalg.norm(p, axis=1) <= np.linalg.norm(xi, axis=1) + 1e-14)


def test_cutoff():
    c = K.CutoffSpec(M=1.0, R=4.0)
    assert K.cutoff_chi(c, [2, 0, 0]) == 1.0
    assert K.cutoff_chi(c, [10, 0, 0]) == 0.0
    r = np.linspace(4.3, 7.7, 50)
    vals = K.cutoff_chi(c, np.stack([r, 0 * r, 0 * r], axis=-1))
    assert np.all((vals > 0) & (vals < 1))
    assert np.all(np.diff(vals) < 0)
    # the gradient bound is C_chi / R
    g = K.cutoff_grad_norm(c, np.stack([r, 0 * r, 0 * r], axis=-1))
    assert g.max() <= K.CHI_DERIV_BOUND / c.R + 1e-12
    with pytest.raises(DomainError):
        K.CutoffSpec(M=-1.0, R=2.0)
    with pytest.raises(DomainError):
        K.CutoffSpec(M=1.0, R=0.5)
