import numpy as np
import pytest

from crlab.catalog import HEX_LATTICE, geodesic_sphere, hexagonal_torus, make_chart, perturbed_torus, whitney_sphere
from crlab.geometry import apply_complex_structure, theta
from crlab.immersion import (
    Chart,
    beta_curl,
    check_chart,
    evaluate_jet,
    fd_jets,
    fundamental_data,
    horizontality_residual,
    intrinsic_scalar_curvature,
    sample_interior,
    scalar_curvature_residual,
)
from crlab.integration import build_grid

CHARTS = {
    "geodesic": geodesic_sphere(2, 2),
    "geodesic_s3": geodesic_sphere(2, 3),
    "whitney": whitney_sphere(2, 2, [0.3, 0, 0, 0, 0, 0]),
    "whitney_mixed": whitney_sphere(2, 3, [0.2, -0.1, 0.3, 0, 0.1, 0, 0.2, 0]),
    "hex": hexagonal_torus(),
    "perturbed": perturbed_torus(0.2, 2),
    "circle": make_chart("horizontal_circle", n=2),
}


def hopf_circle():
    # z_1 = e^{is}: a fibre of the Hopf map, tangent to the Reeb field
    f = lambda u: np.stack([np.cos(u[:, 0]), 0 * u[:, 0], np.sin(u[:, 0]), 0 * u[:, 0]], axis=1)
    return Chart(func=f, m=1, n=1, bounds=((0, 2 * np.pi),), periodic=(True,))


def test_geodesic_equator_frame_orthonormal():
    p, d1, _ = evaluate_jet(geodesic_sphere(2, 2), np.array([np.pi / 2, 0.0]))
    assert np.allclose(p, [0, 0, 0, 1, 0, 0])
    assert np.allclose(d1 @ d1.T, np.eye(2), atol=1e-15)


def test_hex_torus_frame_at_origin():
    p, d1, _ = evaluate_jet(hexagonal_torus(), np.zeros(2))
    assert np.allclose(p, np.r_[np.ones(3), np.zeros(3)] / np.sqrt(3), atol=1e-15)
    # lattice coordinates s -> (x, y) = s @ HEX_LATTICE, so d/ds = HEX_LATTICE @ d/d(x, y)
    dxy = np.linalg.solve(HEX_LATTICE, d1)
    g = dxy @ dxy.T
    assert g[0, 0] == pytest.approx(8 * np.pi**2 / 3, rel=1e-14)
    assert g[1, 1] == pytest.approx(8 * np.pi**2 / 3, rel=1e-14)
    assert abs(g[0, 1]) <= 1e-12


@pytest.mark.parametrize("name", ["hex", "whitney", "perturbed"])
def test_analytic_jets_match_finite_differences(name):
    chart = CHARTS[name]
    u = sample_interior(chart, 6, seed=4)
    p, d1, d2 = chart.jet_batch(u)
    q, e1, e2 = fd_jets(chart.func, u, 1e-5, 1e-4)
    scale = np.max(np.abs(d2))
    assert np.max(np.abs(d1 - e1)) <= 1e-8 * np.max(np.abs(d1))
    assert np.max(np.abs(d2 - e2)) <= 1e-6 * scale


def test_horizontality_residuals():
    s = geodesic_sphere(2, 2)
    assert horizontality_residual(s, build_grid(s, 16)) <= 1e-12
    h = hexagonal_torus()
    assert horizontality_residual(h, build_grid(h, 32)) <= 1e-10
    c = hopf_circle()
    assert horizontality_residual(c, build_grid(c, 16)) == pytest.approx(1.0, abs=1e-8)


def test_non_horizontal_chart_rejected():
    with pytest.raises(ValueError, match="not horizontal"):
        fundamental_data(hopf_circle(), np.array([0.4]))


def test_degenerate_chart_rejected():
    f = lambda u: np.stack([np.cos(u[:, 0]), np.sin(u[:, 0]), 0 * u[:, 0], 0 * u[:, 0], 0 * u[:, 0], 0 * u[:, 0]], 1)
    flat = Chart(func=lambda u: f(u[:, :1]), m=2, n=2, bounds=((0, 1), (0, 1)), periodic=(False, False))
    with pytest.raises(ValueError):
        check_chart(flat, [[0.3, 0.3]])
    with pytest.raises(ValueError):
        fundamental_data(flat, np.array([0.3, 0.3]))


def test_chart_validation():
    with pytest.raises(ValueError):
        Chart(func=None, m=3, n=2, bounds=((0, 1),) * 3, periodic=(False,) * 3)
    with pytest.raises(ValueError):
        Chart(func=None, m=2, n=2, bounds=((0, 1),), periodic=(False, False))
    off = Chart(func=lambda u: 2 * np.c_[np.cos(u), np.sin(u), 0 * u, 0 * u], m=1, n=1,
                bounds=((0, 1),), periodic=(False,))
    with pytest.raises(ValueError, match="sphere"):
        check_chart(off, [[0.2]])


@pytest.mark.parametrize("name", CHARTS)
def test_catalog_charts_are_valid(name):
    chart = CHARTS[name]
    check_chart(chart, sample_interior(chart, 20, seed=1))


def test_geodesic_sphere_totally_geodesic():
    d = fundamental_data(geodesic_sphere(2, 2), sample_interior(geodesic_sphere(2, 2), 8, seed=0))
    for name in ("second_fund", "mean_curv", "sigma", "U", "A_hat_traceless", "beta"):
        assert np.max(np.abs(getattr(d, name))) <= 1e-14


def test_hex_torus_curvature():
    h = hexagonal_torus()
    d = fundamental_data(h, sample_interior(h, 10, seed=2))
    assert np.max(np.linalg.norm(d.mean_curv, axis=1)) <= 1e-6
    assert np.allclose(d.norm2("second_fund"), 2.0, atol=1e-5)
    assert np.allclose(d.norm2("U"), 2.0, atol=1e-5)
    assert np.max(np.abs(d.A_Nhat)) <= 1e-12


def test_whitney_sphere_is_umbilic_but_not_minimal():
    w = CHARTS["whitney"]
    d = fundamental_data(w, sample_interior(w, 10, seed=3))
    assert np.max(d.norm2("U")) <= 1e-20
    assert np.max(d.norm2("A_hat_traceless")) <= 1e-20
    assert np.min(np.linalg.norm(d.mean_curv, axis=1)) > 0.1


@pytest.mark.parametrize("name", CHARTS)
def test_pointwise_identities(name):
    chart = CHARTS[name]
    d = fundamental_data(chart, sample_interior(chart, 12, seed=7))
    m = chart.m
    assert np.max(np.abs(d.A_T)) <= 1e-8
    assert np.max(np.abs(d.H_T)) <= 1e-8
    assert np.max(np.abs(np.einsum("kn,kn->k", d.mean_curv, d.reeb))) <= 1e-8
    for perm in [(0, 2, 1, 3), (0, 1, 3, 2), (0, 3, 2, 1), (0, 2, 3, 1), (0, 3, 1, 2)]:
        assert np.max(np.abs(d.sigma - np.transpose(d.sigma, perm))) <= 1e-8
    assert np.max(np.abs(np.einsum("kij,kijn->kn", d.inverse_metric, d.U))) <= 1e-10
    assert np.max(np.abs(np.einsum("kij,kijn->kn", d.inverse_metric, d.A_hat_traceless))) <= 1e-10
    uah = d.norm2("U") - d.norm2("A_N") + 3 * d.norm2("H_N") / (m + 2)
    assert np.max(np.abs(uah)) <= 1e-8
    split_a = d.norm2("second_fund") - d.norm2("A_N") - d.norm2("A_Nhat")
    split_h = d.norm2("mean_curv") - d.norm2("H_N") - d.norm2("H_Nhat")
    assert np.max(np.abs(split_a)) <= 1e-10 * (1 + np.max(d.norm2("second_fund")))
    assert np.max(np.abs(split_h)) <= 1e-10 * (1 + np.max(d.norm2("mean_curv")))


@pytest.mark.parametrize("name", CHARTS)
def test_beta_is_pairing_of_hn_with_j_tangent(name):
    chart = CHARTS[name]
    d = fundamental_data(chart, sample_interior(chart, 6, seed=8))
    jt = apply_complex_structure(d.tangents)
    pairing = np.einsum("kn,kin->ki", d.H_N, jt)
    assert np.allclose(d.beta, pairing, atol=1e-10)
    # the alternative -<J H^N, d_k phi> is the same number since J is skew
    assert np.allclose(d.beta, -np.einsum("kn,kin->ki", apply_complex_structure(d.H_N), d.tangents), atol=1e-10)


@pytest.mark.parametrize("name", ["geodesic", "whitney", "whitney_mixed", "hex", "perturbed"])
def test_beta_closed(name):
    chart = CHARTS[name]
    for u in sample_interior(chart, 4, seed=9):
        assert abs(beta_curl(chart, u)) <= 1e-6


def test_beta_nonzero_on_whitney():
    d = fundamental_data(CHARTS["whitney"], np.array([1.0, 2.0]))
    assert np.linalg.norm(d.beta) > 1e-2


def test_scalar_curvature_examples():
    s = geodesic_sphere(2, 2)
    assert intrinsic_scalar_curvature(s, np.array([1.0, 2.0])) == pytest.approx(2.0, abs=1e-6)
    assert abs(scalar_curvature_residual(s, np.array([1.0, 2.0]))) <= 1e-6
    h = hexagonal_torus()
    assert abs(intrinsic_scalar_curvature(h, np.array([0.2, 0.6]))) <= 1e-6
    assert abs(scalar_curvature_residual(h, np.array([0.2, 0.6]))) <= 1e-4


@pytest.mark.parametrize("name", ["whitney", "whitney_mixed", "perturbed"])
def test_scalar_curvature_identity_sampled(name):
    chart = CHARTS[name]
    worst = max(abs(scalar_curvature_residual(chart, u)) for u in sample_interior(chart, 10, seed=5))
    assert worst <= 1e-4


def test_scalar_curvature_mean_curvature_terms_matter():
    # on a non-minimal Whitney sphere the identity fails once the |H|^2 terms are dropped
    w = CHARTS["whitney"]
    u = np.array([1.0, 2.0])
    d = fundamental_data(w, u)
    r = intrinsic_scalar_curvature(w, u)
    wrong = 2.0 - d.norm2("U")
    assert abs(r - wrong) > 1e-2


def test_fd_fallback_chart_matches_analytic():
    h = hexagonal_torus()
    fd = Chart(func=h.func, m=2, n=2, bounds=h.bounds, periodic=h.periodic)
    u = np.array([0.31, 0.77])
    a, b = fundamental_data(h, u), fundamental_data(fd, u)
    assert np.allclose(a.metric, b.metric, rtol=1e-9)
    assert np.allclose(a.second_fund, b.second_fund, atol=1e-5)


def test_theta_of_tangents_zero_on_whitney():
    w = CHARTS["whitney_mixed"]
    p, d1, _ = w.jet_batch(sample_interior(w, 5, seed=1))
    assert np.max(np.abs(theta(p[:, None, :], d1))) <= 1e-12
