import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reeb_systole import sphere
from reeb_systole.sphere import (FOUR_PI, GREEN_CONSTANT, HarmonicField, ResolutionError,
                                 SingularityError, SphereGrid, SpherePoint, analyze)

unit_vectors = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(
    lambda v: sum(x * x for x in v) > 1e-3)


def test_index_layout():
    assert sphere.index(0, 0) == 0
    assert sphere.index(1, -1) == 1
    assert sphere.index(2, 2) == 8
    assert sphere.n_coeffs(4) == 25
    assert list(sphere.degrees(1)) == [0, 1, 1, 1]
    assert list(sphere.orders(1)) == [0, -1, 0, 1]


def test_weights_sum_to_area():
    g = SphereGrid(17, 34)
    assert g.weights.sum() == pytest.approx(FOUR_PI, abs=1e-13)
    assert g.size == len(g.xyz) == 17 * 34
    assert np.allclose(np.linalg.norm(g.xyz, axis=1), 1.0)


def test_low_degree_closed_forms():
    pts = np.array([[0.3, -0.5, 0.81], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    Y = sphere._backend.basis(1, pts)
    c1 = math.sqrt(3 / FOUR_PI)
    assert np.allclose(Y[:, 0], 1 / math.sqrt(FOUR_PI), atol=1e-15)
    assert np.allclose(Y[:, 1], c1 * pts[:, 1], atol=1e-15)
    assert np.allclose(Y[:, 2], c1 * pts[:, 2], atol=1e-15)
    assert np.allclose(Y[:, 3], c1 * pts[:, 0], atol=1e-15)


def test_orthonormal_on_grid():
    L = 12
    g = SphereGrid.for_band_limit(L)
    B = g.basis(L)
    gram = B.T @ (g.weights[:, None] * B)
    assert np.abs(gram - np.eye(len(gram))).max() < 1e-12


@given(unit_vectors)
@settings(max_examples=50, deadline=None)
def test_addition_theorem(v):
    # sum over m of Y_lm(p)^2 = (2l+1) / 4 pi
    p = np.array(v) / np.linalg.norm(v)
    L = 9
    Y = sphere._backend.basis(L, p[None])[0]
    deg = sphere.degrees(L)
    for l in range(L + 1):
        assert np.sum(Y[deg == l] ** 2) == pytest.approx((2 * l + 1) / FOUR_PI, rel=1e-12)


def test_zonal_sup_norm():
    for l in range(6):
        f = HarmonicField.basis_vector(l, 0)
        assert sphere.sup_norm(f) == pytest.approx(math.sqrt((2 * l + 1) / FOUR_PI), rel=1e-10)


def test_gradient_matches_finite_differences(rng):
    f = HarmonicField(5, rng.normal(size=36))
    p = rng.normal(size=3)
    p /= np.linalg.norm(p)
    _, grad = f.value_and_grad(p)
    e1, e2 = sphere.tangent_frame(p)
    h = 1e-6
    for e in (e1, e2):
        fwd = f((p + h * e) / np.linalg.norm(p + h * e))[0]
        bwd = f((p - h * e) / np.linalg.norm(p - h * e))[0]
        assert (fwd - bwd) / (2 * h) == pytest.approx(grad[0] @ e, abs=1e-7)
    assert abs(grad[0] @ p) < 1e-13


def test_analyze_roundtrip_and_resolution(rng):
    f = HarmonicField(6, rng.normal(size=49))
    g = SphereGrid.for_band_limit(6)
    back = analyze(sphere.synthesize(f, g), g, 6)
    assert np.abs(back.coeffs - f.coeffs).max() < 1e-12
    with pytest.raises(ResolutionError):
        analyze(np.zeros(SphereGrid(8, 16).size), SphereGrid(8, 16), 6)


def test_laplacian_eigenvalues():
    f = HarmonicField.from_terms([(3, 1, 2.0), (1, 0, -1.0)])
    lap = sphere.laplacian(f)
    assert lap[(3, 1)] == -24.0
    assert lap[(1, 0)] == 2.0


def test_field_algebra_and_stats():
    f = HarmonicField.from_terms([(0, 0, math.sqrt(FOUR_PI)), (2, 0, 1.0)])
    g = HarmonicField.from_terms([(1, 1, 1.0)], 3)
    assert f.mean == pytest.approx(1.0)
    assert (f + g).band_limit == 3
    assert (f - f).l2_norm() == 0.0
    assert (2 * g)[(1, 1)] == 2.0
    assert f.is_antipodal() and not g.is_antipodal()
    assert f.zero_mean().mean == 0.0
    assert f.grad_energy() == 6.0
    assert sphere.sobolev_h2_norm(f.zero_mean()) == pytest.approx(math.sqrt(1 + 6 + 36))
    with pytest.raises(ValueError):
        HarmonicField(2, np.zeros(5))


coeff_lists = st.lists(st.tuples(st.integers(0, 5), st.integers(-5, 5),
                                 st.floats(-10, 10, allow_nan=False)), max_size=8)


@given(coeff_lists)
@settings(max_examples=60, deadline=None)
def test_json_roundtrip(terms):
    terms = [(l, max(-l, min(l, m)), v) for l, m, v in terms]
    f = HarmonicField.from_terms(terms, 5)
    g = HarmonicField.from_json(f.to_json())
    assert np.array_equal(f.coeffs, g.coeffs)


def test_sphere_point():
    p = SpherePoint(0, 0, 2)
    assert p.z == 1.0
    assert p.antipode().z == -1.0
    q = SpherePoint.from_angles(math.pi / 2, 0.0)
    assert q.array == pytest.approx([1, 0, 0])
    with pytest.raises(ValueError):
        SpherePoint(0, 0, 0)


def test_extrema_and_oscillation():
    f = HarmonicField.basis_vector(2, 0)
    lo, _, hi, arg = sphere.extrema(f)
    assert hi == pytest.approx(math.sqrt(5 / FOUR_PI), rel=1e-12)
    assert lo == pytest.approx(-0.5 * math.sqrt(5 / FOUR_PI), rel=1e-10)
    assert abs(abs(arg[2]) - 1) < 1e-6
    g = HarmonicField.basis_vector(1, 0, scale=2.0)
    assert sphere.oscillation(g) == pytest.approx(4 * math.sqrt(3 / FOUR_PI), rel=1e-12)


def test_green_function_properties():
    p = np.array([0.0, 0.0, 1.0])
    q = np.array([1.0, 0.0, 0.0])
    assert sphere.green_function(p, q) == pytest.approx(
        -math.log(math.sqrt(2)) / (2 * math.pi) + GREEN_CONSTANT)
    assert sphere.green_function(p, q) == sphere.green_function(q, p)
    assert GREEN_CONSTANT == pytest.approx((2 * math.log(2) - 1) / (4 * math.pi))
    with pytest.raises(SingularityError):
        sphere.green_function(p, p)


def test_green_cap_closed_form():
    # at s = 1 the cap covers the sphere
    assert sphere._cap_log_integral(1.0) == pytest.approx(-2 * math.log(2) + 1, abs=1e-15)
    assert sphere._cap_log_integral(0.0) == 0.0


def test_green_integral_vanishes(rng):
    for _ in range(5):
        r = sphere.green_integral(rng.normal(size=3))
        assert abs(r["total"]) < 1e-12
        assert r["log_part"] == pytest.approx(-2 * math.log(2) + 1, abs=1e-12)


def test_green_reproduces_field(rng):
    # u(p) = mean(u) - int G(p, q) Delta u(q) dA(q)
    u = HarmonicField.from_terms([(0, 0, 0.7), (2, 1, 0.4), (3, -2, -0.3), (4, 0, 0.2)])
    lap = sphere.laplacian(u)
    for _ in range(3):
        p = rng.normal(size=3)
        p /= np.linalg.norm(p)
        val = u.mean - sphere.green_convolve(p, lap)
        assert val == pytest.approx(u(p)[0], abs=1e-10)


def test_grid_csv(tmp_path):
    g = SphereGrid(4, 8)
    path = tmp_path / "g.csv"
    sphere.write_grid_csv(path, g, np.arange(g.size, dtype=float))
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["theta", "phi", "value"]
    assert len(rows) == g.size + 1
    assert float(rows[-1][2]) == g.size - 1
