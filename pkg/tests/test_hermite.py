import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from streamflow.errors import DimensionError, DomainError, SampleError
from streamflow.geometry import PolylineSample
from streamflow.hermite import (
    T,
    HermiteSpline,
    assemble_block_matrix,
    batch_coefficients,
    batch_interpolate,
    block_matvec,
    density_number,
    hermite_segment,
    pack_batch_vector,
    spline_derivative,
    spline_eval,
)


def naive_matvec(x):
    """Row-by-row accumulation, zero entries included."""
    out = np.zeros(4)
    for i in range(4):
        acc = 0.0
        for j in range(4):
            acc += T[i, j] * x[j]
        out[i] = acc
    return out


def naive_splines(points, vels):
    m, n, d = points.shape
    out = np.empty((m, n - 1, d, 4))
    for r in range(m):
        for k in range(n - 1):
            seg = hermite_segment(points[r, k], points[r, k + 1], vels[r, k], vels[r, k + 1])
            out[r, k] = seg.coeffs
    return out


def random_batch(rng, m, n, d=2):
    points = np.cumsum(rng.uniform(0.1, 1.0, size=(m, n, d)), axis=1)
    vels = rng.normal(size=(m, n, d))
    return points, vels


@pytest.mark.parametrize(
    "data, expected",
    [
        ((0.0, 1.0, 0.0, 0.0), (-2.0, 3.0, 0.0, 0.0)),
        ((1.0, 1.0, 1.0, 1.0), (2.0, -3.0, 1.0, 1.0)),
        ((0.0, 1.0, 1.0, 1.0), (0.0, 0.0, 1.0, 0.0)),
        ((2.5, 2.5, 0.0, 0.0), (0.0, 0.0, 0.0, 2.5)),
    ],
)
def test_segment_hand_products(data, expected):
    seg = hermite_segment(*[[x] for x in data])
    np.testing.assert_array_equal(seg.coeffs[0], expected)
    np.testing.assert_array_equal(naive_matvec(np.array(data)), expected)


def test_segment_dimension_mismatch():
    with pytest.raises(DimensionError):
        hermite_segment([0, 0], [1, 0], [1, 0], [1, 0, 0])


def test_hermite_conditions_random(rng):
    for _ in range(200):
        d = rng.integers(2, 4)
        pk, pk1, vk, vk1 = (rng.normal(scale=10, size=d) for _ in range(4))
        seg = hermite_segment(pk, pk1, vk, vk1)
        for got, want in ((seg.value(0.0), pk), (seg.value(1.0), pk1), (seg.derivative(0.0), vk), (seg.derivative(1.0), vk1)):
            assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.max(np.abs(want)))


def test_block_matrix_small():
    a1 = assemble_block_matrix(1)
    np.testing.assert_array_equal(a1.toarray(), T)
    a3 = assemble_block_matrix(3)
    assert a3.shape == (12, 12)
    np.testing.assert_array_equal(a3.toarray()[4:8, 4:8], T)
    assert np.count_nonzero(a3.toarray()) == a3.nnz == 30


@pytest.mark.parametrize("m", [0, -2, 1.5])
def test_block_matrix_rejects(m):
    with pytest.raises(DomainError):
        assemble_block_matrix(m)


@pytest.mark.parametrize(
    "m, frac",
    [(1, Fraction(10, 16)), (10, Fraction(1, 16)), (50, Fraction(10, 16 * 50)), (300, Fraction(10, 16 * 300))],
)
def test_density_number(m, frac):
    a = assemble_block_matrix(m)
    assert density_number(a) == frac
    assert density_number(a) <= Fraction(1, m)
    assert a.nnz == 10 * m


def test_density_m10_is_0625():
    assert float(density_number(assemble_block_matrix(10))) == 0.0625


def test_block_matvec_examples():
    a1 = assemble_block_matrix(1)
    np.testing.assert_array_equal(block_matvec(a1, [0, 1, 0, 0]), [-2, 3, 0, 0])
    a2 = assemble_block_matrix(2)
    b = np.array([0.3, -1.2, 2.0, 0.5] * 2)
    out = block_matvec(a2, b)
    np.testing.assert_array_equal(out[:4], out[4:])
    np.testing.assert_array_equal(block_matvec(a2, np.zeros(8)), np.zeros(8))
    with pytest.raises(DimensionError):
        block_matvec(a2, np.zeros(7))


def test_block_matvec_equals_independent_blocks(rng):
    m = 257
    a = assemble_block_matrix(m)
    b = rng.normal(size=4 * m) * rng.uniform(1e-3, 1e3, size=4 * m)
    out = block_matvec(a, b)
    for r in range(m):
        np.testing.assert_array_equal(out[4 * r : 4 * r + 4], naive_matvec(b[4 * r : 4 * r + 4]))
    np.testing.assert_allclose(out, a.toarray() @ b, rtol=1e-13, atol=1e-12)


def test_block_matvec_scales_linearly():
    def best(m, reps=30):
        a = assemble_block_matrix(m)
        b = np.ones(4 * m)
        times = []
        for _ in range(reps):
            t0 = time.perf_counter()
            block_matvec(a, b)
            times.append(time.perf_counter() - t0)
        return min(times)

    for m in (2500, 5000):
        assert best(2 * m) / best(m) <= 3.0


def test_pack_batch_vector_layout():
    points = np.arange(2 * 3 * 2, dtype=float).reshape(2, 3, 2)
    vels = -points
    b = pack_batch_vector(points, vels, 1, 0)
    np.testing.assert_array_equal(b, [2, 4, -2, -4, 8, 10, -8, -10])


def test_batch_straight_line():
    smp = PolylineSample([[0, 0], [1, 0]], [[1, 0], [1, 0]])
    (sp,) = batch_interpolate([smp])
    np.testing.assert_array_equal(sp.coeffs[0, 0], [0, 0, 1, 0])
    np.testing.assert_array_equal(sp.coeffs[0, 1], [0, 0, 0, 0])


def test_batch_identical_copies(rng):
    pts, vel = random_batch(rng, 1, 12)
    smp = PolylineSample(pts[0], vel[0])
    splines = batch_interpolate([smp] * 3)
    for sp in splines[1:]:
        np.testing.assert_array_equal(sp.coeffs, splines[0].coeffs)


def test_batch_product_count(rng):
    pts, vel = random_batch(rng, 5, 17, d=3)
    _, products = batch_coefficients(pts, vel)
    assert products == 16 * 3


@given(m=st.integers(1, 50), n=st.integers(2, 200), d=st.sampled_from([2, 3]), seed=st.integers(0, 2**32 - 1))
def test_batch_equals_naive_loop(m, n, d, seed):
    pts, vel = random_batch(np.random.default_rng(seed), m, n, d)
    coeffs, _ = batch_coefficients(pts, vel)
    np.testing.assert_array_equal(coeffs, naive_splines(pts, vel))


def test_batch_rejects_ragged():
    a = PolylineSample([[0, 0], [1, 0]], [[1, 0], [1, 0]])
    b = PolylineSample([[0, 0], [1, 0], [2, 0]], [[1, 0]] * 3)
    with pytest.raises(SampleError) as info:
        batch_interpolate([a, b])
    assert info.value.index == 1


def make_spline(rng, n=9, d=2):
    pts, vel = random_batch(rng, 1, n, d)
    return batch_interpolate([PolylineSample(pts[0], vel[0])])[0], pts[0], vel[0]


def test_spline_endpoints_and_knots(rng):
    sp, pts, _ = make_spline(rng)
    np.testing.assert_array_equal(spline_eval(sp, 0.0), pts[0])
    np.testing.assert_allclose(spline_eval(sp, 1.0), pts[-1], rtol=1e-12)
    k = sp.n_segments
    for m in range(1, k):
        left = sp.segment(m - 1).value(1.0)
        right = sp.segment(m).value(0.0)
        np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(spline_eval(sp, m / k), pts[m])


def test_spline_derivative_rules(rng):
    sp, _, vel = make_spline(rng)
    k = sp.n_segments
    for m in range(1, k):
        left = k * sp.segment(m - 1).derivative(1.0)
        right = spline_derivative(sp, m / k)
        assert np.max(np.abs(left - right)) <= 1e-12 * (1.0 + np.max(np.abs(right)))
        np.testing.assert_array_equal(right, k * vel[m])
    for s in rng.uniform(0, 1, size=25):
        m, t = sp.locate(s)
        np.testing.assert_array_equal(spline_derivative(sp, s), k * sp.segment(int(m)).derivative(float(t)))


def test_straight_line_derivative():
    sp = batch_interpolate([PolylineSample([[0, 0], [1, 0]], [[1, 0], [1, 0]])])[0]
    for s in (0.0, 0.3, 1.0):
        np.testing.assert_array_equal(spline_derivative(sp, s), [1.0, 0.0])


def test_constant_spline_has_zero_derivative():
    sp = HermiteSpline(np.array([[[0.0, 0.0, 0.0, 2.0], [0.0, 0.0, 0.0, -1.0]]] * 3))
    for s in np.linspace(0, 1, 11):
        np.testing.assert_array_equal(spline_derivative(sp, s), [0.0, 0.0])


@pytest.mark.parametrize("s", [-1e-9, 1.0 + 1e-12, float("nan")])
def test_spline_rejects_outside_unit(s, rng):
    sp, _, _ = make_spline(rng)
    with pytest.raises(DomainError):
        spline_eval(sp, s)
    with pytest.raises(DomainError):
        spline_derivative(sp, s)


def test_spline_curves_agree(rng):
    sp, _, _ = make_spline(rng, n=6, d=3)
    curve = sp.as_curve()
    k = sp.n_segments
    for s in rng.uniform(0, 1, size=20):
        m = int(sp.locate(s)[0])
        seg = sp.segment_curve(m)
        np.testing.assert_allclose(seg.eval(s), curve.eval(s), rtol=1e-14, atol=1e-14)
        np.testing.assert_allclose(seg.deriv(s), curve.deriv(s), rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(seg.deriv2(s), curve.deriv2(s), rtol=1e-12, atol=1e-12)
    assert sp.segment_curve(0).domain == (0.0, 1.0 / k)


def test_tooth_interpolation_converges_cubically():
    from streamflow.geometry import make_tooth

    tooth = make_tooth()
    errs = []
    for n in (11, 21, 41):
        s = tooth.linspace(n)
        ds = s[1] - s[0]
        sp = batch_interpolate([PolylineSample(tooth.eval(s), ds * tooth.deriv(s))])[0]
        sig = np.linspace(0, 1, 1001)
        errs.append(np.max(np.abs(sp.eval(sig) - tooth.eval(tooth.s_lo + sig * (tooth.s_hi - tooth.s_lo)))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 3.5)
