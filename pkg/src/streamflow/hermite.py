"""C1 cubic Hermite interpolation of sampled streamlines.

Every segment ``{P_k, P_k+1}`` is interpolated by ``p(t) = a3 t^3 + a2 t^2 +
a1 t + a0`` on ``t in [0, 1]`` with ``p(0) = P_k``, ``p(1) = P_k+1``,
``p'(0) = v_k`` and ``p'(1) = v_k+1``.  The coefficients are ``T @ (P_k,
P_k+1, v_k, v_k+1)`` per spatial component, and for ``M`` streamlines at once
they are one product with the block-diagonal matrix ``diag(T, ..., T)``.

The block matrix is never materialised; one shared copy of ``T`` and the block
count are enough.  All code paths apply ``T`` through the same fixed sequence
of floating point operations, so the batched kernel and the per-segment
routine agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

from .errors import DimensionError, DomainError, SampleError
from .geometry import PolylineSample, StreamlineCurve

T = np.array(
    [
        [2.0, -2.0, 1.0, 1.0],
        [-3.0, 3.0, -2.0, -1.0],
        [0.0, 0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
    ]
)
T.setflags(write=False)
T_NONZEROS = int(np.count_nonzero(T))


def _apply_t(p0, p1, v0, v1):
    # Keep in sync with _matvec_kernel: identical operation order.
    a3 = 2.0 * p0 - 2.0 * p1 + v0 + v1
    a2 = -3.0 * p0 + 3.0 * p1 - 2.0 * v0 - v1
    return a3, a2, v0 * 1.0, p0 * 1.0


@numba.njit(nogil=True, cache=True)
def _matvec_kernel(b, out):
    for r in range(b.shape[0] // 4):
        i = 4 * r
        p0 = b[i]
        p1 = b[i + 1]
        v0 = b[i + 2]
        v1 = b[i + 3]
        out[i] = 2.0 * p0 - 2.0 * p1 + v0 + v1
        out[i + 1] = -3.0 * p0 + 3.0 * p1 - 2.0 * v0 - v1
        out[i + 2] = v0 * 1.0
        out[i + 3] = p0 * 1.0


@numba.njit(nogil=True, cache=True)
def _batch_kernel(points, vels, coeffs):
    m_lines, n_pts, dim = points.shape
    b = np.empty(4 * m_lines)
    out = np.empty(4 * m_lines)
    products = 0
    for k in range(n_pts - 1):
        for c in range(dim):
            for r in range(m_lines):
                b[4 * r] = points[r, k, c]
                b[4 * r + 1] = points[r, k + 1, c]
                b[4 * r + 2] = vels[r, k, c]
                b[4 * r + 3] = vels[r, k + 1, c]
            _matvec_kernel(b, out)
            products += 1
            for r in range(m_lines):
                for j in range(4):
                    coeffs[r, k, c, j] = out[4 * r + j]
    return products


@dataclass(frozen=True)
class CubicSegment:
    """Cubic with ``coeffs[c] = (a3, a2, a1, a0)`` for each spatial component ``c``."""

    coeffs: np.ndarray

    @property
    def dim(self):
        return self.coeffs.shape[0]

    def value(self, t):
        a = self.coeffs
        return ((a[:, 0] * t + a[:, 1]) * t + a[:, 2]) * t + a[:, 3]

    def derivative(self, t):
        a = self.coeffs
        return (3.0 * a[:, 0] * t + 2.0 * a[:, 1]) * t + a[:, 2]

    def second_derivative(self, t):
        a = self.coeffs
        return 6.0 * a[:, 0] * t + 2.0 * a[:, 1]


def hermite_segment(pk, pk1, vk, vk1):
    """Cubic through ``pk -> pk1`` with end tangents ``vk``, ``vk1``."""
    arrs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in (pk, pk1, vk, vk1)]
    if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1:
        raise DimensionError(f"segment data shapes differ: {[a.shape for a in arrs]}")
    return CubicSegment(np.stack(_apply_t(*arrs), axis=-1))


@dataclass(frozen=True)
class BlockDiagonalMatrix:
    """Logical ``4M x 4M`` matrix ``diag(T, ..., T)`` stored as ``(T, M)``."""

    block: np.ndarray
    count: int

    @property
    def shape(self):
        n = 4 * self.count
        return (n, n)

    @property
    def nnz(self):
        return T_NONZEROS * self.count

    def toarray(self):
        """Dense form, for inspection of small matrices only."""
        return np.kron(np.eye(self.count), self.block)


def assemble_block_matrix(m):
    if int(m) != m or m < 1:
        raise DomainError(f"block count must be a positive integer, got {m}")
    return BlockDiagonalMatrix(T, int(m))


def density_number(a):
    """Fraction of nonzero entries, ``10 M / (4M)^2``."""
    rows, cols = a.shape
    return Fraction(a.nnz, rows * cols)


def block_matvec(a, b):
    b = np.ascontiguousarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != 4 * a.count:
        raise DimensionError(f"vector of length {b.shape} does not match {a.count} blocks of 4")
    out = np.empty_like(b)
    _matvec_kernel(b, out)
    return out


def pack_batch_vector(points, velocities, k, component):
    """Per-streamline quadruples ``(P_k, P_k+1, v_k, v_k+1)`` for one component.

    ``points`` and ``velocities`` have shape ``(M, N, d)``.
    """
    p = points[:, :, component]
    v = velocities[:, :, component]
    return np.stack([p[:, k], p[:, k + 1], v[:, k], v[:, k + 1]], axis=1).ravel()


@dataclass(frozen=True)
class HermiteSpline:
    """Chain of ``K`` cubics reparametrised on ``s in [0, 1]`` by ``s = (m + t) / K``.

    ``coeffs`` has shape ``(K, d, 4)``.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim != 3 or c.shape[2] != 4 or c.shape[0] < 1:
            raise DimensionError(f"spline coefficients must have shape (K, d, 4), got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_segments(self):
        return self.coeffs.shape[0]

    @property
    def dim(self):
        return self.coeffs.shape[1]

    @property
    def segments(self):
        return [CubicSegment(c) for c in self.coeffs]

    def segment(self, m):
        return CubicSegment(self.coeffs[m])

    def locate(self, s):
        """Segment index and local parameter of global ``s`` (clamped at the ends)."""
        k = self.n_segments
        s = np.asarray(s, dtype=float)
        m = np.clip(np.floor(s * k), 0, k - 1).astype(int)
        return m, s * k - m

    def _poly(self, s, order):
        m, t = self.locate(s)
        a = self.coeffs[m]
        t = np.asarray(t)[..., None]
        if order == 0:
            return ((a[..., 0] * t + a[..., 1]) * t + a[..., 2]) * t + a[..., 3]
        k = self.n_segments
        if order == 1:
            return k * ((3.0 * a[..., 0] * t + 2.0 * a[..., 1]) * t + a[..., 2])
        return (k * k) * (6.0 * a[..., 0] * t + 2.0 * a[..., 1])

    def eval(self, s):
        return self._poly(_check_unit(s), 0)

    def derivative(self, s):
        return self._poly(_check_unit(s), 1)

    def second_derivative(self, s):
        return self._poly(_check_unit(s), 2)

    def knots(self):
        return np.arange(self.n_segments + 1) / self.n_segments

    def as_curve(self):
        """Global curve on ``[0, 1]``; extrapolates the end cubics outside."""
        return StreamlineCurve(
            (0.0, 1.0),
            lambda s: self._poly(s, 0),
            lambda s: self._poly(s, 1),
            lambda s: self._poly(s, 2),
            kind="spline-backed",
        )

    def segment_curve(self, m):
        """Segment ``m`` as a curve on ``[m/K, (m+1)/K]`` of the global parameter."""
        k = self.n_segments
        seg = self.coeffs[m]
        a3, a2, a1, a0 = seg[:, 0], seg[:, 1], seg[:, 2], seg[:, 3]

        def local(s):
            return (np.asarray(s, dtype=float) * k - m)[..., None]

        def ev(s):
            t = local(s)
            return ((a3 * t + a2) * t + a1) * t + a0

        def d1(s):
            t = local(s)
            return k * ((3.0 * a3 * t + 2.0 * a2) * t + a1)

        def d2(s):
            t = local(s)
            return (k * k) * (6.0 * a3 * t + 2.0 * a2)

        return StreamlineCurve((m / k, (m + 1) / k), ev, d1, d2, kind="spline-backed")


def _check_unit(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~((arr >= 0.0) & (arr <= 1.0))):
        raise DomainError(f"spline parameter must lie in [0, 1], got {s}")
    return arr


def spline_eval(sp, s):
    return sp.eval(s)


def spline_derivative(sp, s):
    return sp.derivative(s)


def stack_samples(samples):
    """Stack equal-length samples into ``(M, N, d)`` point and velocity arrays."""
    samples = list(samples)
    if not samples:
        raise SampleError("empty batch")
    n, d = samples[0].n, samples[0].dim
    for r, smp in enumerate(samples):
        if smp.n != n:
            raise SampleError(f"ragged batch: streamline {r} has {smp.n} points, expected {n}", index=r)
        if smp.dim != d:
            raise DimensionError(f"streamline {r} has dimension {smp.dim}, expected {d}")
    points = np.stack([smp.points for smp in samples])
    vels = np.stack([smp.velocities for smp in samples])
    return points, vels


def batch_coefficients(points, velocities):
    """Coefficients ``(M, N-1, d, 4)`` by ``N-1`` block products per component.

    Returns the coefficient array and the number of block products performed.
    """
    points = np.ascontiguousarray(points, dtype=float)
    velocities = np.ascontiguousarray(velocities, dtype=float)
    if points.shape != velocities.shape or points.ndim != 3:
        raise DimensionError(f"points {points.shape} and velocities {velocities.shape} must both be (M, N, d)")
    m, n, d = points.shape
    if m < 1 or n < 2:
        raise SampleError(f"need M >= 1 streamlines of N >= 2 points, got M={m}, N={n}")
    coeffs = np.empty((m, n - 1, d, 4))
    products = _batch_kernel(points, velocities, coeffs)
    return coeffs, int(products)


def batch_interpolate(samples):
    """Interpolate ``M`` equal-length streamlines; ragged input is rejected."""
    if isinstance(samples, PolylineSample):
        samples = [samples]
    points, vels = stack_samples(samples)
    coeffs, _ = batch_coefficients(points, vels)
    return [HermiteSpline(c) for c in coeffs]


def interpolate(sample):
    """Single-streamline convenience wrapper around :func:`batch_interpolate`."""
    return batch_interpolate([sample])[0]
