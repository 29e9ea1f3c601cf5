"""Parametric streamline curves.

Curves are immutable bundles of vectorised callables: ``eval``, ``deriv`` and
``deriv2`` accept a scalar ``s`` (returning a ``(d,)`` array) or an array of
parameters (returning ``(n, d)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AlignmentError, DimensionError, DomainError, RegularityError, SampleError

CurveFn = Callable[[np.ndarray], np.ndarray]

CURVE_KINDS = ("tooth", "lobe", "helix", "spline-backed", "user-defined")

# Number of probe points used to check regularity at construction.
_PROBES = 257


def _stack(*components):
    return np.stack(np.broadcast_arrays(*components), axis=-1)


def central_difference(fn, s, h=1e-6):
    """Second-order central difference of ``fn`` at ``s``."""
    return (np.asarray(fn(s + h)) - np.asarray(fn(s - h))) / (2.0 * h)


@dataclass(frozen=True)
class StreamlineCurve:
    domain: tuple[float, float]
    eval: CurveFn = field(repr=False)
    deriv: CurveFn = field(repr=False)
    deriv2: CurveFn = field(repr=False)
    kind: str = "user-defined"
    dim: int = field(default=0)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.domain)
        if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
            raise DomainError(f"degenerate curve domain [{lo}, {hi}]")
        if self.kind not in CURVE_KINDS:
            raise DomainError(f"unknown curve kind {self.kind!r}")
        object.__setattr__(self, "domain", (lo, hi))
        dim = np.asarray(self.eval(lo)).shape[-1]
        if dim not in (2, 3):
            raise DimensionError(f"curves must live in R^2 or R^3, got dimension {dim}")
        object.__setattr__(self, "dim", int(dim))

    @property
    def s_lo(self):
        return self.domain[0]

    @property
    def s_hi(self):
        return self.domain[1]

    def contains(self, s, rel_tol=1e-12):
        lo, hi = self.domain
        tol = rel_tol * max(1.0, abs(lo), abs(hi))
        return lo - tol <= s <= hi + tol

    def linspace(self, n):
        return np.linspace(self.s_lo, self.s_hi, n)

    def speed(self, s):
        return np.linalg.norm(self.deriv(s), axis=-1)

    def check_regular(self, probes=_PROBES):
        """Raise :class:`RegularityError` if the tangent vanishes on a probe grid."""
        s = self.linspace(probes)
        speed = self.speed(s)
        scale = float(np.max(np.abs(self.eval(s)))) + 1.0
        bad = np.flatnonzero(~(speed > 1e-14 * scale))
        if bad.size:
            raise RegularityError(f"{self.kind} curve has zero tangent near s = {s[bad[0]]:.17g}")
        return self


@dataclass(frozen=True)
class PolylineSample:
    """Ordered streamline points with their sampled velocity vectors."""

    points: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        vel = np.array(self.velocities, dtype=float)
        if pts.ndim != 2 or vel.ndim != 2:
            raise SampleError("points and velocities must be 2-D arrays (N, d)")
        if pts.shape != vel.shape:
            raise SampleError(f"points {pts.shape} and velocities {vel.shape} differ in shape")
        if pts.shape[0] < 2:
            raise SampleError("a streamline needs at least two points")
        if pts.shape[1] not in (2, 3):
            raise DimensionError(f"points must be 2-D or 3-D, got {pts.shape[1]}")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(vel))):
            raise SampleError("non-finite sample values")
        same = np.flatnonzero(np.all(pts[1:] == pts[:-1], axis=1))
        if same.size:
            k = int(same[0])
            raise SampleError(f"consecutive points {k} and {k + 1} coincide", index=k + 1)
        pts.setflags(write=False)
        vel.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "velocities", vel)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]


def make_tooth(s0=1.0):
    """Involute flank of a gear tooth, ``s`` in ``[pi + atan(s0), 3 pi / 2]``."""
    if not s0 > 0:
        raise DomainError(f"tooth parameter s0 must be positive, got {s0}")

    def ev(s):
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(s), np.sin(s)
        return _stack(c + s * sn, sn - s * c)

    def d1(s):
        s = np.asarray(s, dtype=float)
        return _stack(s * np.cos(s), s * np.sin(s))

    def d2(s):
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(s), np.sin(s)
        return _stack(c - s * sn, sn + s * c)

    curve = StreamlineCurve((math.pi + math.atan(s0), 1.5 * math.pi), ev, d1, d2, kind="tooth")
    return curve.check_regular()


def make_helix(a1, a2, a3, a4, domain=(0.0, 4.0 * math.pi)):
    """Suction-zone turbulent streamline ``([a1+a2 s] sin s + a3 s, [a1+a2 s] cos s, a4 s)``."""

    def ev(s):
        s = np.asarray(s, dtype=float)
        rad = a1 + a2 * s
        return _stack(rad * np.sin(s) + a3 * s, rad * np.cos(s), a4 * s)

    def d1(s):
        s = np.asarray(s, dtype=float)
        rad = a1 + a2 * s
        c, sn = np.cos(s), np.sin(s)
        return _stack(a2 * sn + rad * c + a3, a2 * c - rad * sn, np.full_like(s, float(a4)))

    def d2(s):
        s = np.asarray(s, dtype=float)
        rad = a1 + a2 * s
        c, sn = np.cos(s), np.sin(s)
        return _stack(2.0 * a2 * c - rad * sn, -2.0 * a2 * sn - rad * c, np.zeros_like(s))

    return StreamlineCurve(tuple(domain), ev, d1, d2, kind="helix").check_regular()


def _rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _rotated(curve, rot, kind=None):
    rt = rot.T

    def ev(s):
        return np.asarray(curve.eval(s)) @ rt

    def d1(s):
        return np.asarray(curve.deriv(s)) @ rt

    def d2(s):
        return np.asarray(curve.deriv2(s)) @ rt

    return StreamlineCurve(curve.domain, ev, d1, d2, kind=kind or curve.kind)


@dataclass(frozen=True)
class RotationEvolution:
    """Rigid rotation of a planar streamline with angular speed ``omega``."""

    omega: float
    base: StreamlineCurve

    def snapshot(self, t):
        return rotate_snapshot(self, t)


def rotate_snapshot(ev, t):
    """Streamline ``R(omega t) @ base(s)`` at time ``t``."""
    base = ev.base
    if base.dim != 2:
        raise DimensionError(f"rotation snapshots need a planar curve, got dimension {base.dim}")
    return _rotated(base, _rotation(ev.omega * t))


@dataclass(frozen=True)
class LobeEvolution:
    """Pulsating lobe profile ``[r + sin(phase + omega t)] (cos(pi + s), sin(pi + s))``.

    The time dependence is radial rather than rigid, so ``snapshot`` rebuilds
    the profile; ``rotate_snapshot`` still applies to ``base`` (the ``t = 0``
    profile) when a rigid rotation is wanted on top.
    """

    r: float
    phase: float
    omega: float

    def __post_init__(self):
        if not self.r > 1.0:
            raise RegularityError(f"lobe radius offset must exceed 1 so the profile never collapses, got r = {self.r}")

    def radius(self, t):
        return self.r + math.sin(self.phase + self.omega * t)

    @property
    def base(self):
        return self.snapshot(0.0)

    def snapshot(self, t):
        rad = self.radius(t)

        def ev(s):
            s = np.asarray(s, dtype=float)
            return rad * _stack(np.cos(math.pi + s), np.sin(math.pi + s))

        def d1(s):
            s = np.asarray(s, dtype=float)
            return rad * _stack(-np.sin(math.pi + s), np.cos(math.pi + s))

        def d2(s):
            s = np.asarray(s, dtype=float)
            return -rad * _stack(np.cos(math.pi + s), np.sin(math.pi + s))

        return StreamlineCurve((0.0, 2.0 * math.pi), ev, d1, d2, kind="lobe")


def make_lobe(r, phase=0.0, omega=1.0):
    return LobeEvolution(float(r), float(phase), float(omega))


def check_tangent_alignment(curve, s, v):
    """Normalised misalignment between ``v`` and the curve tangent at ``s``.

    Returns ``sqrt(sum_{i<j} (v_i t_j - v_j t_i)^2) / (|v| |t|)``, i.e. the sine
    of the angle between the two vectors.
    """
    if not curve.contains(s):
        raise DomainError(f"s = {s} outside curve domain {curve.domain}")
    v = np.asarray(v, dtype=float)
    tan = np.asarray(curve.deriv(s), dtype=float)
    if v.shape != tan.shape:
        raise DimensionError(f"vector of dimension {v.shape} against tangent {tan.shape}")
    nv, nt = np.linalg.norm(v), np.linalg.norm(tan)
    if nv == 0.0:
        raise AlignmentError("alignment undefined for a zero velocity vector")
    if nt == 0.0:
        raise AlignmentError(f"alignment undefined: zero tangent at s = {s}")
    i, j = np.triu_indices(v.size, k=1)
    cross = v[i] * tan[j] - v[j] * tan[i]
    return float(np.sqrt(np.sum(cross * cross)) / (nv * nt))


def sample_curve(curve, n):
    """Uniform samples ``(s, points, tangents)`` over the curve domain."""
    if n < 2:
        raise DomainError("need at least two samples")
    s = curve.linspace(n)
    return s, np.asarray(curve.eval(s)), np.asarray(curve.deriv(s))
