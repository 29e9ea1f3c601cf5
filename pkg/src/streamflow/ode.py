"""Velocity along a streamline as a scalar second-order ODE.

Along a streamline ``phi(s)`` each velocity component ``u(s)`` satisfies

    a(s) u'' + b(s) u' + c(s) u u' + f(s) = 0

with ``a = mu |grad g|^2``, ``b = mu lap g``, ``c = -rho phi'_i`` and
``f = -q' dg/dx_i``, where ``g`` is the inverse of ``phi`` and ``q`` the
pressure along the curve.  The derivatives of ``g`` are expressed through
those of ``phi`` by one of two conventions (see :class:`InverseMapConvention`).

Integration is fixed-step: classical RK4, the second-order Adams-Moulton
(trapezoidal) rule and BDF2.  Implicit steps are solved by Newton iteration
seeded with an explicit Euler predictor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    MaxStepsError,
    OrderUndefinedError,
    SingularityError,
    SolverError,
    StepFailureError,
)
from .geometry import central_difference

METHODS = ("rk4", "adams_moulton_2", "bdf2")
CONVENTIONS = ("pseudoinverse", "componentwise")

DEFAULT_EPS = 1e-6
DEFAULT_PROBES = 65
GEAR_DOMAIN = (math.pi + math.atan(1.0), 1.5 * math.pi)


# -- physical inputs -------------------------------------------------------


def _as_fn(value):
    if callable(value):
        return value
    v = float(value)
    return lambda s: v


@dataclass(frozen=True)
class FluidProperties:
    """Density and dynamic viscosity, constants or functions of ``s``."""

    rho: float | Callable[[float], float]
    mu: float | Callable[[float], float]

    def __post_init__(self):
        if not callable(self.mu) and not float(self.mu) > 0:
            raise DomainError(f"viscosity must be positive, got {self.mu}")
        if not callable(self.rho) and not float(self.rho) >= 0:
            raise DomainError(f"density must be non-negative, got {self.rho}")

    @property
    def is_constant(self):
        return not (callable(self.rho) or callable(self.mu))

    def rho_at(self, s):
        return float(_as_fn(self.rho)(s))

    def mu_at(self, s):
        return float(_as_fn(self.mu)(s))

    def check_on(self, s_values):
        for s in s_values:
            if not self.mu_at(s) > 0:
                raise DomainError(f"viscosity not positive at s = {s:.17g}")
            if not self.rho_at(s) >= 0:
                raise DomainError(f"negative density at s = {s:.17g}")


@dataclass(frozen=True)
class PressureModel:
    """Pressure ``q(s)`` along the streamline with optional analytic ``q'(s)``.

    Without ``qdot`` the derivative is a central difference of ``q``.
    """

    q: Callable[[float], float]
    qdot: Callable[[float], float] | None = None
    fd_step: float = 1e-6

    @classmethod
    def constant(cls, value=0.0):
        value = float(value)
        return cls(lambda s: value, lambda s: 0.0)

    @classmethod
    def linear(cls, q0, slope):
        q0, slope = float(q0), float(slope)
        return cls(lambda s: q0 + slope * s, lambda s: slope)

    @classmethod
    def from_samples(cls, s, q):
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(np.asarray(s, dtype=float), np.asarray(q, dtype=float))
        return cls(lambda x: float(spline(x)))

    def q_at(self, s):
        return float(self.q(s))

    def qdot_at(self, s):
        if self.qdot is not None:
            return float(self.qdot(s))
        return float(central_difference(self.q, s, self.fd_step))


@dataclass(frozen=True)
class InverseMapConvention:
    """How the derivatives of the inverse map ``g`` follow from ``phi``.

    ``pseudoinverse``: ``grad g = phi' / |phi'|^2`` so that ``grad g . phi' = 1``
    with ``grad g`` parallel to the tangent; ``d/dx_j`` acts along the curve as
    ``(phi'_j / |phi'|^2) d/ds`` which gives ``lap g = -(phi' . phi'') / |phi'|^4``.

    ``componentwise``: ``dg/dx_j = 1 / phi'_j`` and
    ``lap g = sum_j -phi''_j / phi'_j^3``; only defined where no tangent
    component vanishes.
    """

    mode: str = "pseudoinverse"

    def __post_init__(self):
        if self.mode not in CONVENTIONS:
            raise DomainError(f"unknown inverse-map convention {self.mode!r}")

    def quantities(self, d1, d2):
        """``(grad g, |grad g|^2, lap g)`` from the first two curve derivatives."""
        d1 = np.asarray(d1, dtype=float)
        d2 = np.asarray(d2, dtype=float)
        if self.mode == "pseudoinverse":
            sq = np.float64(d1 @ d1)
            with np.errstate(divide="ignore", invalid="ignore"):
                grad = d1 / sq
                return grad, float(1.0 / sq), float(-(d1 @ d2) / (sq * sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            grad = 1.0 / d1
            return grad, float(np.sum(grad * grad)), float(np.sum(-d2 / d1**3))

    def bind(self, curve):
        """Functions ``s -> grad g``, ``s -> |grad g|^2``, ``s -> lap g`` on ``curve``."""

        def q(s):
            return self.quantities(curve.deriv(s), curve.deriv2(s))

        return (lambda s: q(s)[0]), (lambda s: q(s)[1]), (lambda s: q(s)[2])


def _convention(conv):
    return conv if isinstance(conv, InverseMapConvention) else InverseMapConvention(conv)


# -- ODE objects -----------------------------------------------------------


class _Frozen:
    """Coefficients of the linear-in-u'' equation at one value of ``s``."""

    __slots__ = ("a", "b", "c", "f")

    def __init__(self, a, b, c, f):
        self.a, self.b, self.c, self.f = a, b, c, f

    def accel(self, u, v):
        return -(self.b * v + self.c * u * v + self.f) / self.a

    def jac(self, u, v):
        return -self.c * v / self.a, -(self.b + self.c * u) / self.a


@dataclass(frozen=True)
class StreamlineODE:
    """``a(s) u'' + b(s) u' + c(s) u u' + f(s) = 0`` with a singularity guard.

    ``coefficients(s)`` returns ``(a, b, c, f)``.  The guard trips where any
    coefficient is non-finite, where ``|a(s)| < eps * scale`` (``scale`` being
    the largest ``|a|`` found on the construction interval), or
    where ``extra_guard(s)`` returns a reason string.
    """

    coefficients: Callable[[float], tuple] = field(repr=False)
    scale: float = 1.0
    eps: float = DEFAULT_EPS
    extra_guard: Callable[[float], str | None] | None = field(default=None, repr=False)
    label: str = "streamline"

    def coeff_a(self, s):
        return self.coefficients(s)[0]

    def coeff_b(self, s):
        return self.coefficients(s)[1]

    def coeff_c(self, s):
        return self.coefficients(s)[2]

    def forcing(self, s):
        return self.coefficients(s)[3]

    def _reason(self, s, coeffs):
        if not all(math.isfinite(x) for x in coeffs):
            return "non-finite coefficients"
        if abs(coeffs[0]) < self.eps * self.scale:
            return f"leading coefficient {coeffs[0]:.3e} below guard {self.eps * self.scale:.3e}"
        if self.extra_guard is not None:
            return self.extra_guard(s)
        return None

    def guard(self, s):
        """Reason string if ``s`` is inside the singular band, else ``None``."""
        return self._reason(s, self.coefficients(s))

    def at(self, s):
        coeffs = tuple(float(x) for x in self.coefficients(s))
        reason = self._reason(s, coeffs)
        if reason is not None:
            raise SingularityError(f"{self.label} ODE singular at s = {s:.17g}: {reason}", s=s)
        return _Frozen(*coeffs)

    def rhs(self, s, u, udot):
        return self.at(s).accel(u, udot)

    def residual(self, s, u, udot, uddot):
        a, b, c, f = self.coefficients(s)
        return a * uddot + b * udot + c * u * udot + f


class _FrozenFn:
    __slots__ = ("s", "fn", "jfn")

    def __init__(self, s, fn, jfn):
        self.s, self.fn, self.jfn = s, fn, jfn

    def accel(self, u, v):
        return self.fn(self.s, u, v)

    def jac(self, u, v):
        if self.jfn is not None:
            return self.jfn(self.s, u, v)
        hu = 1e-7 * (1.0 + abs(u))
        hv = 1e-7 * (1.0 + abs(v))
        fu = (self.fn(self.s, u + hu, v) - self.fn(self.s, u - hu, v)) / (2 * hu)
        fv = (self.fn(self.s, u, v + hv) - self.fn(self.s, u, v - hv)) / (2 * hv)
        return fu, fv


@dataclass(frozen=True)
class FunctionODE:
    """Generic ``u'' = F(s, u, u')``, used for verification problems."""

    fn: Callable[[float, float, float], float] = field(repr=False)
    jac: Callable[[float, float, float], tuple] | None = field(default=None, repr=False)
    label: str = "function"

    def at(self, s):
        return _FrozenFn(s, self.fn, self.jac)

    def rhs(self, s, u, udot):
        return self.fn(s, u, udot)


def harmonic_ode(omega=1.0):
    """``u'' = -omega^2 u``."""
    w2 = float(omega) ** 2
    return FunctionODE(lambda s, u, v: -w2 * u, lambda s, u, v: (-w2, 0.0), label="harmonic")


def _coefficient_scale(coefficients, lo, hi, probes):
    # magnitude of the leading coefficient; the others carry different units
    best = 0.0
    for s in np.linspace(lo, hi, probes):
        x = abs(float(coefficients(float(s))[0]))
        if math.isfinite(x):
            best = max(best, x)
    return best if best > 0 else 1.0


def build_ode(curve, fluid, pressure, conv="pseudoinverse", component=0, eps=DEFAULT_EPS, probes=DEFAULT_PROBES):
    """Reduced equation for velocity component ``component`` along ``curve``.

    The curve domain is probed at ``probes`` points; a guard trip there raises
    :class:`SingularityError` carrying the offending ``s``.
    """
    conv = _convention(conv)
    if not 0 <= component < curve.dim:
        raise DimensionError(f"component {component} invalid for a {curve.dim}-D curve")
    i = int(component)

    def coefficients(s):
        d1 = np.asarray(curve.deriv(s), dtype=float)
        d2 = np.asarray(curve.deriv2(s), dtype=float)
        grad, grad_sq, lap = conv.quantities(d1, d2)
        mu = fluid.mu_at(s)
        return (
            mu * grad_sq,
            mu * lap,
            -fluid.rho_at(s) * float(d1[i]),
            -pressure.qdot_at(s) * float(grad[i]),
        )

    lo, hi = curve.domain
    grid = np.linspace(lo, hi, probes)
    fluid.check_on(grid)
    ode = StreamlineODE(
        coefficients,
        scale=_coefficient_scale(coefficients, lo, hi, probes),
        eps=eps,
        label=f"{curve.kind}[{conv.mode}, u{i}]",
    )
    for s in grid:
        reason = ode.guard(float(s))
        if reason is not None:
            raise SingularityError(f"{ode.label} ODE singular at s = {s:.17g}: {reason}", s=float(s))
    return ode


def gear_pump_ode(fluid, domain=GEAR_DOMAIN, eps=DEFAULT_EPS, cos_margin=1e-3):
    """Constant-pressure tooth-flank equation

        rho u u' = mu cos(s) [ (1 + s^2)/s u'' + (s^2 - 1)/s^2 u' ].

    The leading coefficient vanishes at ``s = 3 pi / 2``; evaluation raises
    :class:`SingularityError` once ``|cos s| < cos_margin`` (or when the
    relative coefficient guard trips first) and for ``|s| < eps``.
    """
    if not fluid.is_constant:
        raise DomainError("the gear-pump equation needs constant density and viscosity")
    rho = fluid.rho_at(0.0)
    mu = fluid.mu_at(0.0)

    def coefficients(s):
        c = math.cos(s)
        s2 = s * s
        return (mu * c * (1.0 + s2) / s, mu * c * (s2 - 1.0) / s2, -rho, 0.0)

    def extra(s):
        if abs(s) < eps:
            return "s at the origin"
        if abs(math.cos(s)) < cos_margin:
            return f"|cos s| = {abs(math.cos(s)):.3e} near the flank end 3*pi/2"
        return None

    lo, hi = domain
    return StreamlineODE(
        coefficients,
        scale=_coefficient_scale(coefficients, lo, hi, DEFAULT_PROBES),
        eps=eps,
        extra_guard=extra,
        label="gear-pump",
    )


# -- integration -----------------------------------------------------------


@dataclass(frozen=True)
class InitialConditions:
    s_start: float
    u0: float
    udot0: float


@dataclass(frozen=True)
class SolverConfig:
    method: str = "bdf2"
    step: float = 1e-3
    newton_tol: float = 1e-10
    newton_max_iter: int = 25
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.step > 0:
            raise DomainError(f"step must be positive, got {self.step}")
        if not self.newton_tol > 0:
            raise DomainError(f"newton_tol must be positive, got {self.newton_tol}")
        if int(self.newton_max_iter) < 1 or int(self.max_steps) < 1:
            raise DomainError("newton_max_iter and max_steps must be positive integers")


@dataclass
class Diagnostics:
    steps: int = 0
    newton_iterations: int = 0
    rejected_steps: int = 0
    guard_activations: int = 0
    max_newton_residual: float = 0.0

    def merge(self, other):
        return Diagnostics(
            self.steps + other.steps,
            self.newton_iterations + other.newton_iterations,
            self.rejected_steps + other.rejected_steps,
            self.guard_activations + other.guard_activations,
            max(self.max_newton_residual, other.max_newton_residual),
        )


@dataclass(frozen=True)
class ODESolution:
    s: np.ndarray
    u: np.ndarray
    udot: np.ndarray
    segment: np.ndarray
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def __len__(self):
        return len(self.s)

    @property
    def end(self):
        return float(self.s[-1]), float(self.u[-1]), float(self.udot[-1])

    def with_segment(self, m):
        return ODESolution(self.s, self.u, self.udot, np.full(len(self.s), m, dtype=int), self.diagnostics)

    @staticmethod
    def concatenate(pieces):
        """Join consecutive pieces, dropping each junction's repeated start sample."""
        pieces = [p for p in pieces if p is not None and len(p)]
        if not pieces:
            return None
        cut = [pieces[0]] + [
            ODESolution(p.s[1:], p.u[1:], p.udot[1:], p.segment[1:], p.diagnostics) for p in pieces[1:]
        ]
        diag = Diagnostics()
        for p in pieces:
            diag = diag.merge(p.diagnostics)
        return ODESolution(
            np.concatenate([p.s for p in cut]),
            np.concatenate([p.u for p in cut]),
            np.concatenate([p.udot for p in cut]),
            np.concatenate([p.segment for p in cut]),
            diag,
        )


def _newton(loc, beta_h, cu, cv, u, v, tol, max_iter, s1):
    """Solve ``y - c - beta_h f(s1, y) = 0`` for ``y = (u, v)``."""
    its = 0
    while True:
        acc = loc.accel(u, v)
        gu = u - cu - beta_h * v
        gv = v - cv - beta_h * acc
        res = max(abs(gu), abs(gv))
        if res <= tol * (1.0 + max(abs(u), abs(v))):
            return u, v, its, res
        if its >= max_iter or not math.isfinite(res):
            raise StepFailureError(
                f"Newton did not converge at s = {s1:.17g} after {its} iterations (residual {res:.3e})", s=s1
            )
        fu, fv = loc.jac(u, v)
        diag = 1.0 - beta_h * fv
        det = diag - beta_h * beta_h * fu
        if det == 0.0 or not math.isfinite(det):
            raise StepFailureError(f"singular Newton matrix at s = {s1:.17g}", s=s1)
        ru, rv = -gu, -gv
        u += (diag * ru + beta_h * rv) / det
        v += (beta_h * fu * ru + rv) / det
        its += 1


def integrate(ode, init, s_end, cfg=None):
    """Fixed-step solution of ``u'' = F(s, u, u')`` from ``init`` to ``s_end``.

    The step is shrunk to ``(s_end - s_start) / n`` so the grid ends exactly at
    ``s_end``.  A guard trip raises :class:`SingularityError` whose ``partial``
    holds every accepted sample.
    """
    cfg = cfg or SolverConfig()
    s0 = float(init.s_start)
    span = float(s_end) - s0
    if not span > 0:
        raise DomainError(f"s_end = {s_end} must exceed s_start = {s0}")
    n = max(1, math.ceil(span / cfg.step - 1e-9))
    if n > cfg.max_steps:
        raise MaxStepsError(f"{n} steps needed on [{s0}, {s_end}] but max_steps = {cfg.max_steps}", s=s0)
    h = span / n
    grid = s0 + h * np.arange(n + 1)
    grid[-1] = float(s_end)
    us = np.empty(n + 1)
    vs = np.empty(n + 1)
    us[0], vs[0] = float(init.u0), float(init.udot0)
    diag = Diagnostics()

    def partial(k):
        return ODESolution(grid[: k + 1].copy(), us[: k + 1].copy(), vs[: k + 1].copy(), np.zeros(k + 1, dtype=int), diag)

    step = _STEPPERS[cfg.method]
    k = 0
    try:
        loc = ode.at(s0)
    except SingularityError as exc:
        diag.guard_activations += 1
        raise SingularityError(str(exc), s=exc.s, partial=None) from None
    try:
        state = None
        for k in range(n):
            s, s1 = float(grid[k]), float(grid[k + 1])
            hk = s1 - s
            try:
                u1, v1, loc, state = step(ode, loc, s, hk, float(us[k]), float(vs[k]), state, cfg, diag)
            except (OverflowError, ZeroDivisionError):
                u1 = v1 = math.nan
            if not (math.isfinite(u1) and math.isfinite(v1)):
                raise StepFailureError(f"solution left the finite range at s = {s1:.17g}", s=s1)
            us[k + 1], vs[k + 1] = u1, v1
            diag.steps += 1
    except SingularityError as exc:
        diag.guard_activations += 1
        raise SingularityError(str(exc), s=exc.s, partial=partial(k)) from None
    except StepFailureError as exc:
        raise StepFailureError(str(exc), s=exc.s, partial=partial(k)) from None
    return ODESolution(grid, us, vs, np.zeros(n + 1, dtype=int), diag)


def _rk4(ode, loc, s, h, u, v, state, cfg, diag):
    k1u, k1v = v, loc.accel(u, v)
    mid = ode.at(s + 0.5 * h)
    k2u = v + 0.5 * h * k1v
    k2v = mid.accel(u + 0.5 * h * k1u, v + 0.5 * h * k1v)
    k3u = v + 0.5 * h * k2v
    k3v = mid.accel(u + 0.5 * h * k2u, v + 0.5 * h * k2v)
    end = ode.at(s + h)
    k4u = v + h * k3v
    k4v = end.accel(u + h * k3u, v + h * k3v)
    u1 = u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    v1 = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return u1, v1, end, None


def _implicit(ode, loc, s, h, u, v, state, cfg, diag, bdf):
    acc = loc.accel(u, v)
    end = ode.at(s + h)
    if bdf and state is not None:
        up, vp = state
        cu = 4.0 / 3.0 * u - 1.0 / 3.0 * up
        cv = 4.0 / 3.0 * v - 1.0 / 3.0 * vp
        beta_h = 2.0 / 3.0 * h
    else:
        # trapezoidal rule; also the BDF2 starting step
        cu = u + 0.5 * h * v
        cv = v + 0.5 * h * acc
        beta_h = 0.5 * h
    u1, v1, its, res = _newton(end, beta_h, cu, cv, u + h * v, v + h * acc, cfg.newton_tol, cfg.newton_max_iter, s + h)
    diag.newton_iterations += its
    diag.max_newton_residual = max(diag.max_newton_residual, res)
    return u1, v1, end, (u, v)


_STEPPERS = {
    "rk4": _rk4,
    "adams_moulton_2": lambda *a: _implicit(*a, bdf=False),
    "bdf2": lambda *a: _implicit(*a, bdf=True),
}


def _end_values(sol):
    return float(sol.u[-1]), float(sol.udot[-1])


def halve_step_order_check(ode, init, s_end, method, step=None, reference=None, refine=64):
    """Observed order ``log2(err_h / err_{h/2})`` at ``s_end``.

    ``reference`` is ``(u, u')`` at ``s_end`` or a callable returning it; by
    default an RK4 run with step ``h / refine`` is used.  The error is the
    larger of the ``u`` and ``u'`` deviations.
    """
    h = step if step is not None else (s_end - init.s_start) / 20.0
    if reference is None:
        ref = _end_values(integrate(ode, init, s_end, SolverConfig("rk4", h / refine)))
    elif callable(reference):
        ref = tuple(reference(s_end))
    else:
        ref = tuple(reference)

    def err(hh):
        u, v = _end_values(integrate(ode, init, s_end, SolverConfig(method, hh)))
        return max(abs(u - ref[0]), abs(v - ref[1]))

    e1, e2 = err(h), err(h / 2.0)
    if e1 == 0.0 or e2 == 0.0:
        raise OrderUndefinedError(f"zero error (h: {e1}, h/2: {e2}); order undefined", s=s_end)
    return math.log2(e1 / e2)


def chain_solve(spline, fluid, pressure, conv, init, cfg=None, component=0, s_end=1.0, eps=DEFAULT_EPS, probes=9):
    """Solve segment by segment along a Hermite spline.

    Each cubic gets its own reduced ODE; the end values of segment ``m`` are the
    initial values of segment ``m + 1``.  Errors carry the failing segment index.
    """
    cfg = cfg or SolverConfig()
    k_seg = spline.n_segments
    s, u, v = float(init.s_start), float(init.u0), float(init.udot0)
    if not (0.0 <= s < s_end <= 1.0):
        raise DomainError(f"need 0 <= s_start < s_end <= 1, got {s}, {s_end}")
    m0 = min(int(math.floor(s * k_seg)), k_seg - 1)
    if m0 < k_seg - 1 and s >= (m0 + 1) / k_seg:
        m0 += 1
    pieces = []
    for m in range(m0, k_seg):
        hi = 1.0 if m == k_seg - 1 else (m + 1) / k_seg
        seg_end = min(hi, s_end)
        try:
            ode = build_ode(spline.segment_curve(m), fluid, pressure, conv, component, eps=eps, probes=probes)
            sol = integrate(ode, InitialConditions(s, u, v), seg_end, cfg)
        except SolverError as exc:
            part = exc.partial.with_segment(m) if exc.partial is not None else None
            exc.partial = ODESolution.concatenate(pieces + [part])
            exc.segment = m
            raise
        pieces.append(sol.with_segment(m))
        s, u, v = sol.end
        if seg_end >= s_end:
            break
    return ODESolution.concatenate(pieces)
