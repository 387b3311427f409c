"""
Off-grid evaluation of velocity, vorticity and pressure.

Every integral in the toolkit is taken over horizontal discs, circles, or
stacks of them, so evaluation is organised by plane: a :class:`Frame` (one
time level) hands out :class:`PlaneSample` objects for a height ``z`` and a
set of horizontal points, and these return any mixed partial derivative of
any component on demand.

Sampled snapshots are evaluated by trigonometric interpolation, which is exact
for band-limited data.  A quintic-spline fallback (``interp="spline"``) trades
that exactness for speed on large point sets.
"""
from __future__ import annotations

from bisect import bisect_left
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from . import fields as F
from .analytic import AnalyticField, ModeSum
from .errors import CoverageError, FieldError

KINDS = ("v", "omega", "p")
_E = np.eye(3, dtype=int)


def unit(j):
    return tuple(_E[j])


class PlaneSample:
    """Derivatives of one field on the points ``(x1, x2, z)``."""

    def __init__(self, fn: Callable, npoints: int):
        self._fn = fn
        self._cache = {}
        self.npoints = npoints

    def d(self, comp=0, alpha=(0, 0, 0)):
        key = (comp, tuple(alpha))
        if key not in self._cache:
            self._cache[key] = self._fn(comp, tuple(alpha))
        return self._cache[key]

    def value(self, comp=0):
        return self.d(comp, (0, 0, 0))

    def vector(self):
        return np.stack([self.d(i) for i in range(3)])

    def grad(self, comp):
        return np.stack([self.d(comp, unit(j)) for j in range(3)])

    def gradient_tensor(self):
        return np.stack([self.grad(i) for i in range(3)])


class Frame:
    """One time level of a flow; subclasses implement :meth:`_plane_fn`."""

    time: float = 0.0
    grid = None

    def sample(self, kind, z, x1, x2) -> PlaneSample:
        if kind not in KINDS:
            raise ValueError(f"unknown field kind {kind!r}")
        x1 = np.asarray(x1, dtype=float).ravel()
        x2 = np.asarray(x2, dtype=float).ravel()
        return PlaneSample(self._plane_fn(kind, float(z), x1, x2), x1.size)

    def _plane_fn(self, kind, z, x1, x2):
        raise NotImplementedError

    def evaluate(self, kind, comp, alpha, points):
        """Evaluate at arbitrary 3D points, grouped into planes of equal height."""
        pts = np.asarray(points, dtype=float).reshape(3, -1)
        out = np.empty(pts.shape[1])
        zs, inverse = np.unique(pts[2], return_inverse=True)
        for iz, z in enumerate(zs):
            sel = inverse == iz
            out[sel] = self.sample(kind, z, pts[0, sel], pts[1, sel]).d(comp, alpha)
        return out


class AnalyticFrame(Frame):
    def __init__(self, field: AnalyticField, t: float):
        self.field = field
        self.time = float(t)

    def _modes(self, kind) -> ModeSum:
        if kind == "v":
            return self.field.modes
        if kind == "omega":
            return self.field.vorticity_field.modes
        return self.field.pressure_field

    def _plane_fn(self, kind, z, x1, x2):
        modes = self._modes(kind)
        t = self.time
        if modes.n_modes == 0:
            return lambda comp, alpha: np.zeros(x1.size)
        k = modes.wavevectors
        phase = np.exp(1j * (np.outer(x1, k[:, 0]) + np.outer(x2, k[:, 1]) + z * k[:, 2]))

        def fn(comp, alpha):
            return np.real(phase @ modes.amplitudes(comp, alpha, t))
        return fn


class SpectralFrame(Frame):
    """Trigonometric interpolation of a sampled snapshot (Nyquist modes dropped).

    ``velocity`` is required; vorticity is derived spectrally and pressure is
    recomputed from the velocity unless ``pressure`` is supplied.
    """

    def __init__(self, velocity: F.VectorField, pressure: F.ScalarField | None = None,
                 interp="spectral", dealias=None):
        self.velocity = velocity
        self.grid = velocity.grid
        self.time = velocity.time
        self.interp = interp
        self._pressure = pressure
        self._dealias = dealias
        self._coef = {}
        self._spline = {}

    # spectral coefficients normalised so that value = Re sum c exp(i k.x)
    def coefficients(self, kind):
        if kind not in self._coef:
            g = self.grid
            if kind == "v":
                c = F.fftn(self.velocity.components)
            elif kind == "omega":
                c = F.curl_hat(F.fftn(self.velocity.components), g)
            else:
                p = self.pressure_field()
                c = F.fftn(p.values)[None]
            c = c / g.size
            c[:, g.nyquist_mask()] = 0.0
            self._coef[kind] = c
        return self._coef[kind]

    def pressure_field(self):
        if self._pressure is None:
            self._pressure = F.pressure_from_velocity(self.velocity, self._dealias)
        return self._pressure

    def vorticity_field(self):
        return F.curl(self.velocity)

    def _plane_fn(self, kind, z, x1, x2):
        if self.interp == "spline":
            return self._spline_plane_fn(kind, z, x1, x2)
        g = self.grid
        k1, k2, k3 = (k.ravel() for k in g.wavenumbers())
        c = self.coefficients(kind)
        e3 = np.exp(1j * k3 * z)
        contracted = {}

        def plane(a3):
            if a3 not in contracted:
                contracted[a3] = np.tensordot(c, e3 * (1j * k3) ** a3, axes=([3], [0]))
            return contracted[a3]

        E1 = np.exp(1j * np.outer(x1, k1))
        E2 = np.exp(1j * np.outer(x2, k2))

        def fn(comp, alpha):
            a1, a2, a3 = alpha
            M = plane(a3)[comp]
            if a1:
                M = M * ((1j * k1) ** a1)[:, None]
            if a2:
                M = M * ((1j * k2) ** a2)[None, :]
            return np.real(np.sum((E1 @ M) * E2, axis=1))
        return fn

    def _spline_field(self, kind, comp, alpha):
        key = (kind, comp, alpha)
        if key not in self._spline:
            g = self.grid
            c = self.coefficients(kind)[comp] * g.size
            ks = g.wavenumbers()
            for axis, a in enumerate(alpha):
                if a:
                    c = c * (1j * ks[axis]) ** a
            vals = F.ifftn(c).real
            self._spline[key] = ndimage.spline_filter(vals, order=5, mode="grid-wrap")
        return self._spline[key]

    def _spline_plane_fn(self, kind, z, x1, x2):
        h = self.grid.spacing
        coords = np.stack([x1 / h[0], x2 / h[1], np.full(x1.size, z / h[2])])

        def fn(comp, alpha):
            coeffs = self._spline_field(kind, comp, alpha)
            return ndimage.map_coordinates(coeffs, coords, order=5, mode="grid-wrap",
                                           prefilter=False)
        return fn


class RescaledFrame(Frame):
    """Frame of ``lam * v(x0 + lam x, .)`` built on top of another frame."""

    _power = {"v": 1, "omega": 2, "p": 2}

    def __init__(self, base: Frame, lam, x0, time):
        self.base = base
        self.lam = float(lam)
        self.x0 = np.asarray(x0, dtype=float)
        self.time = float(time)
        self.grid = None

    def _plane_fn(self, kind, z, x1, x2):
        lam, x0 = self.lam, self.x0
        inner = self.base.sample(kind, x0[2] + lam * z, x0[0] + lam * x1, x0[1] + lam * x2)

        def fn(comp, alpha):
            order = sum(alpha[:3])
            return lam ** (self._power[kind] + order) * inner.d(comp, alpha)
        return fn


class Flow:
    """A velocity field in space-time.

    ``frame_at(t)`` returns a :class:`Frame`; ``times`` is ``None`` for flows that
    can be evaluated at any time (analytic fields) and the sorted snapshot
    times otherwise.
    """

    def __init__(self, frame_at: Callable[[float], Frame], times: Sequence[float] | None = None,
                 grid=None, label="flow"):
        self._frame_at = frame_at
        self.times = None if times is None else np.asarray(times, dtype=float)
        self.grid = grid
        self.label = label
        self._frames = {}

    @property
    def continuous(self):
        return self.times is None

    @classmethod
    def from_analytic(cls, field: AnalyticField):
        return cls(lambda t: AnalyticFrame(field, t), None, None, label=field.kind)

    @classmethod
    def from_snapshots(cls, snapshots: Sequence[F.VectorField], interp="spectral",
                       pressures: Sequence[F.ScalarField] | None = None):
        snaps = sorted(snapshots, key=lambda s: s.time)
        if not snaps:
            raise FieldError("empty snapshot series")
        grid = snaps[0].grid
        for s in snaps:
            if s.grid != grid:
                raise FieldError("snapshots live on inconsistent grids")
        times = [s.time for s in snaps]
        if np.any(np.diff(times) <= 0):
            raise FieldError("snapshot times must be strictly increasing")
        press = {}
        if pressures is not None:
            press = {p.time: p for p in pressures}
        frames = [SpectralFrame(s, press.get(s.time), interp=interp) for s in snaps]
        flow = cls(None, times, grid, label="snapshots")

        def frame_at(t):
            return frames[flow.index_of(t)]
        flow._frame_at = frame_at
        flow.snapshots = snaps
        return flow

    def index_of(self, t, tol=1e-9):
        i = bisect_left(list(self.times), t - tol)
        if i < len(self.times) and abs(self.times[i] - t) <= tol * max(1.0, abs(t)):
            return i
        raise CoverageError(f"no snapshot at time {t}")

    def frame(self, t) -> Frame:
        return self._frame_at(float(t))

    def rescale(self, lam, x0=(0.0, 0.0, 0.0), t0=0.0) -> "Flow":
        if not lam > 0:
            raise ValueError(f"rescaling factor must be positive, got {lam}")
        lam = float(lam)
        base = self
        times = None
        if self.times is not None:
            times = (self.times - t0) / lam**2

        def frame_at(t):
            try:
                inner = base.frame(t0 + lam * lam * t)
            except CoverageError as exc:
                raise CoverageError(f"rescaled time {t} maps outside the data: {exc}") from None
            return RescaledFrame(inner, lam, x0, t)
        return Flow(frame_at, times, None, label=f"{self.label}@{lam:g}")

    # -- time handling ---------------------------------------------------
    def time_quadrature(self, t_lo, t_hi, n=8):
        """Nodes and weights for integrating over ``[t_lo, t_hi]``.

        Continuous flows use Gauss-Legendre; snapshot flows use the trapezoid
        rule on the snapshots inside the window, with linear interpolation to
        the end points (returned as pairs of neighbouring snapshots).
        Returns a list of ``(t, weight)``.
        """
        if t_hi < t_lo:
            raise ValueError("time window reversed")
        if t_hi == t_lo:
            return []
        if self.continuous:
            x, w = np.polynomial.legendre.leggauss(n)
            half = 0.5 * (t_hi - t_lo)
            return [(t_lo + half * (xi + 1), half * wi) for xi, wi in zip(x, w)]
        ts = self.times
        tol = 1e-9 * max(1.0, abs(t_hi))
        if t_lo < ts[0] - tol or t_hi > ts[-1] + tol:
            raise CoverageError(
                f"time window [{t_lo}, {t_hi}] not covered by snapshots [{ts[0]}, {ts[-1]}]")
        # window ends within rounding of a snapshot sit on it, so neighbours
        # outside the window do not pick up ~1e-17 weights
        near = np.abs(ts - t_lo) <= tol
        if near.any():
            t_lo = float(ts[near][0])
        near = np.abs(ts - t_hi) <= tol
        if near.any():
            t_hi = float(ts[near][-1])
        # piecewise-linear interpolant of the integrand on the snapshot times,
        # integrated exactly over the window
        weights = np.zeros(ts.size)
        for i in range(ts.size - 1):
            a, b = max(ts[i], t_lo), min(ts[i + 1], t_hi)
            if b <= a:
                continue
            dt = ts[i + 1] - ts[i]
            # integral of the hat functions of nodes i and i+1 over [a, b]
            wa = ((ts[i + 1] - a) ** 2 - (ts[i + 1] - b) ** 2) / (2 * dt)
            wb = ((b - ts[i]) ** 2 - (a - ts[i]) ** 2) / (2 * dt)
            weights[i] += wa
            weights[i + 1] += wb
        return [(float(t), float(w)) for t, w in zip(ts, weights) if w != 0.0]

    def time_samples(self, t_lo, t_hi, n=9):
        """Times at which to take a supremum over ``[t_lo, t_hi]``."""
        if self.continuous:
            if t_hi == t_lo:
                return [t_lo]
            return list(np.linspace(t_lo, t_hi, n))
        tol = 1e-9 * max(1.0, abs(t_hi))
        sel = [float(t) for t in self.times if t_lo - tol <= t <= t_hi + tol]
        if not sel:
            raise CoverageError(f"no snapshot inside [{t_lo}, {t_hi}]")
        return sel


def as_flow(source, interp="spectral") -> Flow:
    """Coerce an analytic field, a snapshot, a snapshot list or a flow into a :class:`Flow`."""
    if isinstance(source, Flow):
        return source
    if isinstance(source, AnalyticField):
        return Flow.from_analytic(source)
    if isinstance(source, F.VectorField):
        return Flow.from_snapshots([source], interp=interp)
    if isinstance(source, Frame):
        return Flow(lambda t, fr=source: fr, [source.time], getattr(source, "grid", None))
    return Flow.from_snapshots(list(source), interp=interp)


def as_frame(source, t=None) -> Frame:
    """Single time level of a field-like object.

    A :class:`VectorField` passed here is treated as *the* field to evaluate
    (kind ``"v"``), which lets disc integrals run on vorticity snapshots.
    """
    if isinstance(source, Frame):
        return source
    if isinstance(source, AnalyticField):
        return AnalyticFrame(source, 0.0 if t is None else t)
    if isinstance(source, F.VectorField):
        return SpectralFrame(source)
    if isinstance(source, Flow):
        if t is None:
            if source.continuous:
                t = 0.0
            else:
                t = source.times[-1]
        return source.frame(t)
    raise TypeError(f"cannot evaluate {type(source).__name__}")


def grid_of(source):
    if isinstance(source, (F.VectorField, F.ScalarField)):
        return source.grid
    return getattr(source, "grid", None)


# ---------------------------------------------------------------------------
# quadrature rules
# ---------------------------------------------------------------------------

def disc_rule(radius, n_r=64, n_theta=128, center=(0.0, 0.0)):
    """Polar rule on a disc: Gauss-Legendre in radius, trapezoid in angle.

    Returns flattened ``x1, x2, w``; exact for polynomials of degree up to
    ``2 n_r - 1`` in the radius and trigonometric degree ``n_theta - 1``.
    """
    if radius == 0:
        return np.zeros(0), np.zeros(0), np.zeros(0)
    xg, wg = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * radius * (xg + 1.0)
    wr = 0.5 * radius * wg * rho
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    wt = 2 * np.pi / n_theta
    R, T = np.meshgrid(rho, theta, indexing="ij")
    W = np.outer(wr, np.full(n_theta, wt))
    return (center[0] + (R * np.cos(T)).ravel(), center[1] + (R * np.sin(T)).ravel(), W.ravel())


def circle_rule(radius, n_theta=128, center=(0.0, 0.0)):
    """Trapezoid rule for ``ds`` on a circle; also returns the outward normals."""
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    c, s = np.cos(theta), np.sin(theta)
    w = np.full(n_theta, 2 * np.pi * radius / n_theta)
    return center[0] + radius * c, center[1] + radius * s, w, c, s


def layer_rule(region_shape, radius, n_z=24, zc=0.0):
    """Heights, layer weights and layer radii stacking a ball or cylinder into discs."""
    xg, wg = np.polynomial.legendre.leggauss(n_z)
    z = zc + radius * xg
    w = radius * wg
    if region_shape == "ball":
        rad = radius * np.sqrt(np.clip(1.0 - xg**2, 0.0, None))
    else:
        rad = np.full(n_z, float(radius))
    return z, w, rad


def integrate_region(frame: Frame, region_shape, radius, center, integrand, kinds=("v",),
                     n_z=24, n_r=24, n_theta=48):
    """Integrate ``integrand(samples, x1, x2, z)`` over a ball or cylinder.

    ``samples`` maps each requested kind to its :class:`PlaneSample`.
    """
    total = 0.0
    zs, wz, rads = layer_rule(region_shape, radius, n_z, center[2])
    for z, wzi, rad in zip(zs, wz, rads):
        x1, x2, w = disc_rule(rad, n_r, n_theta, center[:2])
        samples = {k: frame.sample(k, z, x1, x2) for k in kinds}
        total += wzi * float(np.dot(w, integrand(samples, x1, x2, z)))
    return total
