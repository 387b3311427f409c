"""
Absolute vorticity flux through horizontal discs and the identities built on it.

Conventions: discs ``D(r, z, t) = {|x_h - c| < r, x_3 = z}`` and their boundary
circles ``S(r, z, t)`` are centred at a horizontal point ``c`` (default the
origin), ``e_r`` is the outward radial unit vector, and

    Gamma(r, z, t) = int_D |omega_3| dx_1 dx_2,
    W(z, t)        = int_D f(omega_3) dx_1 dx_2,   f(s) = sqrt(s^2 + 1).

Functions whose name mentions a series take *velocity* data (an analytic
field, a snapshot list or a :class:`~nsgeom.evaluate.Flow`) and derive the
vorticity themselves; ``disc_flux``, ``flux_balance`` and ``divfree_defect``
take the vector field to be integrated directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import fields as F
from .analytic import AnalyticField
from .errors import CoverageError, FieldError
from .evaluate import (AnalyticFrame, Flow, Frame, SpectralFrame, as_flow, circle_rule,
                       disc_rule)

ZERO_REL = 1e-12
INTEGRANDS = ("abs-omega3", "omega3-tilde", "f-omega3")
# 4th-order central differences on a 5-point stencil
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def f_of(s):
    return np.sqrt(s * s + 1.0)


def zero_threshold(omega3_max):
    return ZERO_REL * omega3_max


def _sign(w3, eta_zero):
    s = np.sign(w3)
    s[np.abs(w3) < eta_zero] = 0.0
    return s


# ---------------------------------------------------------------------------
# pointwise fields
# ---------------------------------------------------------------------------

def flipped_vorticity(w: F.VectorField, eta: float = 0.0) -> F.VectorField:
    """``omega sgn(omega_3)``; for ``eta > 0`` the smooth surrogate
    ``omega * omega_3 / sqrt(omega_3^2 + eta^2)``."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    w3 = w.components[2]
    if eta == 0:
        factor = _sign(w3, zero_threshold(np.max(np.abs(w3))))
    else:
        factor = w3 / np.sqrt(w3 * w3 + eta * eta)
    return F.VectorField(w.grid, w.components * factor, w.time)


def modified_vorticity(w: F.VectorField) -> F.VectorField:
    """``omega * omega_3 / sqrt(omega_3^2 + 1)``."""
    w3 = w.components[2]
    return F.VectorField(w.grid, w.components * (w3 / f_of(w3)), w.time)


# 8th-order central first-derivative weights for offsets 1..4
_FD8 = np.array([4 / 5, -1 / 5, 4 / 105, -1 / 280])


def fd_divergence(w: F.VectorField):
    """Local 8th-order central-difference divergence (periodic)."""
    h = w.grid.spacing
    out = np.zeros(w.grid.shape)
    for axis in range(3):
        c = w.components[axis]
        for m, a in enumerate(_FD8, start=1):
            out += a * (np.roll(c, -m, axis=axis) - np.roll(c, m, axis=axis)) / h[axis]
    return out


FD_HALF_WIDTH = 4


def _ball_footprint(grid, radius):
    h = np.asarray(grid.spacing)
    half = [int(math.ceil(radius / hh)) for hh in h]
    axes = [np.arange(-m, m + 1) * hh for m, hh in zip(half, h)]
    X = np.meshgrid(*axes, indexing="ij")
    return (X[0] ** 2 + X[1] ** 2 + X[2] ** 2) <= radius**2 * (1 + 1e-12)


@dataclass(frozen=True)
class DefectResult:
    defect: float
    relative: float
    n_used: int
    method: str


def divfree_defect(w: F.VectorField, exclusion=None, margin=None) -> DefectResult:
    """Largest ``|div w|`` away from an excluded node set.

    ``exclusion`` is ``None`` (use every node, spectral divergence), a boolean
    mask over the grid, or a callable ``grid -> mask``.  With an exclusion the
    divergence is the local 8th-order difference and nodes within ``margin``
    (default: the stencil half-width, ``4 h``) of an excluded node are
    skipped, so no stencil reads across the excluded set.  ``relative`` divides
    by the largest first derivative of ``w``.
    """
    grid = w.grid
    scale = float(np.max(np.abs(F.gradient_tensor(w))))
    if exclusion is None:
        div = F.divergence(w).values
        used = np.ones(grid.shape, dtype=bool)
        method = "spectral"
    else:
        mask = exclusion(grid) if callable(exclusion) else np.asarray(exclusion, dtype=bool)
        if mask.shape != grid.shape:
            raise FieldError("exclusion mask does not match the grid")
        if margin is None:
            margin = FD_HALF_WIDTH * max(grid.spacing)
        grown = ndimage.maximum_filter(mask, footprint=_ball_footprint(grid, margin), mode="wrap")
        used = ~grown
        div = fd_divergence(w)
        method = "fd8"
    if not used.any():
        raise FieldError("every node is excluded; no data for the divergence defect")
    d = float(np.max(np.abs(div[used])))
    return DefectResult(d, d / scale if scale > 0 else 0.0, int(used.sum()), method)


def zero_set_mask(w: F.VectorField):
    """Nodes next to ``{omega_3 = 0}``: ``|omega_3|`` below the relative threshold
    ``1e-12``, or a sign change towards one of the six grid neighbours."""
    w3 = w.components[2]
    sgn = _sign(w3, zero_threshold(np.max(np.abs(w3))))
    mask = sgn == 0
    for axis in range(3):
        for shift in (1, -1):
            mask |= sgn * np.roll(sgn, shift, axis=axis) < 0
    return mask


# ---------------------------------------------------------------------------
# evaluation helpers
# ---------------------------------------------------------------------------

def _field_frame(source, t=None) -> tuple[Frame, str]:
    """Frame and kind under which ``source`` itself (not its curl) is evaluated."""
    if isinstance(source, F.VectorField):
        return SpectralFrame(source), "v"
    if isinstance(source, AnalyticField):
        return AnalyticFrame(source, 0.0 if t is None else t), "v"
    if isinstance(source, Frame):
        return source, "v"
    raise TypeError(f"cannot integrate {type(source).__name__}")


def _center2(center):
    c = tuple(float(x) for x in center)
    return c[:2]


def _integrand_values(w3, integrand, eta=0.0, eta_zero=0.0):
    if integrand == "abs-omega3":
        return np.abs(w3)
    if integrand == "omega3-tilde":
        if eta > 0:
            return w3 * w3 / np.sqrt(w3 * w3 + eta * eta)
        return np.abs(w3) * (np.abs(w3) >= eta_zero)
    if integrand == "f-omega3":
        return f_of(w3)
    raise ValueError(f"unknown integrand {integrand!r}; expected one of {INTEGRANDS}")


def disc_flux(w, disc: F.DiscSpec, integrand="abs-omega3", n_r=64, n_theta=128, eta=0.0):
    """Polar-quadrature integral of a function of ``w_3`` over a horizontal disc.

    ``w`` is the vorticity itself: a sampled :class:`VectorField`, an
    :class:`AnalyticField` or a frame (evaluated at kind ``"v"``).
    """
    if integrand not in INTEGRANDS:
        raise ValueError(f"unknown integrand {integrand!r}; expected one of {INTEGRANDS}")
    if isinstance(w, F.VectorField):
        F.check_disc_fits(disc.r, w.grid)
    if disc.r == 0:
        return 0.0
    frame, kind = _field_frame(w, disc.t)
    x1, x2, wts = disc_rule(disc.r, n_r, n_theta, _center2(disc.center))
    w3 = frame.sample(kind, disc.z, x1, x2).d(2)
    return float(np.dot(wts, _integrand_values(w3, integrand, eta)))


@dataclass(frozen=True)
class FluxBalance:
    residual: float
    disc_bottom: float
    disc_top: float
    side: float
    defect: DefectResult | None = None

    def to_dict(self):
        d = {"residual": self.residual, "disc_bottom": self.disc_bottom,
             "disc_top": self.disc_top, "side": self.side}
        if self.defect is not None:
            d["divergence_defect"] = self.defect.relative
        return d


def flux_balance(w, a, z, z_top, center=(0.0, 0.0), n_r=64, n_theta=128, n_z=64,
                 check=True) -> FluxBalance:
    """Divergence-theorem balance of ``w`` over the cylinder ``|x_h - c| < a``, ``z < x_3 < z_top``.

    residual = |disc(z) - disc(z_top) - side flux| / |disc(z)|, where the discs
    integrate ``w_3`` and the side flux is ``int int w . e_r ds dzeta``.
    When ``check`` is set and ``w`` is sampled, the divergence defect of
    ``w`` is attached (a nonzero defect explains a nonzero residual but does
    not stop the computation).
    """
    if z_top <= z:
        raise ValueError("z_top must exceed z")
    frame, kind = _field_frame(w)
    c = _center2(center)
    x1, x2, wts = disc_rule(a, n_r, n_theta, c)
    bottom = float(np.dot(wts, frame.sample(kind, z, x1, x2).d(2)))
    top = float(np.dot(wts, frame.sample(kind, z_top, x1, x2).d(2)))
    cx, cy, cw, er1, er2 = circle_rule(a, n_theta, c)
    xg, wg = np.polynomial.legendre.leggauss(n_z)
    half = 0.5 * (z_top - z)
    side = 0.0
    for zeta, wz in zip(z + half * (xg + 1), half * wg):
        s = frame.sample(kind, zeta, cx, cy)
        side += wz * float(np.dot(cw, s.d(0) * er1 + s.d(1) * er2))
    scale = abs(bottom) if bottom != 0 else max(abs(top), abs(side), 1e-300)
    residual = abs(bottom - top - side) / scale if (bottom or top or side) else 0.0
    defect = None
    if check and isinstance(w, F.VectorField):
        defect = divfree_defect(w)
    return FluxBalance(residual, bottom, top, side, defect)


# ---------------------------------------------------------------------------
# profiles over (r, z, t)
# ---------------------------------------------------------------------------

def _series_flow(series) -> Flow:
    if isinstance(series, F.VectorField):
        series = [series]
    return as_flow(series)


def _times_for(flow: Flow, times):
    if times is not None:
        return [float(t) for t in times]
    if flow.continuous:
        return [0.0]
    return [float(t) for t in flow.times]


@dataclass(frozen=True, eq=False)
class FluxProfile:
    radii: np.ndarray
    heights: np.ndarray
    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = self.values
        if np.any(v < 0):
            raise AssertionError("negative flux in profile")
        if v.shape[0] > 1:
            drop = np.diff(v, axis=0)
            tol = 1e-12 * max(float(np.max(v)), 1e-300)
            if np.any(drop < -tol):
                raise AssertionError("flux profile is not nondecreasing in r")


def flux_profile(series, radii, heights, times=None, center=(0.0, 0.0), n_r=64, n_theta=128,
                 interp="spectral") -> FluxProfile:
    """``Gamma(r, z, t)`` on a lattice of radii, heights and times."""
    flow = _series_flow(series)
    radii = np.asarray(radii, dtype=float)
    heights = np.asarray(heights, dtype=float)
    times = _times_for(flow, times)
    if flow.grid is not None and len(radii):
        F.check_disc_fits(float(radii.max()), flow.grid)
    c = _center2(center)
    out = np.zeros((len(radii), len(heights), len(times)))
    for it, t in enumerate(times):
        frame = flow.frame(t)
        for iz, z in enumerate(heights):
            for ir, r in enumerate(radii):
                if r == 0:
                    continue
                x1, x2, wts = disc_rule(r, n_r, n_theta, c)
                out[ir, iz, it] = float(np.dot(wts, np.abs(frame.sample("omega", z, x1, x2).d(2))))
    meta = {"n_r": n_r, "n_theta": n_theta, "interp": interp, "center": list(c)}
    return FluxProfile(radii, heights, np.asarray(times), out, meta)


@dataclass(frozen=True, eq=False)
class WProfile:
    """Quantities of the weighted flux ``W`` at fixed radius ``a``; arrays are (n_z, n_t)."""

    a: float
    heights: np.ndarray
    times: np.ndarray
    W: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    rhs_direct: np.ndarray
    rhs_reduced: np.ndarray
    identity_residual: np.ndarray
    dtW: np.ndarray
    dzzW: np.ndarray
    dissipation: np.ndarray
    ineq_lhs: np.ndarray
    ineq_residual: np.ndarray
    dt_stencil: np.ndarray

    def rows(self):
        for iz, z in enumerate(self.heights):
            for it, t in enumerate(self.times):
                yield {k: float(getattr(self, k)[iz, it]) for k in (
                    "W", "B1", "B2", "rhs_direct", "rhs_reduced", "identity_residual", "dtW",
                    "dzzW", "dissipation", "ineq_lhs", "ineq_residual")} | {"z": float(z), "t": float(t)}


def _w_terms(frame: Frame, a, z, c, n_r, n_theta):
    """Spatial W-quantities on one disc and its circle."""
    x1, x2, wts = disc_rule(a, n_r, n_theta, c)
    om = frame.sample("omega", z, x1, x2)
    vel = frame.sample("v", z, x1, x2)
    w3 = om.d(2)
    f = f_of(w3)
    g3 = om.grad(2)
    d33 = om.d(2, (0, 0, 2))
    gv3 = vel.grad(2)
    v = vel.vector()
    w = om.vector()
    W = float(np.dot(wts, f))
    # d_z^2 f(w3) = f'(w3) d33 w3 + f''(w3) (d3 w3)^2 with f' = s/f, f'' = 1/f^3
    dzzW = float(np.dot(wts, w3 / f * d33 + g3[2] ** 2 / f**3))
    diss = float(np.dot(wts, np.sum(g3 * g3, axis=0) / f**3))
    grad_f = g3 * (w3 / f)
    direct = float(np.dot(wts, -np.sum(v * grad_f, axis=0) + (w3 / f) * np.sum(w * gv3, axis=0)))
    reduced = float(np.dot(wts, -gv3[2] / f - (w[0] * g3[0] + w[1] * g3[1]) / f**3 * v[2]))

    cx, cy, cw, er1, er2 = circle_rule(a, n_theta, c)
    omc = frame.sample("omega", z, cx, cy)
    velc = frame.sample("v", z, cx, cy)
    w3c = omc.d(2)
    fc = f_of(w3c)
    dr_w3 = omc.d(2, (1, 0, 0)) * er1 + omc.d(2, (0, 1, 0)) * er2
    B1 = float(np.dot(cw, w3c / fc * dr_w3))
    vr = velc.d(0) * er1 + velc.d(1) * er2
    wr = omc.d(0) * er1 + omc.d(1) * er2
    B2 = float(np.dot(cw, -fc * vr + velc.d(2) * w3c * wr / fc))
    return W, dzzW, diss, direct, reduced, B1, B2


def _time_derivative(values_at, t, flow: Flow, dt_fd):
    """Centered difference in time; returns (derivative, stencil spacing)."""
    if flow.continuous:
        return (values_at(t + dt_fd) - values_at(t - dt_fd)) / (2 * dt_fd), dt_fd
    ts = flow.times
    i = flow.index_of(t)
    if i == 0 or i == len(ts) - 1:
        return math.nan, math.nan
    h1, h2 = ts[i] - ts[i - 1], ts[i + 1] - ts[i]
    a, b, c = values_at(ts[i - 1]), values_at(ts[i]), values_at(ts[i + 1])
    # second-order three-point derivative on a possibly uneven stencil
    d = (-h2 / (h1 * (h1 + h2))) * a + ((h2 - h1) / (h1 * h2)) * b + (h1 / (h2 * (h1 + h2))) * c
    return d, 0.5 * (h1 + h2)


def w_profile(series, a, heights=(0.0,), times=None, center=(0.0, 0.0), n_r=64, n_theta=128,
              dt_fd=1e-3) -> WProfile:
    """Weighted flux ``W(z, t)`` with its boundary terms and heat-inequality audit.

    For every (z, t) this returns W, B1 = int_S d_r f(w3) ds,
    B2 = int_S (-f v_h.e_r + v3 w3 w_h.e_r / f) ds, the right-hand side in its
    transport form ``int_D (-v.grad f + (w3 w / f).grad v3) + B1`` and in its
    reduced form ``int_D (-d3 v3 / f - (w_h.grad_h w3) v3 / f^3) + B1 + B2``
    (``identity_residual`` is their relative difference), the centered time
    derivative of W, ``d_z^2 W``, the dissipation ``int |grad w3|^2 / f^3``, and
    ``ineq_residual = dtW - dzzW + dissipation - rhs`` which vanishes for smooth
    solutions.  Time derivatives need neighbouring snapshots; at the ends of a
    snapshot series they are NaN.
    """
    flow = _series_flow(series)
    if flow.grid is not None:
        F.check_disc_fits(a, flow.grid)
    c = _center2(center)
    heights = np.asarray(heights, dtype=float)
    times = _times_for(flow, times)
    shape = (len(heights), len(times))
    out = {k: np.zeros(shape) for k in ("W", "B1", "B2", "rhs_direct", "rhs_reduced",
                                         "identity_residual", "dtW", "dzzW", "dissipation",
                                         "ineq_lhs", "ineq_residual", "dt_stencil")}
    for iz, z in enumerate(heights):
        def W_at(t, z=z):
            x1, x2, wts = disc_rule(a, n_r, n_theta, c)
            return float(np.dot(wts, f_of(flow.frame(t).sample("omega", z, x1, x2).d(2))))
        for it, t in enumerate(times):
            W, dzzW, diss, direct, reduced, B1, B2 = _w_terms(flow.frame(t), a, z, c, n_r, n_theta)
            rhs1 = direct + B1
            rhs2 = reduced + B1 + B2
            dtW, h = _time_derivative(W_at, t, flow, dt_fd)
            scale = max(abs(rhs1), abs(rhs2), abs(B1) + abs(B2), 1e-300)
            lhs = dtW - dzzW + diss
            vals = dict(W=W, B1=B1, B2=B2, rhs_direct=rhs1, rhs_reduced=rhs2,
                        identity_residual=abs(rhs1 - rhs2) / scale, dtW=dtW, dzzW=dzzW,
                        dissipation=diss, ineq_lhs=lhs, ineq_residual=lhs - rhs1, dt_stencil=h)
            for k, v in vals.items():
                out[k][iz, it] = v
    return WProfile(float(a), heights, np.asarray(times), **out)


# ---------------------------------------------------------------------------
# the Gamma inequality and its two identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaProbe:
    t: float
    z: float
    r: float
    gamma: float
    dt_gamma: float
    dzz_gamma: float
    dr_gamma: float
    drr_gamma: float
    circle_term: float
    ineq_lhs: float
    laplace_bulk: float
    laplace_fd: float
    laplace_resid: float
    transport_bulk: float
    transport_resid: float
    near_zero_set: bool
    min_abs_omega3: float

    def to_dict(self):
        return {k: (float(v) if not isinstance(v, bool) else v) for k, v in self.__dict__.items()}


def _gamma_at(frame, r, z, c, n_r, n_theta):
    x1, x2, wts = disc_rule(r, n_r, n_theta, c)
    return float(np.dot(wts, np.abs(frame.sample("omega", z, x1, x2).d(2))))


def _circle_term(frame, r, z, c, n_theta, eta_zero):
    """``int_S (v.e_r |w3| - w~.e_r v3) ds`` with ``w~ = w sgn w3``."""
    cx, cy, cw, er1, er2 = circle_rule(r, n_theta, c)
    om = frame.sample("omega", z, cx, cy)
    vel = frame.sample("v", z, cx, cy)
    w3 = om.d(2)
    sg = _sign(w3, eta_zero)
    vr = vel.d(0) * er1 + vel.d(1) * er2
    wr = (om.d(0) * er1 + om.d(1) * er2) * sg
    return float(np.dot(cw, vr * np.abs(w3) - wr * vel.d(2))), float(np.min(np.abs(w3)))


def _disc_identities(frame, r, z, c, n_r, n_theta, eta_zero):
    """Bulk integrals ``int_D Lap|w3|`` and ``int_D (v.grad|w3| - w~.grad v3)``
    (valid where ``w3`` keeps one sign on the disc), ``min |w3|`` on the disc and
    ``int_D (|v.grad w3| + |w.grad v3|)``, the size of the transport terms."""
    x1, x2, wts = disc_rule(r, n_r, n_theta, c)
    om = frame.sample("omega", z, x1, x2)
    vel = frame.sample("v", z, x1, x2)
    w3 = om.d(2)
    sg = _sign(w3, eta_zero)
    lap = om.d(2, (2, 0, 0)) + om.d(2, (0, 2, 0)) + om.d(2, (0, 0, 2))
    g3 = om.grad(2)
    gv3 = vel.grad(2)
    adv = np.sum(vel.vector() * g3, axis=0)
    stretch = np.sum(om.vector() * gv3, axis=0)
    size = float(np.dot(wts, np.abs(adv) + np.abs(stretch)))
    return (float(np.dot(wts, sg * lap)), float(np.dot(wts, sg * (adv - stretch))),
            float(np.min(np.abs(w3))), size)


def gamma_inequality_audit(series, radii, heights, times=None, center=(0.0, 0.0), h_r=0.01,
                           h_z=0.01, n_r=64, n_theta=128, dt_fd=1e-3, zero_tol=1e-3,
                           scale_floor=None):
    """Audit the parabolic inequality satisfied by ``Gamma`` on a probe lattice.

    For each probe (r, z, t) the derivatives of ``Gamma`` come from
    4th-order 5-point differences with steps ``h_r`` and ``h_z`` on the disc
    quadratures, and ``d_t Gamma`` from centered differences in time.
    ``ineq_lhs = dtG - dzzG - drrG + drG / r + circle term`` is reported
    signed.  The Laplacian identity compares ``int_D Lap|w3|`` with
    ``dzzG + drrG - drG / r``; the transport identity compares
    ``int_D (v.grad|w3| - w~.grad v3)`` with the circle term, relative to
    ``int_D (|v.grad w3| + |w.grad v3|)`` since both sides vanish for Beltrami
    fields.  Both need
    ``|w3|`` smooth on the stencil, so probes where ``min |w3|`` falls below
    ``zero_tol * max |w3|`` are flagged.
    """
    flow = _series_flow(series)
    c = _center2(center)
    times = _times_for(flow, times)
    probes = []
    for t in times:
        frame = flow.frame(t)
        for z in heights:
            for r in radii:
                if r - 2 * h_r <= 0:
                    raise ValueError(f"radius {r} too small for the radial stencil h_r={h_r}")
                if flow.grid is not None:
                    F.check_disc_fits(r + 2 * h_r, flow.grid)
                offs = np.arange(-2, 3)
                g_r = [_gamma_at(frame, r + k * h_r, z, c, n_r, n_theta) for k in offs]
                g_z = [_gamma_at(frame, r, z + k * h_z, c, n_r, n_theta) for k in offs]
                gamma = g_r[2]
                dr = float(np.dot(_D1, g_r)) / h_r
                drr = float(np.dot(_D2, g_r)) / h_r**2
                dzz = float(np.dot(_D2, g_z)) / h_z**2
                x1, x2, _ = disc_rule(r + 2 * h_r, n_r, n_theta, c)
                w3max = float(np.max(np.abs(frame.sample("omega", z, x1, x2).d(2))))
                eta_zero = zero_threshold(w3max)
                circle, min_c = _circle_term(frame, r, z, c, n_theta, eta_zero)
                lap_bulk, transport, min_d, t_size = _disc_identities(frame, r, z, c, n_r, n_theta,
                                                                      eta_zero)
                # smallest |w3| over the whole stencil footprint
                min_stencil = min(
                    float(np.min(np.abs(frame.sample("omega", z + k * h_z, x1, x2).d(2))))
                    for k in offs)
                dtg, _ = _time_derivative(lambda s: _gamma_at(flow.frame(s), r, z, c, n_r, n_theta),
                                          t, flow, dt_fd)
                lap_fd = dzz + drr - dr / r
                lhs = dtg - dzz - drr + dr / r + circle
                floor = scale_floor if scale_floor is not None else 1e-300
                r3 = abs(lap_bulk - lap_fd) / max(abs(lap_bulk), abs(lap_fd), floor)
                # both sides vanish for Beltrami fields, so scale by the size of the terms
                r4 = abs(transport - circle) / max(t_size, floor)
                near = min(min_c, min_d, min_stencil) < zero_tol * max(w3max, 1e-300)
                probes.append(GammaProbe(float(t), float(z), float(r), gamma, dtg, dzz, dr, drr,
                                         circle, lhs, lap_bulk, lap_fd, r3, transport, r4,
                                         bool(near), min(min_c, min_d, min_stencil)))
    return probes


def transport_identity(series, r, z, t=None, center=(0.0, 0.0), n_r=64, n_theta=128):
    """Bulk and circle sides of the transport identity on one disc."""
    flow = _series_flow(series)
    t = _times_for(flow, None if t is None else [t])[0]
    frame = flow.frame(t)
    c = _center2(center)
    x1, x2, _ = disc_rule(r, n_r, n_theta, c)
    eta_zero = zero_threshold(float(np.max(np.abs(frame.sample("omega", z, x1, x2).d(2)))))
    circle, _ = _circle_term(frame, r, z, c, n_theta, eta_zero)
    _, bulk, _, _ = _disc_identities(frame, r, z, c, n_r, n_theta, eta_zero)
    return bulk, circle


@dataclass(frozen=True, eq=False)
class DecayProfile:
    radii: np.ndarray
    sup_gamma: np.ndarray
    argmax: list

    def slopes(self):
        """``log2`` of consecutive ratios ``sup Gamma(r) / sup Gamma(r / 2)``."""
        g = self.sup_gamma
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log2(g[:-1] / g[1:])

    def to_rows(self):
        return [{"r": float(r), "sup_gamma": float(g), "z": a[0], "t": a[1]}
                for r, g, a in zip(self.radii, self.sup_gamma, self.argmax)]


def gamma_decay_profile(series, r0, levels=3, center=(0.0, 0.0, 0.0), t0=None, n_heights=17,
                        n_r=48, n_theta=96) -> DecayProfile:
    """``sup`` of ``Gamma`` over the cylinders ``Q(r)``, ``r = r0 2^-m``, ``m = 0..levels``.

    ``Q(r) = {|x_h - c_h| < r, |x_3 - c_3| < r, t0 - r^2 < t <= t0}``; since
    ``Gamma`` grows with the radius the supremum is taken over discs of radius
    ``r`` at ``n_heights`` equally spaced heights and at every available time
    in the window (snapshots, or 5 samples for analytic flows).
    """
    flow = _series_flow(series)
    if flow.grid is not None:
        F.check_disc_fits(r0, flow.grid)
    center = tuple(float(x) for x in center) + (0.0,) * (3 - len(center))
    if t0 is None:
        t0 = 0.0 if flow.continuous else float(flow.times[-1])
    radii = r0 * 2.0 ** -np.arange(levels + 1)
    sups, where = [], []
    for r in radii:
        try:
            ts = flow.time_samples(t0 - r * r, t0, n=5)
        except CoverageError:
            ts = [t0]
        best, arg = -1.0, None
        for t in ts:
            frame = flow.frame(t)
            for z in center[2] + np.linspace(-r, r, n_heights):
                g = _gamma_at(frame, r, z, center[:2], n_r, n_theta)
                if g > best:
                    best, arg = g, (float(z), float(t))
        sups.append(best)
        where.append(arg)
    sups = np.asarray(sups)
    if np.any(np.diff(sups) > 1e-12 * max(float(sups.max()), 1e-300)):
        raise AssertionError("sup Gamma is not monotone in r")
    return DecayProfile(radii, sups, where)
