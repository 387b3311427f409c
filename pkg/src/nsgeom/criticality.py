"""
Scale-invariant quantities of a velocity field around a space-time point.

Probes are parabolic cylinders ``Q(r) = B(r; x0) x (t0 - r^2, t0)`` (balls) or
their axis-aligned variant ``|x_h| < r, |x_3| < r``.  With

    F = r^-2 int_Q |v|^3,     E = r^-1 int_Q |grad v|^2,
    A = r^-1 sup_t int_B |v|^2,    D = r^-2 int_Q |p|^(3/2),

every quantity is unchanged under ``v -> lam v(x0 + lam x, t0 + lam^2 t)``.
Spatial integrals stack Gauss-Legendre discs; time integrals use
Gauss-Legendre for analytic flows and the trapezoid rule over snapshots.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate

from . import fields as F
from .errors import CoverageError, FieldError, ProbeRegionError
from .evaluate import Flow, Frame, as_flow, disc_rule, layer_rule

EPS_CKN_DEFAULT = 0.05


@dataclass(frozen=True)
class Quadrature:
    n_z: int = 16
    n_r: int = 16
    n_theta: int = 32
    n_t: int = 8


def _flow(series) -> Flow:
    if isinstance(series, F.VectorField):
        series = [series]
    return as_flow(series)


def _center3(x0):
    x0 = tuple(float(c) for c in x0)
    if len(x0) != 3:
        raise ValueError("center must be a 3-vector")
    return x0


def _default_t0(flow: Flow, t0):
    if t0 is not None:
        return float(t0)
    return 0.0 if flow.continuous else float(flow.times[-1])


def _check_region(flow: Flow, r):
    if flow.grid is not None and r > flow.grid.max_probe_radius() * (1 + 1e-12):
        raise ProbeRegionError(f"probe radius {r} exceeds the safe limit "
                               f"{flow.grid.max_probe_radius():.4f}")


def _ball_integrals(frame: Frame, x0, r, shape, quad: Quadrature, need):
    """Spatial integrals over ``B(r; x0)`` (or the cylinder) of the requested densities.

    ``need`` is a subset of {"v2", "v3", "grad2", "p32"}.
    """
    out = dict.fromkeys(need, 0.0)
    zs, wz, rads = layer_rule(shape, r, quad.n_z, x0[2])
    for z, wzi, rad in zip(zs, wz, rads):
        x1, x2, w = disc_rule(rad, quad.n_r, quad.n_theta, x0[:2])
        if not len(w):
            continue
        s = frame.sample("v", z, x1, x2)
        v2 = s.d(0) ** 2 + s.d(1) ** 2 + s.d(2) ** 2
        if "v2" in need:
            out["v2"] += wzi * float(np.dot(w, v2))
        if "v3" in need:
            out["v3"] += wzi * float(np.dot(w, v2 ** 1.5))
        if "grad2" in need:
            G = s.gradient_tensor()
            out["grad2"] += wzi * float(np.dot(w, np.sum(G * G, axis=(0, 1))))
        if "p32" in need:
            p = frame.sample("p", z, x1, x2).d(0)
            out["p32"] += wzi * float(np.dot(w, np.abs(p) ** 1.5))
    return out


@dataclass(frozen=True)
class ScaleQuantities:
    center: tuple
    t0: float
    r: float
    F: float
    E: float
    A: float
    D: float
    shape: str = "ball"

    @property
    def total(self):
        return self.F + self.E + self.A + self.D

    def to_dict(self):
        return {"center": list(self.center), "t0": self.t0, "r": self.r, "F": self.F,
                "E": self.E, "A": self.A, "D": self.D, "total": self.total, "shape": self.shape}


def scale_quantities(series, center=(0.0, 0.0, 0.0), radii=(0.5,), t0=None, shape="ball",
                     quad: Quadrature | None = None, sup_samples=9) -> list[ScaleQuantities]:
    """F, E, A, D on the probes ``Q(r; center, t0)`` for each radius.

    ``A`` takes the supremum over the snapshots inside the time window (or
    ``sup_samples`` equally spaced times for analytic flows, plus the
    quadrature nodes).  Raises :class:`CoverageError` when the snapshots do
    not span ``(t0 - r^2, t0)``.
    """
    quad = quad or Quadrature()
    flow = _flow(series)
    x0 = _center3(center)
    t0 = _default_t0(flow, t0)
    out = []
    for r in radii:
        r = float(r)
        if not r > 0:
            raise ProbeRegionError("radii must be positive")
        _check_region(flow, r)
        nodes = flow.time_quadrature(t0 - r * r, t0, quad.n_t)
        if not nodes:
            raise CoverageError("empty time window")
        Fi = Ei = Di = 0.0
        a_sup = 0.0
        tol = 1e-9 * max(1.0, abs(t0))
        for t, wt in nodes:
            vals = _ball_integrals(flow.frame(t), x0, r, shape, quad, ("v2", "v3", "grad2", "p32"))
            Fi += wt * vals["v3"]
            Ei += wt * vals["grad2"]
            Di += wt * vals["p32"]
            # snapshot rules may lean on a neighbour just outside the window
            if t0 - r * r - tol <= t <= t0 + tol:
                a_sup = max(a_sup, vals["v2"])
        for t in flow.time_samples(t0 - r * r, t0, sup_samples):
            a_sup = max(a_sup, _ball_integrals(flow.frame(t), x0, r, shape, quad, ("v2",))["v2"])
        out.append(ScaleQuantities(x0, t0, r, float(Fi / r**2), float(Ei / r), float(a_sup / r),
                                   float(Di / r**2), shape))
    return out


def lambda_q(series, q, center=(0.0, 0.0, 0.0), t0=None, r_max=None, levels=4,
             quad: Quadrature | None = None, sup_samples=5):
    """``sup_r sup_t r^(q-3) int_B(r) |v|^q`` over ``r = r_max 2^-m`` and the time window."""
    if not 1.5 < q < 2.0:
        raise ValueError(f"q must lie strictly between 3/2 and 2, got {q}")
    quad = quad or Quadrature()
    flow = _flow(series)
    x0 = _center3(center)
    t0 = _default_t0(flow, t0)
    if r_max is None:
        r_max = flow.grid.max_probe_radius() if flow.grid is not None else 1.0
    _check_region(flow, r_max)
    best = 0.0
    for m in range(levels + 1):
        r = r_max * 2.0**-m
        try:
            ts = flow.time_samples(t0 - r * r, t0, sup_samples)
        except CoverageError:
            ts = [t0]
        for t in ts:
            frame = flow.frame(t)
            total = 0.0
            zs, wz, rads = layer_rule("ball", r, quad.n_z, x0[2])
            for z, wzi, rad in zip(zs, wz, rads):
                x1, x2, w = disc_rule(rad, quad.n_r, quad.n_theta, x0[:2])
                s = frame.sample("v", z, x1, x2)
                mag = np.sqrt(s.d(0) ** 2 + s.d(1) ** 2 + s.d(2) ** 2)
                total += wzi * float(np.dot(w, mag**q))
            best = max(best, r ** (q - 3) * total)
    return best


def critical_flux_norm(series, center=(0.0, 0.0, 0.0), t0=None, scale=1.0, n_heights=9,
                       n_times=5, n_r=64, n_theta=128):
    """``sup_t sup_z int_D(scale/2, z, t) |omega| dx_h``.

    Heights range over ``|z - z0| < scale/2`` and times over
    ``(t0 - scale^2/4, t0]`` (snapshots inside the window, or ``n_times``
    samples for analytic flows).
    """
    flow = _flow(series)
    x0 = _center3(center)
    t0 = _default_t0(flow, t0)
    rad = 0.5 * scale
    _check_region(flow, rad)
    try:
        ts = flow.time_samples(t0 - scale * scale / 4, t0, n_times)
    except CoverageError:
        ts = [t0]
    x1, x2, w = disc_rule(rad, n_r, n_theta, x0[:2])
    best = 0.0
    for t in ts:
        frame = flow.frame(t)
        for z in x0[2] + np.linspace(-rad, rad, n_heights):
            om = frame.sample("omega", z, x1, x2)
            mag = np.sqrt(om.d(0) ** 2 + om.d(1) ** 2 + om.d(2) ** 2)
            best = max(best, float(np.dot(w, mag)))
    return best


def g_energy(series, region: F.CylinderRegion | None = None, quad: Quadrature | None = None):
    """``int_Q (|v|^3 + |p|^(3/2)) + 2`` over the probe (default ``Q(1)`` at the last time)."""
    quad = quad or Quadrature()
    flow = _flow(series)
    if region is None:
        region = F.CylinderRegion(1.0, (0.0, 0.0, 0.0), _default_t0(flow, None))
    _check_region(flow, region.r)
    total = 0.0
    t_lo, t_hi = region.t_window
    for t, wt in flow.time_quadrature(t_lo, t_hi, quad.n_t):
        vals = _ball_integrals(flow.frame(t), region.center, region.r, region.shape, quad, ("v3", "p32"))
        total += wt * (vals["v3"] + vals["p32"])
    return total + 2.0


def epsilon_regularity_flag(sq: ScaleQuantities, eps_ckn=EPS_CKN_DEFAULT):
    """Heuristic smallness flag ``F + D <= eps_ckn`` (the threshold is not a proven constant)."""
    return bool(sq.F + sq.D <= eps_ckn)


# ---------------------------------------------------------------------------
# local energy balance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """``phi(x, t) = (1 - |x - x0|^2 / R^2)_+^4 * tau(t)``.

    ``tau`` is 1 (``time_bump=None``) or the polynomial bump
    ``((t - a)(b - t) / ((b - a)/2)^2)^2`` on ``(a, b) = time_bump``.
    """

    center: tuple
    R: float
    time_bump: tuple | None = None

    def tau(self, t):
        if self.time_bump is None:
            return 1.0, 0.0
        a, b = self.time_bump
        if not a < t < b:
            return 0.0, 0.0
        half = 0.5 * (b - a)
        u = (t - a) * (b - t) / half**2
        du = (b - 2 * t + a) / half**2
        return u * u, 2 * u * du

    def spatial(self, x1, x2, z):
        """``phi_s``, its gradient and Laplacian at points of one plane."""
        c = self.center
        d = np.stack([x1 - c[0], x2 - c[1], np.full_like(x1, z - c[2])])
        s = 1.0 - np.sum(d * d, axis=0) / self.R**2
        inside = s > 0
        s = np.where(inside, s, 0.0)
        phi = s**4
        # grad (s^4) = 4 s^3 grad s, grad s = -2 d / R^2
        grad = 4 * s**3 * (-2 * d / self.R**2)
        # lap (s^4) = 12 s^2 |grad s|^2 + 4 s^3 lap s, lap s = -6 / R^2
        lap = 12 * s**2 * np.sum((2 * d / self.R**2) ** 2, axis=0) + 4 * s**3 * (-6 / self.R**2)
        return phi, grad, lap


def _energy_terms(frame: Frame, phi: TestFunction, quad: Quadrature):
    """``int |v|^2 phi_s`` and the integrand of the time integral (with tau factored out)."""
    t = frame.time
    tau, dtau = phi.tau(t)
    e_phi = 0.0
    bulk = 0.0
    zs, wz, rads = layer_rule("ball", phi.R, quad.n_z, phi.center[2])
    for z, wzi, rad in zip(zs, wz, rads):
        x1, x2, w = disc_rule(rad, quad.n_r, quad.n_theta, phi.center[:2])
        if not len(w):
            continue
        s = frame.sample("v", z, x1, x2)
        v = s.vector()
        G = s.gradient_tensor()
        p = frame.sample("p", z, x1, x2).d(0)
        ps, gs, ls = phi.spatial(x1, x2, z)
        v2 = np.sum(v * v, axis=0)
        e_phi += wzi * float(np.dot(w, v2 * ps))
        dens = (2 * np.sum(G * G, axis=(0, 1)) * ps * tau
                - v2 * (ps * dtau + ls * tau)
                - (v2 + 2 * p) * np.sum(v * gs, axis=0) * tau)
        bulk += wzi * float(np.dot(w, dens))
    return e_phi * tau, bulk


def local_energy_residual(series, phi: TestFunction, quad: Quadrature | None = None, span=None,
                          n_t=8):
    """Signed local energy balance over the span of the series.

    Returns ``[int |v|^2 phi]_{t_first}^{t_last} + int int (2 |grad v|^2 phi
    - |v|^2 (d_t phi + Lap phi) - (|v|^2 + 2 p) v . grad phi)``, where the time
    integral runs from the first to the last snapshot *in the given order*
    (or over ``span = (t_first, t_last)`` for analytic flows).  It vanishes for
    smooth solutions and is <= 0 for suitable weak solutions; listing the
    snapshots in reverse negates it.  Over snapshot series the time integral
    uses a cubic spline through the integrand at the snapshot times when the
    span holds at least four of them, and the trapezoid rule otherwise.
    """
    quad = quad or Quadrature()
    flow = _flow(series)
    if span is not None:
        first, last = (float(t) for t in span)
    elif flow.continuous:
        raise FieldError("analytic flows need an explicit time span")
    else:
        if len(flow.times) < 3:
            raise FieldError("need at least three snapshots")
        if isinstance(series, (list, tuple)):
            first, last = float(series[0].time), float(series[-1].time)
        else:
            first, last = float(flow.times[0]), float(flow.times[-1])
    if flow.grid is not None and phi.R > flow.grid.max_probe_radius() * (1 + 1e-12):
        raise ProbeRegionError("test function support exceeds the probe-safe region")
    lo, hi = min(first, last), max(first, last)
    e_lo, _ = _energy_terms(flow.frame(lo), phi, quad)
    e_hi, _ = _energy_terms(flow.frame(hi), phi, quad)
    inside = [] if flow.continuous else [t for t in flow.times if lo <= t <= hi]
    if len(inside) >= 4 and inside[0] == lo and inside[-1] == hi:
        # cubic spline through the integrand at the snapshots: 4th order in the spacing
        vals = [_energy_terms(flow.frame(t), phi, quad)[1] for t in inside]
        bulk = float(interpolate.CubicSpline(inside, vals).integrate(lo, hi))
    else:
        bulk = sum(wt * _energy_terms(flow.frame(t), phi, quad)[1]
                   for t, wt in flow.time_quadrature(lo, hi, n_t))
    value = (e_hi - e_lo) + bulk
    return value if last >= first else -value


# ---------------------------------------------------------------------------
# regular shells
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShellResult:
    a: float
    delta: float
    sup: float
    table: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {"a": self.a, "delta": self.delta, "sup": self.sup}


def _smoothness_density(frame: Frame, z, x1, x2):
    """``|v| + |grad v| + |grad^2 v|`` (Frobenius norms) on one plane."""
    s = frame.sample("v", z, x1, x2)
    v = s.vector()
    G = s.gradient_tensor()
    h2 = np.zeros_like(x1)
    for i in range(3):
        for j in range(3):
            for k in range(j, 3):
                alpha = [0, 0, 0]
                alpha[j] += 1
                alpha[k] += 1
                mult = 1.0 if j == k else 2.0
                h2 += mult * s.d(i, tuple(alpha)) ** 2
    return (np.sqrt(np.sum(v * v, axis=0)) + np.sqrt(np.sum(G * G, axis=(0, 1))) + np.sqrt(h2))


def regular_shell_search(series, center=(0.0, 0.0, 0.0), t0=None, unit=1.0,
                         a_range=(2 / 3, 3 / 4), delta_range=(0.01, 0.1), n_a=9, n_delta=4,
                         spacing=None, sup_samples=5) -> ShellResult:
    """Shell ``Q(a + delta) \\ Q(a - delta)`` with the smallest ``sup(|v| + |grad v| + |grad^2 v|)``.

    ``a`` runs over ``n_a`` interior points of ``a_range`` and ``delta`` over a
    geometric lattice in ``delta_range``, both in units of ``unit`` (the probe
    ``Q(1)`` has radius ``unit``).  The supremum is taken on a Cartesian
    probe lattice of the given ``spacing`` at the available times.  Ties go
    to the first ``a`` and then to the larger ``delta``.
    """
    flow = _flow(series)
    x0 = _center3(center)
    t0 = _default_t0(flow, t0)
    a_vals = unit * np.linspace(a_range[0], a_range[1], n_a + 2)[1:-1]
    d_vals = unit * np.geomspace(delta_range[1], delta_range[0], n_delta)
    rmax = float(a_vals.max() + d_vals.max())
    _check_region(flow, rmax)
    if spacing is None:
        spacing = min(0.5 * float(d_vals.min()),
                      min(flow.grid.spacing) if flow.grid is not None else 0.05 * unit)
    ticks = np.arange(-rmax, rmax + 0.5 * spacing, spacing)
    X1, X2 = np.meshgrid(ticks, ticks, indexing="ij")
    X1, X2 = X1.ravel(), X2.ravel()
    try:
        times = flow.time_samples(t0 - rmax**2, t0, sup_samples)
    except CoverageError:
        times = [t0]
    # per (time, layer) densities at lattice points inside B(rmax)
    records = []
    for t in times:
        frame = flow.frame(t)
        for zk in ticks:
            rad2 = X1**2 + X2**2 + zk**2
            keep = rad2 < rmax**2
            if not keep.any():
                continue
            dens = _smoothness_density(frame, x0[2] + zk, x0[0] + X1[keep], x0[1] + X2[keep])
            records.append((t0 - t, np.sqrt(rad2[keep]), dens))
    table = []
    best = None
    for a in a_vals:
        for d in d_vals:
            lo, hi = a - d, a + d
            sup = 0.0
            for age, rad, dens in records:
                # inside Q(hi) but not inside Q(lo)
                in_hi = (rad < hi) & (age < hi * hi)
                in_lo = (rad < lo) & (age < lo * lo)
                sel = in_hi & ~in_lo
                if sel.any():
                    sup = max(sup, float(dens[sel].max()))
            table.append({"a": float(a), "delta": float(d), "sup": sup})
            if best is None or sup < best[2]:
                best = (float(a), float(d), sup)
    return ShellResult(best[0], best[1], best[2], table)


# ---------------------------------------------------------------------------
# Type I scans
# ---------------------------------------------------------------------------

@dataclass
class TypeIReport:
    centers: list
    radii: list
    table: list
    sup: dict
    lambda_q: dict
    G: float
    critical_flux: float
    eps_ckn: float
    flags: list

    def to_dict(self):
        return {"centers": [list(c) for c in self.centers], "radii": list(self.radii),
                "table": [q.to_dict() for q in self.table], "sup": self.sup,
                "lambda_q": self.lambda_q, "G": self.G, "critical_flux_norm": self.critical_flux,
                "eps_ckn": self.eps_ckn, "eps_ckn_heuristic": True, "flags": self.flags}


def type_i_scan(series, centers, r_max, levels=4, q=1.8, t0=None, shape="ball",
                quad: Quadrature | None = None, eps_ckn=EPS_CKN_DEFAULT) -> TypeIReport:
    """F, E, A, D over dyadic radii at each center, with their suprema, Lambda_q,
    G (on ``Q(r_max)`` at the first center) and the critical flux norm."""
    flow = _flow(series)
    t0 = _default_t0(flow, t0)
    radii = [r_max * 2.0**-m for m in range(levels + 1)]
    table, flags = [], []
    lq = {}
    for c in centers:
        sq = scale_quantities(flow, c, radii, t0, shape, quad)
        table.extend(sq)
        flags.extend(epsilon_regularity_flag(s, eps_ckn) for s in sq)
        lq[",".join(f"{x:.6g}" for x in c)] = float(lambda_q(flow, q, c, t0, r_max, levels, quad))
    sup = {k: max(getattr(s, k) for s in table) for k in ("F", "E", "A", "D")}
    sup["total"] = max(s.total for s in table)
    region = F.CylinderRegion(r_max, tuple(centers[0]), t0, shape)
    G = g_energy(flow, region, quad)
    crit = critical_flux_norm(flow, centers[0], t0, scale=min(1.0, 2 * r_max))
    return TypeIReport([tuple(c) for c in centers], radii, table, sup, lq, G, crit, eps_ckn, flags)
