"""
Axisymmetric diagnostics in cylindrical coordinates ``(r, theta, z)`` about a
vertical axis: meridian velocity, swirl ``r v_theta``, the stream function
``d_r psi = r v_z, d_z psi = -r v_r, psi(0, z) = 0``, the velocity-direction
cone test, and the two-mode level-set exploration that bounds
``|psi(r0, z0)|`` by ``3 C1 r0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import interpolate, optimize

from . import fields as F
from .errors import CompatibilityError, ExplorationError, NotAxisymmetricError
from .evaluate import Frame, SpectralFrame, AnalyticFrame
from .analytic import AnalyticField


# ---------------------------------------------------------------------------
# meridian fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeridianField:
    """Azimuthal averages ``v_r, v_theta, v_z`` on an ``(r, z)`` lattice (arrays (n_r, n_z)).

    ``source(comp, r, z, dz_order)`` optionally evaluates the cylindrical
    component ``comp`` (0: r, 1: theta, 2: z) or its z-derivatives exactly at
    arbitrary points, which the stream function uses for Gauss quadrature.
    """

    r: np.ndarray
    z: np.ndarray
    vr: np.ndarray
    vt: np.ndarray
    vz: np.ndarray
    deviation: float = 0.0
    source: Callable | None = field(default=None, repr=False)

    @classmethod
    def from_functions(cls, vr, vt, vz, r, z, dz=None):
        """Build from callables ``f(r, z)``; ``dz`` maps a component index to
        its z-derivative callable (needed for the exact compatibility check)."""
        r = np.asarray(r, dtype=float)
        z = np.asarray(z, dtype=float)
        R, Z = np.meshgrid(r, z, indexing="ij")
        funcs = (vr, vt, vz)

        def source(comp, rr, zz, order=0):
            if order == 0:
                return funcs[comp](rr, zz)
            if dz is None or comp not in dz:
                raise ValueError("no z-derivative available")
            return dz[comp](rr, zz)
        vals = [np.asarray(f(R, Z), dtype=float) * np.ones_like(R) for f in funcs]
        vals[0][R == 0] = 0.0
        vals[1][R == 0] = 0.0
        return cls(r, z, vals[0], vals[1], vals[2], 0.0, source)

    def speed(self):
        return np.sqrt(self.vr**2 + self.vt**2 + self.vz**2)


def _cyl_components(sample, cos, sin):
    v1, v2, v3 = sample.d(0), sample.d(1), sample.d(2)
    return v1 * cos + v2 * sin, -v1 * sin + v2 * cos, v3



def to_cylindrical(v, center=(0.0, 0.0), r_max=None, n_r=65, heights=None, n_theta=32,
                   tol=1e-8, t=0.0) -> MeridianField:
    """Cylindrical components about the vertical line through ``center``.

    Each component is averaged over ``n_theta`` rays; the largest angular
    deviation relative to ``max |v|`` must stay below ``tol``, otherwise
    :class:`NotAxisymmetricError` is raised with the measured deviation.
    Only axes parallel to ``e_3`` are supported.
    """
    if isinstance(v, F.VectorField):
        frame: Frame = SpectralFrame(v)
        grid = v.grid
        if heights is None:
            heights = grid.coords()[2]
        if r_max is None:
            r_max = grid.max_probe_radius()
    elif isinstance(v, AnalyticField):
        frame = AnalyticFrame(v, t)
        if heights is None:
            heights = np.linspace(-1.0, 1.0, 33)
        if r_max is None:
            r_max = 1.0
    else:
        frame = v
        if heights is None or r_max is None:
            raise ValueError("heights and r_max are required for generic frames")
    heights = np.asarray(heights, dtype=float)
    r = np.linspace(0.0, r_max, n_r)
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    Rg, Tg = np.meshgrid(r, theta, indexing="ij")
    cos, sin = np.cos(Tg).ravel(), np.sin(Tg).ravel()
    x1 = center[0] + (Rg * np.cos(Tg)).ravel()
    x2 = center[1] + (Rg * np.sin(Tg)).ravel()
    out = np.zeros((3, n_r, len(heights)))
    dev = 0.0
    vmax = 0.0
    for k, z in enumerate(heights):
        s = frame.sample("v", z, x1, x2)
        comps = [c.reshape(n_r, n_theta) for c in _cyl_components(s, cos, sin)]
        for i, c in enumerate(comps):
            mean = c.mean(axis=1)
            out[i, :, k] = mean
            if i < 2:
                # at r = 0 the "radial" and "azimuthal" rays see the horizontal vector itself
                dev = max(dev, float(np.max(np.abs(c[1:] - mean[1:, None]), initial=0.0)))
                dev = max(dev, float(np.max(np.abs(c[0]))))
            else:
                dev = max(dev, float(np.max(np.abs(c - mean[:, None]))))
        vmax = max(vmax, float(np.max(np.sqrt(sum(c**2 for c in comps)))))
    rel = dev / vmax if vmax > 0 else 0.0
    if rel > tol:
        raise NotAxisymmetricError(rel, tol)
    out[0, 0, :] = 0.0
    out[1, 0, :] = 0.0

    def source(comp, rr, zz, order=0):
        rr = np.asarray(rr, dtype=float)
        zz = np.broadcast_to(np.asarray(zz, dtype=float), rr.shape)
        res = np.empty(rr.shape)
        alpha = (0, 0, order)
        for zval in np.unique(zz):
            sel = zz == zval
            # average over rays at each requested radius
            rs = rr[sel]
            X1 = center[0] + np.outer(rs, np.cos(theta)).ravel()
            X2 = center[1] + np.outer(rs, np.sin(theta)).ravel()
            smp = frame.sample("v", zval, X1, X2)
            c, s_ = np.tile(np.cos(theta), len(rs)), np.tile(np.sin(theta), len(rs))
            a, b, w3 = smp.d(0, alpha), smp.d(1, alpha), smp.d(2, alpha)
            comp_vals = (a * c + b * s_, -a * s_ + b * c, w3)[comp]
            res[sel] = comp_vals.reshape(len(rs), n_theta).mean(axis=1)
        return res
    return MeridianField(r, heights, out[0], out[1], out[2], rel, source)


def swirl(m: MeridianField):
    """``r v_theta`` on the meridian lattice."""
    return m.r[:, None] * m.vt


# ---------------------------------------------------------------------------
# stream function
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StreamFunction:
    r: np.ndarray
    z: np.ndarray
    psi: np.ndarray
    residual: float
    C1: float | None = None
    C2: float | None = None
    _spline: object = field(default=None, repr=False)

    def spline(self):
        if self._spline is None:
            k = min(5, len(self.r) - 1, len(self.z) - 1)
            sp = interpolate.RectBivariateSpline(self.r, self.z, self.psi, kx=k, ky=k)
            object.__setattr__(self, "_spline", sp)
        return self._spline

    def value(self, r, z):
        return float(self.spline()(r, z, grid=False))

    def grad(self, r, z):
        sp = self.spline()
        return float(sp(r, z, dx=1, grid=False)), float(sp(r, z, dy=1, grid=False))

    def slope_constant(self, C2):
        """Smallest ``C1`` with ``|d_r psi| <= C1 + C2 |d_z psi|`` on the lattice."""
        sp = self.spline()
        R, Z = np.meshgrid(self.r, self.z, indexing="ij")
        pr = sp(R, Z, dx=1, grid=False)
        pz = sp(R, Z, dy=1, grid=False)
        return float(np.max(np.abs(pr) - C2 * np.abs(pz)))


def stream_function(m: MeridianField, n_gauss=8, tol=1e-8, C1=None, C2=None) -> StreamFunction:
    """Integrate ``d_r psi = r v_z`` outward from the axis.

    With an exact ``source`` each lattice interval gets an ``n_gauss``-point
    Gauss-Legendre rule, and the compatibility residual
    ``max |d_z psi + r v_r|`` (relative to ``max |r v_r|, |r v_z|``) is formed
    from the same quadrature applied to ``d_z v_z``.  Without a source the
    samples are integrated through a quintic spline in ``r`` and ``d_z`` is
    taken by finite differences.  Raises :class:`CompatibilityError` above
    ``tol``.
    """
    r, z = m.r, m.z
    n_r, n_z = len(r), len(z)
    psi = np.zeros((n_r, n_z))
    dzpsi = np.zeros((n_r, n_z))
    if m.source is not None:
        xg, wg = np.polynomial.legendre.leggauss(n_gauss)
        exact_dz = True
        for j in range(n_r - 1):
            a, b = r[j], r[j + 1]
            nodes = 0.5 * (b - a) * (xg + 1) + a
            w = 0.5 * (b - a) * wg
            Rn = np.repeat(nodes[:, None], n_z, axis=1)
            Zn = np.repeat(z[None, :], n_gauss, axis=0)
            vz = m.source(2, Rn.ravel(), Zn.ravel()).reshape(n_gauss, n_z)
            psi[j + 1] = psi[j] + np.sum((w * nodes)[:, None] * vz, axis=0)
            try:
                dvz = m.source(2, Rn.ravel(), Zn.ravel(), 1).reshape(n_gauss, n_z)
                dzpsi[j + 1] = dzpsi[j] + np.sum((w * nodes)[:, None] * dvz, axis=0)
            except ValueError:
                exact_dz = False
        if not exact_dz:
            dzpsi = np.gradient(psi, z, axis=1, edge_order=2)
    else:
        k = min(5, n_r - 1)
        for jz in range(n_z):
            sp = interpolate.make_interp_spline(r, r * m.vz[:, jz], k=k)
            anti = sp.antiderivative()
            psi[:, jz] = anti(r) - anti(r[0])
        dzpsi = np.gradient(psi, z, axis=1, edge_order=2)
    rvr = r[:, None] * m.vr
    scale = max(float(np.max(np.abs(rvr))), float(np.max(np.abs(r[:, None] * m.vz))), 1e-300)
    residual = float(np.max(np.abs(dzpsi + rvr))) / scale
    if residual > tol:
        raise CompatibilityError(residual, tol)
    return StreamFunction(r, z, psi, residual, C1, C2)


# ---------------------------------------------------------------------------
# velocity direction cone
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityConeResult:
    passed: bool
    worst_ratio: float
    worst_index: tuple | None
    frontier: list

    def to_dict(self):
        return {"passed": self.passed, "worst_ratio": self.worst_ratio,
                "worst_index": None if self.worst_index is None else list(self.worst_index),
                "frontier": self.frontier}


def velocity_cone_check(m: MeridianField, delta, M, n_frontier=8) -> VelocityConeResult:
    """Check ``|v| <= M`` or ``|v_z| / |v| <= 1 - delta`` at every lattice node.

    The frontier lists, for thresholds ``M`` at quantiles of ``|v|``, the
    largest ``delta`` that would pass.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if M < 0:
        raise ValueError("M must be nonnegative")
    speed = m.speed()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(speed > 0, np.abs(m.vz) / np.where(speed > 0, speed, 1.0), 0.0)
    active = speed > M
    worst_ratio, worst_index = 0.0, None
    if active.any():
        masked = np.where(active, ratio, -1.0)
        idx = np.unravel_index(int(np.argmax(masked)), masked.shape)
        worst_ratio, worst_index = float(masked[idx]), tuple(int(i) for i in idx)
    passed = worst_ratio <= 1 - delta + 1e-15
    frontier = []
    if speed.max() > 0:
        for qm in np.linspace(0, 1, n_frontier, endpoint=False):
            Mq = float(np.quantile(speed, qm))
            sel = speed > Mq
            best = 1.0 - float(ratio[sel].max()) if sel.any() else 1.0
            frontier.append({"M": Mq, "delta_max": best})
    return VelocityConeResult(bool(passed), worst_ratio, worst_index, frontier)


# ---------------------------------------------------------------------------
# level-set exploration
# ---------------------------------------------------------------------------

@dataclass
class ExplorationTrace:
    start: tuple
    points: list
    modes: list
    switches: list
    psi_start: float
    bound: float
    mode2_excess: float
    mode1_drift: float
    passed: bool
    reached_axis: bool
    max_excursion: float
    flags: list = field(default_factory=list)
    mode2_total: float = 0.0

    @property
    def final(self):
        return self.points[-1]

    def to_dict(self):
        return {"start": list(self.start), "final": list(self.final),
                "polyline": [[float(a), float(b)] for a, b in self.points],
                "modes": self.modes, "switches": self.switches,
                "psi_start_abs": abs(self.psi_start), "certificate_bound": self.bound,
                "mode_ii_excess": self.mode2_excess, "mode_ii_total": self.mode2_total,
                "mode_i_drift": self.mode1_drift,
                "passed": self.passed, "reached_axis": self.reached_axis,
                "max_excursion": self.max_excursion, "flags": self.flags}


def explore_level_set(psi, start, C1, C2, step=None, r_axis_tol=None, psi_tol=None,
                      max_steps=200000, check_start=True) -> ExplorationTrace:
    """Walk from ``start = (r0, z0)`` to the axis with the two-mode rule.

    Mode (ii) moves with ``z`` fixed and ``r`` decreasing; it hands over to
    mode (i) once ``|d_r psi| >= 2 C1 + 1``.  Mode (i) follows the level set
    of ``psi`` towards smaller ``r`` (predictor along the tangent, Newton
    correction back onto the level) and hands back once
    ``|d_r psi| <= 2 C1 - 1``.  At the start, ``|d_r psi| > 2 C1`` selects
    mode (i) and anything else mode (ii).  ``psi`` needs ``value(r, z)`` and
    ``grad(r, z) -> (d_r psi, d_z psi)``.
    """
    if not (C1 > 10 and C2 > 10):
        raise ValueError("the exploration assumes C1, C2 > 10")
    r0, z0 = float(start[0]), float(start[1])
    eps = 1.0 / (100.0 * C2)
    if check_start and not (0 < r0 < eps and abs(z0) < eps):
        raise ValueError(f"start must lie in B(eps) with eps = 1/(100 C2) = {eps:.3g}")
    if step is None:
        step = r0 / 1000.0
    if r_axis_tol is None:
        r_axis_tol = step / 2
    if psi_tol is None:
        psi_tol = 1e-10 * max(1.0, C1 * r0)
    hi_thr, lo_thr = 2 * C1 + 1, 2 * C1 - 1

    def dr_abs(r, z):
        return abs(psi.grad(r, z)[0])

    psi0 = psi.value(r0, z0)
    r, z = r0, z0
    mode = "i" if dr_abs(r, z) > 2 * C1 else "ii"
    points, modes, switches = [(r, z)], [mode], []
    drift2 = 0.0
    total2 = 0.0
    drift1 = 0.0
    flags = []
    seg_psi = psi0
    seg_r = r
    excursion = 0.0
    steps = 0
    while r > r_axis_tol:
        steps += 1
        if steps > max_steps:
            trace = ExplorationTrace((r0, z0), points, modes, switches, psi0, 3 * C1 * r0,
                                     drift2, drift1, False, False, excursion, flags + ["max_steps"])
            raise ExplorationError(f"exploration did not reach the axis in {max_steps} steps", trace)
        if mode == "ii":
            r_new = max(r - step, 0.0)
            if dr_abs(r_new, z) >= hi_thr:
                # locate the switching radius on this step
                g = lambda rr: dr_abs(rr, z) - hi_thr
                if g(r) >= 0:
                    r_sw = r
                else:
                    r_sw = optimize.brentq(g, r_new, r, xtol=1e-15 * max(r0, 1e-300))
                if r_sw < r:
                    r = r_sw
                    points.append((r, z))
                    modes.append("ii")
                d_psi = abs(psi.value(r, z) - seg_psi)
                total2 += d_psi
                drift2 = max(drift2, d_psi - hi_thr * (seg_r - r))
                mode = "i"
                switches.append({"to": "i", "r": r, "z": z})
                seg_psi, seg_r = psi.value(r, z), r
                continue
            r = r_new
        else:
            pr, pz = psi.grad(r, z)
            if abs(pr) > 3 * C2 * abs(pz):
                flags.append("slope_guard_violated")
                trace = ExplorationTrace((r0, z0), points, modes, switches, psi0, 3 * C1 * r0,
                                         drift2, drift1, False, False, excursion, flags)
                raise ExplorationError(
                    f"|d_r psi| > 3 C2 |d_z psi| at (r, z) = ({r:.3g}, {z:.3g}): the input violates "
                    "the slope bound", trace)
            target = seg_psi
            h = step / 4
            while True:
                norm = math.hypot(pr, pz)
                s = 1.0 if pz >= 0 else -1.0
                rr = r - s * pz / norm * h
                zz = z + s * pr / norm * h
                for _ in range(8):
                    err = psi.value(rr, zz) - target
                    gr, gz = psi.grad(rr, zz)
                    g2 = gr * gr + gz * gz
                    rr -= err * gr / g2
                    zz -= err * gz / g2
                    if abs(err) <= psi_tol:
                        break
                err = abs(psi.value(rr, zz) - target)
                if (err <= psi_tol and rr < r) or h < 1e-7 * step:
                    break
                h *= 0.5
            rr = max(rr, 0.0)
            drift1 = max(drift1, err)
            r, z = rr, zz
            if dr_abs(r, z) <= lo_thr:
                mode = "ii"
                switches.append({"to": "ii", "r": r, "z": z})
                seg_psi, seg_r = psi.value(r, z), r
                points.append((r, z))
                modes.append("i")
                continue
            if r <= r_axis_tol:
                flags.append("mode_i_axis_arrival")
        excursion = max(excursion, math.hypot(r, z))
        points.append((r, z))
        modes.append(mode)
    if r > 0:
        # finish on the axis at fixed z
        points.append((0.0, z))
        modes.append(mode)
    if mode == "ii":
        d_psi = abs(psi.value(0.0, z) - seg_psi)
        total2 += d_psi
        drift2 = max(drift2, d_psi - hi_thr * seg_r)
    reached = True
    bound = 3 * C1 * r0
    passed = abs(psi0) <= bound
    return ExplorationTrace((r0, z0), points, modes, switches, psi0, bound, max(drift2, 0.0),
                            drift1, bool(passed), reached, excursion, flags, total2)


# ---------------------------------------------------------------------------
# synthetic admissible stream functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BandedStream:
    """``psi(r, z) = G(r) + (z - z_ref) H(r)`` with steep radial bands in ``G'``.

    ``G' = base + sum_j amp_j cos^2(pi (r - c_j) / w_j)`` on ``|r - c_j| < w_j / 2``
    and ``H = K (1 - exp(-(r / s)^2))``; both vanish at ``r = 0``.
    """

    base: float
    bands: tuple
    K: float
    s: float
    z_ref: float = 0.0

    def _gprime(self, r):
        out = np.full_like(np.asarray(r, dtype=float), self.base)
        for c, w, amp in self.bands:
            u = (r - c) / w
            out = out + np.where(np.abs(u) < 0.5, amp * np.cos(np.pi * u) ** 2, 0.0)
        return out

    def _g(self, r):
        r = np.asarray(r, dtype=float)
        out = self.base * r
        for c, w, amp in self.bands:
            # antiderivative of amp cos^2(pi u) on the band, clipped to [c - w/2, r]
            lo = c - w / 2
            x = np.clip(r, lo, c + w / 2) - lo
            u0 = -0.5
            u = u0 + x / w
            out = out + amp * (x / 2 + w / (4 * np.pi) * (np.sin(2 * np.pi * u) - np.sin(2 * np.pi * u0)))
        return out

    def _h(self, r):
        return self.K * (1 - np.exp(-(np.asarray(r) / self.s) ** 2))

    def _hprime(self, r):
        r = np.asarray(r)
        return self.K * 2 * r / self.s**2 * np.exp(-(r / self.s) ** 2)

    def value(self, r, z):
        g = self.base * r
        for c, w, amp in self.bands:
            lo = c - w / 2
            x = min(max(r, lo), c + w / 2) - lo
            g += amp * (x / 2 + w / (4 * math.pi) * math.sin(2 * math.pi * (x / w - 0.5)))
        return g + (z - self.z_ref) * self.K * (1 - math.exp(-(r / self.s) ** 2))

    def grad(self, r, z):
        gp = self.base
        for c, w, amp in self.bands:
            u = (r - c) / w
            if abs(u) < 0.5:
                gp += amp * math.cos(math.pi * u) ** 2
        e = math.exp(-(r / self.s) ** 2)
        return gp + (z - self.z_ref) * self.K * 2 * r / self.s**2 * e, self.K * (1 - e)

    def slope_excess(self, C1, C2, r_max, z_lo, z_hi, n=400):
        """``max (|d_r psi| - C1 - C2 |d_z psi|)`` on a dense lattice (<= 0 means admissible)."""
        R, Z = np.meshgrid(np.linspace(0, r_max, n), np.linspace(z_lo, z_hi, n // 4), indexing="ij")
        pr = self._gprime(R) + (Z - self.z_ref) * self._hprime(R)
        pz = self._h(R)
        return float(np.max(np.abs(pr) - C1 - C2 * np.abs(pz)))


def random_banded_stream(rng: np.random.Generator, C1, C2, r0, z0, reach=None,
                         max_tries=500) -> BandedStream:
    """Random admissible :class:`BandedStream` with steep bands inside ``(0, r0)``.

    Band amplitudes push ``|d_r psi|`` above ``2 C1 + 1`` so the exploration
    has to switch modes; ``K`` is the smallest height (times a margin) keeping
    ``|d_r psi| <= C1 + C2 |d_z psi|`` inside the bands, and the bound is then
    verified on ``[0, 1.2 r0] x [z0 - reach, z0 + reach]`` (default reach ``2 r0``).
    """
    if reach is None:
        reach = 2 * r0
    for _ in range(max_tries):
        base = rng.uniform(-0.5, 0.5) * C1
        n_bands = int(rng.integers(1, 4))
        centres = np.sort(rng.uniform(0.45, 0.9, n_bands)) * r0
        s = rng.uniform(0.3, 0.8) * r0
        bands = []
        need = 0.0
        for c in centres:
            w = rng.uniform(0.04, 0.1) * r0
            # peak |G'| = |base + amp| lands in (2.3 C1, 3.5 C1), above the switch threshold
            amp = rng.uniform(2.3, 3.5) * C1 * rng.choice([-1.0, 1.0]) - base
            bands.append((float(c), float(w), float(amp)))
            h_unit = 1 - math.exp(-(((c - w / 2) / s) ** 2))
            need = max(need, (abs(base) + abs(amp) - C1) / (C2 * h_unit))
        if any(b[0] - a[0] < 0.5 * (a[1] + b[1]) for a, b in zip(bands, bands[1:])):
            continue  # overlapping bands of opposite sign can cancel
        K = need * rng.uniform(1.1, 1.4)
        cand = BandedStream(float(base), tuple(bands), float(K), float(s), float(z0))
        if cand.slope_excess(C1, C2, 1.2 * r0, z0 - reach, z0 + reach) <= 0:
            return cand
    raise RuntimeError("could not draw an admissible stream function")
