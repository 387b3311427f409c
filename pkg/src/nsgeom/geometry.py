"""
Geometry of the vorticity direction field.

Directions live on the unit sphere and are only meaningful up to sign for
the cone conditions, so most routines work with lines through the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from . import fields as F
from .errors import FieldError

BRUTE_FORCE_LIMIT = 5000
_CHUNK = 2048


@dataclass(frozen=True)
class DirectionSample:
    position: np.ndarray
    direction: np.ndarray
    magnitude: float


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Unit vorticity directions at the nodes where ``|omega| > M``.

    Stored as arrays: ``positions`` (n, 3), ``directions`` (n, 3) and
    ``magnitudes`` (n,).  ``box`` holds the periodic box lengths (or ``None``).
    """

    positions: np.ndarray
    directions: np.ndarray
    magnitudes: np.ndarray
    threshold: float = 0.0
    region: F.CylinderRegion | None = None
    box: tuple | None = None
    times: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        d = np.asarray(self.directions, dtype=float).reshape(-1, 3)
        mag = np.asarray(self.magnitudes, dtype=float).reshape(-1)
        if not (len(pos) == len(d) == len(mag)):
            raise ValueError("positions, directions and magnitudes differ in length")
        if len(d) and np.max(np.abs(np.linalg.norm(d, axis=1) - 1.0)) > 1e-12:
            raise ValueError("directions must be unit vectors")
        if np.any(mag < 0):
            raise ValueError("magnitudes must be nonnegative")
        for name, arr in (("positions", pos), ("directions", d), ("magnitudes", mag)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def from_directions(cls, directions, positions=None, magnitudes=None, box=None):
        """Build a set from raw (not necessarily normalised) direction vectors."""
        d = np.asarray(directions, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(d, axis=1)
        if np.any(norms == 0):
            raise ValueError("zero direction vector")
        d = d / norms[:, None]
        if positions is None:
            positions = np.zeros_like(d)
        if magnitudes is None:
            magnitudes = np.ones(len(d))
        return cls(positions, d, magnitudes, 0.0, None, box)

    def __len__(self):
        return len(self.directions)

    def __getitem__(self, i) -> DirectionSample:
        return DirectionSample(self.positions[i], self.directions[i], float(self.magnitudes[i]))

    @property
    def samples(self):
        return [self[i] for i in range(len(self))]

    def concat(self, other: "DirectionSet") -> "DirectionSet":
        return DirectionSet(np.vstack([self.positions, other.positions]),
                            np.vstack([self.directions, other.directions]),
                            np.concatenate([self.magnitudes, other.magnitudes]),
                            min(self.threshold, other.threshold), self.region, self.box)


@dataclass(frozen=True)
class ConeFit:
    """Best double cone around ``axis``: every direction has ``|xi . axis| >= s``."""

    axis: np.ndarray | None
    s: float
    delta: float
    C: float
    index: int | None
    n_samples: int
    lattice_size: int = 0

    @property
    def empty(self):
        return self.n_samples == 0

    def to_dict(self):
        return {"axis": None if self.axis is None else [float(a) for a in self.axis],
                "s": self.s, "delta": self.delta,
                "C": None if math.isinf(self.C) else self.C,
                "C_infinite": math.isinf(self.C),
                "index": self.index, "n_samples": self.n_samples}


def delta_from_s(s):
    return 1.0 - math.sqrt(max(0.0, 1.0 - s * s))


def s_from_delta(delta):
    return math.sqrt(max(0.0, 2 * delta - delta * delta))


def cone_constant(delta):
    """``C = (1 - delta) / sqrt(2 delta - delta^2)``, infinite at ``delta = 0``."""
    if delta <= 0:
        return math.inf
    return (1.0 - delta) / math.sqrt(2 * delta - delta * delta)


# ---------------------------------------------------------------------------
# direction sets
# ---------------------------------------------------------------------------

def _region_mask(grid, region: F.CylinderRegion | None):
    if region is None:
        return np.ones(grid.shape, dtype=bool)
    region.check_fits(grid)
    x = np.stack(grid.mesh(), axis=-1)
    d = F.periodic_difference(x, np.asarray(region.center), grid.L)
    if region.shape == "ball":
        return np.sum(d * d, axis=-1) < region.r**2
    return (d[..., 0] ** 2 + d[..., 1] ** 2 < region.r**2) & (np.abs(d[..., 2]) < region.r)


def direction_field(w: F.VectorField, M: float, region: F.CylinderRegion | None = None) -> DirectionSet:
    """Sample ``xi = omega / |omega|`` at every node (inside ``region``) with ``|omega| > M``."""
    if M < 0:
        raise ValueError(f"threshold must be nonnegative, got {M}")
    mag = w.magnitude()
    keep = (mag > M) & (mag > 0) & _region_mask(w.grid, region)
    x = np.stack(w.grid.mesh(), axis=-1)[keep]
    comps = np.moveaxis(w.components, 0, -1)[keep]
    m = mag[keep]
    return DirectionSet(x, comps / m[:, None], m, float(M), region, tuple(w.grid.L),
                        np.full(len(m), w.time))


def fibonacci_hemisphere(n):
    """``n`` nearly uniform unit vectors with ``z >= 0`` (one per line through 0)."""
    i = np.arange(n) + 0.5
    z = 1.0 - i / n
    phi = np.pi * (3.0 - math.sqrt(5.0)) * i
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def worst_alignment(directions, axes):
    """``min_i |xi_i . e|`` for each axis ``e`` (rows of ``axes``) and the argmin."""
    directions = np.asarray(directions, dtype=float)
    axes = np.atleast_2d(axes)
    best = np.full(len(axes), np.inf)
    arg = np.zeros(len(axes), dtype=int)
    for lo in range(0, len(directions), _CHUNK):
        dots = np.abs(directions[lo:lo + _CHUNK] @ axes.T)
        j = np.argmin(dots, axis=0)
        v = dots[j, np.arange(len(axes))]
        better = v < best
        best[better] = v[better]
        arg[better] = j[better] + lo
    return best, arg


def lattice_maximum(directions, axes, seed=0):
    """Exact ``max_e min_i |xi_i . e|`` over the rows of ``axes`` and its per-axis values.

    Axes are scanned against a fixed random permutation of the samples in
    chunks, and an axis is dropped as soon as its running minimum falls to or
    below the best fully evaluated axis, so the returned maximum is exact while
    the per-axis values are only upper bounds for dropped axes.
    """
    n = len(directions)
    if n <= 4 * _CHUNK:
        s, _ = worst_alignment(directions, axes)
        return s
    perm = np.random.default_rng(seed).permutation(n)
    d = directions[perm]
    bound, _ = worst_alignment(d[:_CHUNK], axes)
    first = int(np.argmax(bound))
    best = float(worst_alignment(d, axes[first:first + 1])[0][0])
    running = bound.copy()
    running[first] = best
    alive = np.flatnonzero(running > best)
    for lo in range(_CHUNK, n, _CHUNK):
        if alive.size == 0:
            break
        dots = np.min(np.abs(d[lo:lo + _CHUNK] @ axes[alive].T), axis=0)
        running[alive] = np.minimum(running[alive], dots)
        alive = alive[running[alive] > best]
    return running


def _solve_fixed_signs(p, e0):
    s0 = float(np.min(p @ e0))
    x0 = np.concatenate([e0, [s0]])
    cons = [
        {"type": "ineq", "fun": lambda x: p @ x[:3] - x[3],
         "jac": lambda x: np.hstack([p, -np.ones((len(p), 1))])},
        {"type": "ineq", "fun": lambda x: 1.0 - x[:3] @ x[:3],
         "jac": lambda x: np.concatenate([-2 * x[:3], [0.0]])[None, :]},
    ]
    res = optimize.minimize(lambda x: -x[3], x0, jac=lambda x: np.array([0, 0, 0, -1.0]),
                            constraints=cons, method="SLSQP",
                            options={"ftol": 1e-14, "maxiter": 200})
    e = res.x[:3]
    n = np.linalg.norm(e)
    if not np.all(np.isfinite(e)) or n == 0:
        return e0
    return e / n


def _refine(directions, e0, margin=0.05, rounds=6):
    """Solve ``max s`` s.t. ``sigma_i xi_i . e >= s``, ``|e| <= 1`` with the signs
    ``sigma_i`` frozen at ``e0``.

    Only constraints within ``margin`` of the worst one are kept at first;
    violated ones are added back (cutting planes) until the solution is
    feasible for the full set.
    """
    sigma = np.where(directions @ e0 >= 0, 1.0, -1.0)
    p = directions * sigma[:, None]
    along = p @ e0
    active = along <= along.min() + margin
    e = e0
    for _ in range(rounds):
        e = _solve_fixed_signs(p[active], e)
        vals = p @ e
        s_act = vals[active].min()
        violated = (~active) & (vals < s_act - 1e-12)
        if not violated.any():
            break
        active |= vals <= s_act + margin
    return e


def _canonical(e):
    """Representative of the line ``+-e``: first nonzero component positive."""
    for c in e:
        if abs(c) > 1e-12:
            return e if c > 0 else -e
    return e


def cone_deficiency(ds: DirectionSet | np.ndarray, lattice=4000, n_refine=5) -> ConeFit:
    """Axis maximising the worst alignment ``s = min_i |xi_i . e|``.

    A Fibonacci lattice of ``lattice`` axes on the upper hemisphere gives the
    starting points; the best ``n_refine`` are refined by solving the convex
    program obtained by freezing the signs of ``xi_i . e``.
    """
    d = ds.directions if isinstance(ds, DirectionSet) else np.asarray(ds, dtype=float).reshape(-1, 3)
    n = len(d)
    if n == 0:
        return ConeFit(None, 0.0, 0.0, math.inf, None, 0, lattice)
    axes = fibonacci_hemisphere(max(int(lattice), 2000))
    s_lat = lattice_maximum(d, axes)
    order = np.argsort(-s_lat, kind="stable")[:n_refine]
    cands = [axes[i] for i in order]
    cands += [_refine(d, axes[i]) for i in order]
    cands = np.array([_canonical(c / np.linalg.norm(c)) for c in cands])
    s_c, arg = worst_alignment(d, cands)
    best = int(np.argmax(s_c))
    e, s = cands[best], float(min(1.0, s_c[best]))
    delta = delta_from_s(s)
    # |xi x e|^2 + (xi . e)^2 = 1 ties the cone aperture to s
    worst = d[arg[best]]
    cross = np.linalg.norm(np.cross(worst, e))
    assert abs(cross**2 + (worst @ e) ** 2 - 1.0) < 1e-9
    return ConeFit(np.array([float(c) for c in e]), s, delta, cone_constant(delta),
                   int(arg[best]), n, len(axes))


@dataclass(frozen=True)
class ObstructionResult:
    obstructed: bool
    pole: np.ndarray | None
    gap: float
    fit: ConeFit

    def to_dict(self):
        return {"obstructed": self.obstructed,
                "pole": None if self.pole is None else [float(c) for c in self.pole],
                "gap": self.gap}


def great_circle_obstruction(ds: DirectionSet, tol=1e-2, fit: ConeFit | None = None) -> ObstructionResult:
    """Decide whether the directions meet every great circle.

    If the best cone has ``s > tol`` the great circle orthogonal to its axis is
    avoided by a margin ``s``; otherwise the set is reported as obstructed.
    """
    if fit is None:
        fit = cone_deficiency(ds)
    if fit.empty:
        raise FieldError("no directions above threshold")
    if fit.s > tol:
        return ObstructionResult(False, fit.axis, fit.s, fit)
    return ObstructionResult(True, None, fit.s, fit)


# ---------------------------------------------------------------------------
# pairwise quantities
# ---------------------------------------------------------------------------

def cross_norm(a, b):
    """``|a x b|`` row-wise with broadcasting."""
    c = np.cross(a, b)
    return np.sqrt(np.sum(c * c, axis=-1))


def _brute_pairwise(d):
    best, pair = 0.0, None
    for lo in range(0, len(d), 512):
        block = cross_norm(d[lo:lo + 512, None, :], d[None, :, :])
        j = np.unravel_index(np.argmax(block), block.shape)
        if block[j] > best or pair is None:
            best, pair = float(block[j]), (int(j[0] + lo), int(j[1]))
    return best, pair


def _cell_structure(d, n_cells):
    centers = fibonacci_hemisphere(n_cells)
    # lines: fold every direction to the hemisphere of its nearest center
    dots = d @ centers.T
    cell = np.argmax(np.abs(dots), axis=1)
    sign = np.sign(dots[np.arange(len(d)), cell])
    sign[sign == 0] = 1.0
    folded = d * sign[:, None]
    ang = np.arccos(np.clip(np.sum(folded * centers[cell], axis=1), -1, 1))
    radius = np.zeros(n_cells)
    np.maximum.at(radius, cell, ang)
    members = [np.flatnonzero(cell == c) for c in range(n_cells)]
    return centers, radius, members


def _fast_pairwise(d, n_cells=256):
    """Exact maximum of ``|xi_i x xi_j|`` by branch and bound over spherical cells.

    For two cells with centre angle ``theta`` and radii ``r1, r2`` every pair
    makes a line angle in ``[theta - r1 - r2, theta + r1 + r2]``, which bounds
    ``sin`` from above; cell pairs are visited in decreasing bound order.
    """
    centers, radius, members = _cell_structure(d, n_cells)
    live = [c for c in range(n_cells) if len(members[c])]
    cosang = np.clip(np.abs(centers[live] @ centers[live].T), 0, 1)
    theta = np.arccos(cosang)
    slack = radius[live][:, None] + radius[live][None, :]
    lo_ang = theta - slack
    hi_ang = theta + slack
    upper = np.where((lo_ang <= np.pi / 2) & (hi_ang >= np.pi / 2), 1.0,
                     np.sin(np.clip(np.minimum(hi_ang, np.pi - lo_ang), 0, np.pi / 2)))
    iu = np.triu_indices(len(live))
    order = np.argsort(-upper[iu], kind="stable")
    best, pair = 0.0, (0, 0)
    for k in order:
        a, b = iu[0][k], iu[1][k]
        if upper[a, b] < best:
            break
        ia, ib = members[live[a]], members[live[b]]
        block = cross_norm(d[ia][:, None, :], d[ib][None, :, :])
        j = np.unravel_index(np.argmax(block), block.shape)
        if block[j] > best:
            best, pair = float(block[j]), (int(ia[j[0]]), int(ib[j[1]]))
    return best, pair


def pairwise_alignment(ds: DirectionSet | np.ndarray, return_pair=False):
    """``max_{i,j} |xi_i x xi_j|``; 0 for fewer than two samples."""
    d = ds.directions if isinstance(ds, DirectionSet) else np.asarray(ds, dtype=float).reshape(-1, 3)
    if len(d) < 2:
        return (0.0, None) if return_pair else 0.0
    if len(d) <= BRUTE_FORCE_LIMIT:
        best, pair = _brute_pairwise(d)
    else:
        best, pair = _fast_pairwise(d)
    return (best, pair) if return_pair else best


@dataclass(frozen=True)
class HolderResult:
    C: float
    alpha: float
    pair: tuple | None

    def to_dict(self):
        return {"C": None if math.isinf(self.C) else self.C, "C_infinite": math.isinf(self.C),
                "alpha": self.alpha, "pair": None if self.pair is None else list(self.pair)}


def holder_modulus(ds: DirectionSet, alpha=1.0) -> HolderResult:
    """Smallest ``C`` with ``|xi_i x xi_j| <= C |x_i - x_j|^alpha`` over all pairs.

    Distances use the minimal-image metric when the set carries a box.
    Coincident positions with distinct directions give ``C = inf``.
    """
    if alpha not in (1, 1.0, 0.5):
        raise ValueError("alpha must be 1 or 1/2")
    n = len(ds)
    if n < 2:
        return HolderResult(0.0, float(alpha), None)
    x, d = ds.positions, ds.directions
    best, pair = 0.0, None
    for lo in range(0, n, 512):
        diff = x[lo:lo + 512, None, :] - x[None, :, :]
        if ds.box is not None:
            L = np.asarray(ds.box, dtype=float)
            diff = diff - L * np.round(diff / L)
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        cr = cross_norm(d[lo:lo + 512, None, :], d[None, :, :])
        rows = np.arange(min(512, n - lo))
        cr[rows, rows + lo] = 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(cr > 0, cr / dist**alpha, 0.0)
        j = np.unravel_index(np.argmax(ratio), ratio.shape)
        if ratio[j] > best:
            best, pair = float(ratio[j]), (int(j[0] + lo), int(j[1]))
    return HolderResult(best, float(alpha), pair)


# ---------------------------------------------------------------------------
# vortex stretching
# ---------------------------------------------------------------------------

def cf_determinant(a, b, c):
    """``D(a, b, c) = (a . c) det(a, b, c)``, row-wise for stacked vectors."""
    a, b, c = (np.asarray(u, dtype=float) for u in (a, b, c))
    det = np.sum(np.cross(a, b) * c, axis=-1)
    return np.sum(a * c, axis=-1) * det


def _smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)

    def bump(s):
        return np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
    a, b = bump(1.0 - t), bump(t)
    return a / (a + b)


@dataclass(frozen=True)
class StretchingResult:
    value: float
    raw: tuple
    rho_cut: float
    window: float
    direct: float

    @property
    def rel_diff(self):
        return abs(self.value - self.direct) / max(abs(self.direct), 1e-300)

    def to_dict(self):
        return {"value": self.value, "raw": list(self.raw), "rho_cut": self.rho_cut,
                "window": self.window, "direct": self.direct, "rel_diff": self.rel_diff}


class _Interpolant:
    """Quintic periodic spline of the three vorticity components."""

    def __init__(self, w: F.VectorField):
        self.h = np.asarray(w.grid.spacing)
        self.coeffs = [ndimage.spline_filter(w.components[i], order=5, mode="grid-wrap")
                       for i in range(3)]

    def __call__(self, pts):
        idx = pts / self.h[:, None]
        return np.stack([ndimage.map_coordinates(c, idx, order=5, mode="grid-wrap", prefilter=False)
                         for c in self.coeffs])


def _pv_shells(omega_at, x, xi, rho, R, n_r, n_theta, n_phi):
    """Integral of the kernel over ``rho < |y| < R`` with a smooth taper on ``(R/2, R)``."""
    u, wu = np.polynomial.legendre.leggauss(n_r)
    lo, hi = math.log(rho), math.log(R)
    radii = np.exp(lo + (hi - lo) * (u + 1) / 2)
    wr = wu * (hi - lo) / 2
    c, wc = np.polynomial.legendre.leggauss(n_theta)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    C, P = np.meshgrid(c, phi, indexing="ij")
    S = np.sqrt(1 - C * C)
    yhat = np.stack([S * np.cos(P), S * np.sin(P), C]).reshape(3, -1)
    wang = np.outer(wc, np.full(n_phi, 2 * np.pi / n_phi)).ravel()
    along = xi @ yhat
    total = 0.0
    for r, w in zip(radii, wr):
        taper = float(_smooth_step((r - R / 2) / (R / 2)))
        if taper == 0.0:
            continue
        om = omega_at(x[:, None] + r * yhat)
        det = np.sum(np.cross(yhat.T, om.T) * xi, axis=1)
        # dy / |y|^3 = d(log r) dOmega
        total += w * taper * float(np.dot(wang, along * det))
    return 3.0 / (4.0 * np.pi) * total


def stretching_factor(w: F.VectorField, x, rho_cut=None, window=None, n_r=64, n_theta=32,
                      n_phi=64, details=False):
    """Stretching factor ``xi . grad v . xi`` at ``x`` from the principal-value integral.

    The ball ``|y| < rho_cut`` is excluded; the periodic vorticity is integrated
    over ``|y| < window`` (default: the shortest box length) with a smooth
    taper on the outer half, and the results for ``rho_cut`` and ``2 rho_cut``
    are Richardson-extrapolated (the excluded core contributes ``O(rho^2)``).
    With ``details=True`` a :class:`StretchingResult` carrying the direct
    spectral value ``xi^T (grad v) xi`` is returned instead of a float.
    """
    grid = w.grid
    x = np.asarray(x, dtype=float)
    h = max(grid.spacing)
    if rho_cut is None:
        rho_cut = 4 * h
    if rho_cut <= h:
        raise ValueError("rho_cut must exceed the grid spacing")
    if window is None:
        window = min(grid.L)
    if window <= 4 * rho_cut:
        raise ValueError("window must be much larger than rho_cut")
    interp = _Interpolant(w)
    w0 = interp(x[:, None])[:, 0]
    mag = float(np.linalg.norm(w0))
    if mag <= 1e-12 * max(w.max_abs(), 1e-300):
        raise FieldError("vorticity vanishes at the evaluation point; direction undefined")
    xi = w0 / mag
    i1 = _pv_shells(interp, x, xi, rho_cut, window, n_r, n_theta, n_phi)
    i2 = _pv_shells(interp, x, xi, 2 * rho_cut, window, n_r, n_theta, n_phi)
    value = float((4 * i1 - i2) / 3)
    if not details:
        return value
    return StretchingResult(value, (float(i1), float(i2)), float(rho_cut), float(window), direct_stretching(w, x))


def direct_stretching(w: F.VectorField, x):
    """``xi^T (grad v) xi`` at ``x`` with ``v`` the Biot-Savart velocity of ``w``."""
    from .evaluate import SpectralFrame

    v = F.biot_savart(w)
    frame = SpectralFrame(v)
    x = np.asarray(x, dtype=float)
    s = frame.sample("v", x[2], [x[0]], [x[1]])
    G = s.gradient_tensor()[:, :, 0]
    om = frame.sample("omega", x[2], [x[0]], [x[1]]).vector()[:, 0]
    xi = om / np.linalg.norm(om)
    return float(xi @ G @ xi)
