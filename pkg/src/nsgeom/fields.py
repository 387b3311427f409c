"""
Sampled fields on a uniform periodic grid and their spectral calculus.

Grid nodes sit at ``x_i = j * L_i / n_i`` for ``j = 0 .. n_i - 1``; arrays are
indexed ``[i1, i2, i3]`` (x1 is axis 0).  All derivatives are computed with FFTs
and the Nyquist modes are dropped from odd-order multipliers so that real
fields stay real.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .errors import FieldError, ProbeRegionError

TWO_PI = 2.0 * np.pi
_AXES = (-3, -2, -1)


def fftn(a):
    return sfft.fftn(a, axes=_AXES)


def ifftn(a):
    return sfft.ifftn(a, axes=_AXES)


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``n`` points and box lengths ``L`` per axis."""

    n: tuple[int, int, int]
    L: tuple[float, float, float] = (TWO_PI, TWO_PI, TWO_PI)
    periodic: bool = True

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        L = tuple(float(v) for v in self.L)
        if len(n) != 3 or len(L) != 3:
            raise FieldError("GridSpec needs three sizes and three lengths")
        for ni in n:
            if ni < 4 or ni % 2:
                raise FieldError(f"grid size {ni} must be even and >= 4")
        for Li in L:
            if not (Li > 0 and np.isfinite(Li)):
                raise FieldError(f"box length {Li} must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", L)

    @classmethod
    def cube(cls, n: int, L: float = TWO_PI) -> "GridSpec":
        return cls((n, n, n), (L, L, L))

    @property
    def shape(self):
        return self.n

    @property
    def size(self):
        return self.n[0] * self.n[1] * self.n[2]

    @property
    def spacing(self):
        return tuple(Li / ni for Li, ni in zip(self.L, self.n))

    @property
    def volume(self):
        return self.L[0] * self.L[1] * self.L[2]

    @property
    def cell_volume(self):
        return self.volume / self.size

    def coords(self):
        return tuple(np.arange(ni) * (Li / ni) for ni, Li in zip(self.n, self.L))

    def mesh(self):
        return np.meshgrid(*self.coords(), indexing="ij")

    def wavenumbers(self, drop_nyquist=False):
        """Angular wavenumbers per axis, shaped to broadcast over the grid."""
        ks = []
        for axis, (ni, Li) in enumerate(zip(self.n, self.L)):
            k = sfft.fftfreq(ni, d=1.0 / ni) * (TWO_PI / Li)
            if drop_nyquist:
                k[ni // 2] = 0.0
            shape = [1, 1, 1]
            shape[axis] = ni
            ks.append(k.reshape(shape))
        return ks

    def nyquist_mask(self):
        """True on every mode that carries a Nyquist index on some axis."""
        mask = np.zeros(self.n, dtype=bool)
        mask[self.n[0] // 2, :, :] = True
        mask[:, self.n[1] // 2, :] = True
        mask[:, :, self.n[2] // 2] = True
        return mask

    def max_probe_radius(self):
        return min(self.L) / 4.0

    def to_header(self):
        return {"n1": self.n[0], "n2": self.n[1], "n3": self.n[2],
                "L1": self.L[0], "L2": self.L[1], "L3": self.L[2]}


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.grid.shape:
            raise FieldError(f"scalar values shape {v.shape} != grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise FieldError("scalar field contains non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "time", float(self.time))

    def max_abs(self):
        return float(np.max(np.abs(self.values)))

    def mean(self):
        return float(np.mean(self.values))


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: GridSpec
    components: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = _frozen(self.components)
        if c.shape != (3,) + self.grid.shape:
            raise FieldError(f"vector components shape {c.shape} != (3,)+{self.grid.shape}")
        if not np.all(np.isfinite(c)):
            raise FieldError("vector field contains non-finite values")
        object.__setattr__(self, "components", c)
        object.__setattr__(self, "time", float(self.time))

    def __getitem__(self, i):
        return self.components[i]

    def component(self, i) -> ScalarField:
        return ScalarField(self.grid, self.components[i], self.time)

    def magnitude(self):
        return np.sqrt(np.sum(self.components**2, axis=0))

    def max_abs(self):
        return float(np.max(self.magnitude()))

    def energy(self):
        """Kinetic energy ``(1/2) * integral |v|^2`` over the box."""
        return 0.5 * float(np.sum(self.components**2)) * self.grid.cell_volume

    def with_time(self, t):
        return VectorField(self.grid, self.components, t)


@dataclass(frozen=True)
class CylinderRegion:
    """Parabolic probe ``Q(r; x0, t0)``: a ball (``shape='ball'``) or an
    axis-aligned cylinder ``|x_h| < r, |x_3| < r`` (``shape='cylinder'``),
    times ``(t0 - r^2, t0)``."""

    r: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    t0: float = 0.0
    shape: str = "ball"

    def __post_init__(self):
        if not self.r > 0:
            raise ProbeRegionError(f"probe radius must be positive, got {self.r}")
        if self.shape not in ("ball", "cylinder"):
            raise ProbeRegionError(f"unknown probe shape {self.shape!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def check_fits(self, grid: GridSpec | None):
        if grid is None:
            return
        rmax = grid.max_probe_radius()
        if self.r > rmax * (1 + 1e-12):
            raise ProbeRegionError(
                f"probe radius {self.r} exceeds the safe limit {rmax:.4f} (min box length / 4)")

    @property
    def t_window(self):
        return (self.t0 - self.r**2, self.t0)


@dataclass(frozen=True)
class DiscSpec:
    """Horizontal disc ``{|x_h - c_h| < r, x_3 = z}`` at time ``t``."""

    r: float
    z: float = 0.0
    t: float = 0.0
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.r < 0:
            raise ProbeRegionError(f"disc radius must be nonnegative, got {self.r}")


def check_disc_fits(r, grid):
    if grid is not None and r > grid.max_probe_radius() * (1 + 1e-12):
        raise ProbeRegionError(
            f"disc radius {r} exceeds the safe limit {grid.max_probe_radius():.4f}")


# ---------------------------------------------------------------------------
# spectral calculus
# ---------------------------------------------------------------------------

def _ik(grid):
    return [1j * k for k in grid.wavenumbers(drop_nyquist=True)]


def _check_finite(a, what):
    if not np.all(np.isfinite(a)):
        raise FieldError(f"{what} contains non-finite values")


def spectral_derivative(values, grid: GridSpec, order: Sequence[int]):
    """Mixed partial derivative ``d^a1 d^a2 d^a3`` of grid samples."""
    _check_finite(values, "input")
    f = fftn(values)
    full = grid.wavenumbers()
    trimmed = grid.wavenumbers(drop_nyquist=True)
    for axis, a in enumerate(order):
        if a:
            k = trimmed[axis] if a % 2 else full[axis]
            f = f * (1j * k) ** a
    return ifftn(f).real


def gradient(s: ScalarField) -> VectorField:
    _check_finite(s.values, "scalar field")
    f = fftn(s.values)
    comps = np.stack([ifftn(ik * f).real for ik in _ik(s.grid)])
    return VectorField(s.grid, comps, s.time)


def gradient_tensor(v: VectorField):
    """Array ``G[i, j] = d_j v_i`` of shape (3, 3, n1, n2, n3)."""
    f = fftn(v.components)
    ik = _ik(v.grid)
    return np.stack([np.stack([ifftn(ik[j] * f[i]).real for j in range(3)]) for i in range(3)])


def curl_hat(f, grid):
    ik = _ik(grid)
    return np.stack([ik[1] * f[2] - ik[2] * f[1],
                     ik[2] * f[0] - ik[0] * f[2],
                     ik[0] * f[1] - ik[1] * f[0]])


def curl(v: VectorField) -> VectorField:
    """Vorticity of a periodic velocity field; every component has zero mean."""
    _check_finite(v.components, "velocity")
    w = ifftn(curl_hat(fftn(v.components), v.grid)).real
    return VectorField(v.grid, w, v.time)


def divergence(v: VectorField) -> ScalarField:
    _check_finite(v.components, "vector field")
    f = fftn(v.components)
    ik = _ik(v.grid)
    return ScalarField(v.grid, ifftn(ik[0] * f[0] + ik[1] * f[1] + ik[2] * f[2]).real, v.time)


def laplacian(values, grid: GridSpec):
    k1, k2, k3 = grid.wavenumbers()
    return ifftn(-(k1**2 + k2**2 + k3**2) * fftn(values)).real


def biot_savart(w: VectorField, mean_tol=1e-12) -> VectorField:
    """Mean-zero, divergence-free velocity whose curl is the solenoidal part of ``w``.

    Solves ``-Lap v = curl w`` spectrally, i.e. ``v_hat = i k x w_hat / |k|^2``.
    """
    _check_finite(w.components, "vorticity")
    scale = max(float(np.max(np.abs(w.components))), 1.0)
    means = np.mean(w.components, axis=(1, 2, 3))
    if np.max(np.abs(means)) > mean_tol * scale:
        raise FieldError(f"vorticity must have zero mean per component, got {means}")
    k1, k2, k3 = w.grid.wavenumbers()
    k2sum = k1**2 + k2**2 + k3**2
    k2sum[0, 0, 0] = 1.0
    vh = curl_hat(fftn(w.components), w.grid) / k2sum
    vh[:, 0, 0, 0] = 0.0
    return VectorField(w.grid, ifftn(vh).real, w.time)


def leray_project(v: VectorField) -> VectorField:
    """Remove the gradient part and the mean of ``v``."""
    f = fftn(v.components)
    return VectorField(v.grid, ifftn(project_hat(f, v.grid)).real, v.time)


def project_hat(f, grid):
    k1, k2, k3 = grid.wavenumbers()
    k2sum = k1**2 + k2**2 + k3**2
    k2sum[0, 0, 0] = 1.0
    kdotf = (k1 * f[0] + k2 * f[1] + k3 * f[2]) / k2sum
    out = np.stack([f[0] - k1 * kdotf, f[1] - k2 * kdotf, f[2] - k3 * kdotf])
    out[:, 0, 0, 0] = 0.0
    return out


def pressure_from_velocity(v: VectorField, dealias=None) -> ScalarField:
    """Mean-zero pressure ``p = -Lap^{-1} div(v . grad v)`` of a divergence-free field."""
    grid = v.grid
    ks = grid.wavenumbers()
    k2sum = ks[0]**2 + ks[1]**2 + ks[2]**2
    k2sum[0, 0, 0] = 1.0
    ph = np.zeros(grid.shape, dtype=complex)
    for i in range(3):
        for j in range(i, 3):
            prod = fftn(v.components[i] * v.components[j])
            if dealias is not None:
                prod = prod * dealias
            factor = 1.0 if i == j else 2.0
            ph -= factor * ks[i] * ks[j] * prod
    ph = ph / k2sum
    ph[0, 0, 0] = 0.0
    return ScalarField(grid, ifftn(ph).real, v.time)


def periodic_difference(a, b, L):
    """Minimal-image difference ``a - b`` per axis (arrays broadcast, last axis = 3)."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    L = np.asarray(L, dtype=float)
    return d - L * np.round(d / L)


def sample(analytic, grid: GridSpec, t: float = 0.0) -> VectorField:
    """Evaluate an analytic velocity field at every grid node."""
    x = np.stack(grid.mesh())
    return VectorField(grid, analytic.velocity(x, t), t)


def rescale(source, lam: float, x0=(0.0, 0.0, 0.0), t0: float = 0.0):
    """Navier-Stokes rescaling ``lam * v(x0 + lam x, t0 + lam^2 t)``.

    Analytic fields rescale exactly into a new analytic field; anything else is
    wrapped as a :class:`~nsgeom.evaluate.Flow` whose frames read the original
    data at the mapped points (vorticity picks up ``lam^2``, pressure ``lam^2``).
    """
    from .analytic import AnalyticField
    from .evaluate import as_flow

    if not lam > 0:
        raise ValueError(f"rescaling factor must be positive, got {lam}")
    if isinstance(source, AnalyticField):
        return source.rescale(lam, x0, t0)
    return as_flow(source).rescale(lam, x0, t0)
