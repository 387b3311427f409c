"""
Closed-form velocity fields written as finite sums of Fourier modes

    v(x, t) = Re sum_m c_m exp(i k_m . x - g_m t),

with complex amplitude vectors ``c_m``, real wavevectors ``k_m`` (not
restricted to a lattice) and decay rates ``g_m``.  Every derivative is exact,
the class is closed under curl and under the Navier-Stokes rescaling, and the
pressure ``-Lap^{-1} d_i d_j (v_i v_j)`` is again a finite mode sum.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import FieldError


def _as_points(x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != 3:
        raise ValueError("points must have a leading axis of length 3")
    return x


@dataclass(frozen=True, eq=False)
class ModeSum:
    """Scalar-or-vector mode sum; ``coefficients`` has shape (M, m)."""

    wavevectors: np.ndarray
    coefficients: np.ndarray
    decay: np.ndarray

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.wavevectors, dtype=float)).reshape(-1, 3)
        c = np.asarray(self.coefficients, dtype=complex)
        if k.shape[0] == 0:
            c = c.reshape(0, c.shape[-1] if c.ndim > 1 else 1)
        else:
            c = c.reshape(k.shape[0], -1)
        g = np.broadcast_to(np.asarray(self.decay, dtype=float), (k.shape[0],)).copy()
        object.__setattr__(self, "wavevectors", k)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "decay", g)

    @property
    def n_modes(self):
        return self.wavevectors.shape[0]

    def amplitudes(self, comp, alpha, t):
        """Complex weights of ``d^alpha`` (alpha may carry a 4th time order)."""
        k = self.wavevectors
        w = self.coefficients[:, comp] * np.exp(-self.decay * t)
        for axis in range(3):
            a = alpha[axis] if axis < len(alpha) else 0
            if a:
                w = w * (1j * k[:, axis]) ** a
        if len(alpha) > 3 and alpha[3]:
            w = w * (-self.decay) ** alpha[3]
        return w

    def evaluate(self, comp, alpha, x, t):
        x = _as_points(x)
        if self.n_modes == 0:
            return np.zeros(x.shape[1:])
        phase = np.tensordot(self.wavevectors, x, axes=([1], [0]))
        w = self.amplitudes(comp, alpha, t)
        return np.real(np.tensordot(w, np.exp(1j * phase), axes=([0], [0])))


@dataclass(frozen=True, eq=False)
class AnalyticField:
    """Exact velocity field given as a Fourier mode sum.

    Use the constructors :meth:`abc`, :meth:`taylor_green`,
    :meth:`taylor_green_2d`, :meth:`shear`, :meth:`trig` and :meth:`constant`
    rather than building the arrays by hand.
    """

    modes: ModeSum
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    # -- constructors ---------------------------------------------------
    @classmethod
    def trig(cls, terms, kind="custom", params=None):
        """Field ``sum exp(-g t) (a cos(k.x) + b sin(k.x))`` from ``(k, a, b[, g])`` tuples."""
        ks, cs, gs = [], [], []
        for term in terms:
            k, a, b = term[:3]
            g = term[3] if len(term) > 3 else 0.0
            ks.append(np.asarray(k, dtype=float))
            cs.append(np.asarray(a, dtype=float) - 1j * np.asarray(b, dtype=float))
            gs.append(float(g))
        if not ks:
            return cls(ModeSum(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros(0)), kind, params or {})
        return cls(ModeSum(np.array(ks), np.array(cs), np.array(gs)), kind, dict(params or {}))

    @classmethod
    def abc(cls, A=1.0, B=1.0, C=1.0, k=1.0, viscous=True):
        """Arnold-Beltrami-Childress flow, curl eigenfield with eigenvalue ``k``.

        v = (A sin kz + C cos ky, B sin kx + A cos kz, C sin ky + B cos kx)
        """
        g = k * k if viscous else 0.0
        e1, e2, e3 = np.eye(3)
        terms = [
            (k * e3, A * e2, A * e1, g),
            (k * e2, C * e1, C * e3, g),
            (k * e1, B * e3, B * e2, g),
        ]
        return cls.trig(terms, "abc", {"A": A, "B": B, "C": C, "k": k, "viscous": viscous})

    @classmethod
    def taylor_green(cls, A=1.0, viscous=False):
        """3D Taylor-Green vortex (A sin x cos y cos z, -A cos x sin y cos z, 0)."""
        g = 3.0 if viscous else 0.0
        terms = []
        # sin x cos y cos z = 1/4 sum over sign choices of sin(x +- y +- z)
        for s2 in (1, -1):
            for s3 in (1, -1):
                k = np.array([1.0, s2, s3])
                terms.append((k, np.zeros(3), np.array([A / 4, -A * s2 / 4, 0.0]), g))
        return cls.trig(terms, "taylor_green", {"A": A, "viscous": viscous})

    @classmethod
    def taylor_green_2d(cls, A=1.0, viscous=True):
        """Planar Taylor-Green cell (A sin x cos y, -A cos x sin y, 0); exact with decay e^{-2t}."""
        g = 2.0 if viscous else 0.0
        terms = []
        for s2 in (1, -1):
            k = np.array([1.0, s2, 0.0])
            terms.append((k, np.zeros(3), np.array([A / 2, -A * s2 / 2, 0.0]), g))
        return cls.trig(terms, "taylor_green_2d", {"A": A, "viscous": viscous})

    @classmethod
    def shear(cls, amplitude=1.0, k=1.0, viscous=True):
        """Parallel shear flow (amplitude sin(k x2), 0, 0)."""
        g = k * k if viscous else 0.0
        terms = [((0.0, k, 0.0), np.zeros(3), (amplitude, 0.0, 0.0), g)]
        return cls.trig(terms, "shear", {"amplitude": amplitude, "k": k, "viscous": viscous})

    @classmethod
    def constant(cls, c):
        return cls.trig([((0.0, 0.0, 0.0), c, (0.0, 0.0, 0.0))], "constant", {"c": list(map(float, c))})

    @classmethod
    def zero(cls):
        return cls.trig([], "zero")

    def __add__(self, other):
        m, o = self.modes, other.modes
        modes = ModeSum(np.vstack([m.wavevectors, o.wavevectors]),
                        np.vstack([m.coefficients, o.coefficients]),
                        np.concatenate([m.decay, o.decay]))
        return AnalyticField(modes, "custom", {})

    def scaled(self, a):
        m = self.modes
        return AnalyticField(ModeSum(m.wavevectors, a * m.coefficients, m.decay), self.kind,
                             dict(self.params, scale=a))

    # -- evaluation -----------------------------------------------------
    def velocity(self, x, t=0.0):
        x = _as_points(x)
        return np.stack([self.modes.evaluate(i, (0, 0, 0), x, t) for i in range(3)])

    def derivative(self, comp, alpha, x, t=0.0):
        return self.modes.evaluate(comp, alpha, x, t)

    def gradient(self, x, t=0.0):
        """``G[i, j] = d_j v_i`` at the points ``x``."""
        x = _as_points(x)
        eye = np.eye(3, dtype=int)
        return np.stack([np.stack([self.modes.evaluate(i, tuple(eye[j]), x, t) for j in range(3)])
                         for i in range(3)])

    def divergence(self, x, t=0.0):
        g = self.gradient(x, t)
        return g[0, 0] + g[1, 1] + g[2, 2]

    def is_solenoidal(self, tol=1e-12):
        k, c = self.modes.wavevectors, self.modes.coefficients
        if len(k) == 0:
            return True
        return bool(np.max(np.abs(np.sum(k * c, axis=1))) <= tol * max(1.0, np.max(np.abs(c))))

    @cached_property
    def vorticity_field(self) -> "AnalyticField":
        """Exact curl as another :class:`AnalyticField`."""
        m = self.modes
        c = 1j * np.cross(m.wavevectors, m.coefficients) if m.n_modes else m.coefficients
        return AnalyticField(ModeSum(m.wavevectors, c, m.decay), "curl", {"of": self.kind})

    def curl(self) -> "AnalyticField":
        return self.vorticity_field

    def vorticity(self, x, t=0.0):
        return self.vorticity_field.velocity(x, t)

    @cached_property
    def pressure_field(self) -> ModeSum:
        """Scalar mode sum for ``p = -Lap^{-1} d_i d_j (v_i v_j)``; K = 0 products drop out."""
        m = self.modes
        M = m.n_modes
        if M == 0:
            return ModeSum(np.zeros((0, 3)), np.zeros((0, 1)), np.zeros(0))
        k, c, g = m.wavevectors, m.coefficients, m.decay
        # v_i v_j = (1/2) Re sum_{m,n} [c_mi c_nj e^{i(k_m+k_n).x} + c_mi conj(c_nj) e^{i(k_m-k_n).x}]
        Ks, As, Gs = [], [], []
        for sign, cn in ((1.0, c), (-1.0, np.conj(c))):
            K = k[:, None, :] + sign * k[None, :, :]
            A = 0.5 * c[:, None, :, None] * cn[None, :, None, :]
            KAK = np.einsum("mni,mnij,mnj->mn", K, A, K)
            K2 = np.sum(K * K, axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                coef = np.where(K2 > 1e-28, -KAK / np.where(K2 > 1e-28, K2, 1.0), 0.0)
            Ks.append(K.reshape(-1, 3))
            As.append(coef.reshape(-1))
            Gs.append((g[:, None] + g[None, :]).reshape(-1))
        K = np.vstack(Ks)
        A = np.concatenate(As)
        G = np.concatenate(Gs)
        keep = np.abs(A) > 0
        return ModeSum(K[keep], A[keep][:, None], G[keep])

    def pressure(self, x, t=0.0):
        return self.pressure_field.evaluate(0, (0, 0, 0), x, t)

    # -- transformations ------------------------------------------------
    def rescale(self, lam, x0=(0.0, 0.0, 0.0), t0=0.0) -> "AnalyticField":
        """Exact ``lam * v(x0 + lam x, t0 + lam^2 t)``."""
        if not lam > 0:
            raise ValueError(f"rescaling factor must be positive, got {lam}")
        m = self.modes
        x0 = np.asarray(x0, dtype=float)
        shift = np.exp(1j * (m.wavevectors @ x0) - m.decay * t0)
        modes = ModeSum(lam * m.wavevectors, lam * m.coefficients * shift[:, None],
                        lam * lam * m.decay)
        params = dict(self.params)
        params["rescaled"] = params.get("rescaled", []) + [[float(lam), list(map(float, x0)), float(t0)]]
        return AnalyticField(modes, self.kind, params)

    def sample(self, grid, t=0.0):
        from .fields import sample
        return sample(self, grid, t)

    def check_periodic(self, grid):
        """Raise unless every wavevector lives on the grid's reciprocal lattice."""
        k = self.modes.wavevectors
        for axis in range(3):
            m = k[:, axis] * grid.L[axis] / (2 * np.pi)
            if np.any(np.abs(m - np.round(m)) > 1e-9):
                raise FieldError("analytic field is not periodic on this grid")
