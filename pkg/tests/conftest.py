import numpy as np
import pytest

from nsgeom import fields as F
from nsgeom.analytic import AnalyticField

_ACCEPTANCE = []


def record_criterion(number, name, passed, detail=""):
    _ACCEPTANCE.append((number, name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {name}  {detail}")


@pytest.fixture(scope="session")
def grid16():
    return F.GridSpec.cube(16)


@pytest.fixture(scope="session")
def grid32():
    return F.GridSpec.cube(32)


@pytest.fixture(scope="session")
def abc():
    return AnalyticField.abc()


def band_limited(grid, seed, kmax=3.0, solenoidal=True):
    """Random real field with Fourier support in ``0 < |k| <= kmax``."""
    rng = np.random.default_rng(seed)
    K = np.meshgrid(*grid.wavenumbers(), indexing="ij")
    kk = np.sqrt(sum(k * k for k in K))
    band = (kk > 0) & (kk <= kmax)
    coef = rng.standard_normal((3,) + grid.shape) + 1j * rng.standard_normal((3,) + grid.shape)
    raw = np.real(F.ifftn(coef * band))
    v = F.VectorField(grid, raw / np.abs(raw).max(), 0.0)
    return F.leray_project(v) if solenoidal else v


class FunctionFrame:
    """Frame-like wrapper over a closed-form velocity ``f(x1, x2, z) -> (v1, v2, v3)``.

    Only values are supported, which is all the cylindrical decomposition needs.
    """

    def __init__(self, fn):
        self.fn = fn

    def sample(self, kind, z, x1, x2):
        vals = self.fn(np.asarray(x1), np.asarray(x2), z)

        class _S:
            def d(self_, comp=0, alpha=(0, 0, 0)):
                if tuple(alpha) != (0, 0, 0):
                    raise ValueError("values only")
                return np.broadcast_to(vals[comp], np.shape(x1)).astype(float)
        return _S()
