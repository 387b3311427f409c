"""Exception hierarchy shared by all modules."""


class NSGeomError(Exception):
    """Base class for toolkit errors."""


class FieldError(NSGeomError, ValueError):
    """Malformed or non-finite field data."""


class ProbeRegionError(NSGeomError, ValueError):
    """A probe region does not fit in the sampled data."""


class CoverageError(NSGeomError, ValueError):
    """Requested evaluation lies outside the available snapshots."""


class CFLError(NSGeomError, RuntimeError):
    """Time step violates the configured CFL limit."""


class SnapshotFormatError(NSGeomError, ValueError):
    """A VXS1 file is corrupt or inconsistent."""


class NotAxisymmetricError(NSGeomError, ValueError):
    """Field varies with the angular coordinate beyond tolerance."""

    def __init__(self, deviation, tol):
        super().__init__(f"angular deviation {deviation:.3e} exceeds tolerance {tol:.3e}")
        self.deviation = deviation
        self.tol = tol


class CompatibilityError(NSGeomError, ValueError):
    """Meridional velocity is not compatible with a single-valued stream function."""

    def __init__(self, residual, tol):
        super().__init__(f"stream function compatibility residual {residual:.3e} > {tol:.3e}")
        self.residual = residual
        self.tol = tol


class ExplorationError(NSGeomError, RuntimeError):
    """Level-set exploration could not complete; carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
