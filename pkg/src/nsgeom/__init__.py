"""Vorticity-geometry diagnostics for periodic incompressible flows."""

__version__ = "0.1.0"

from .errors import (CFLError, CompatibilityError, CoverageError, ExplorationError, FieldError,
                     NotAxisymmetricError, NSGeomError, ProbeRegionError, SnapshotFormatError)
from .fields import (CylinderRegion, DiscSpec, GridSpec, ScalarField, VectorField, biot_savart,
                     curl, divergence, gradient, gradient_tensor, laplacian, leray_project,
                     pressure_from_velocity, rescale, sample)
from .analytic import AnalyticField
from .evaluate import Flow, as_flow
from .snapio import read_series, read_snapshot, write_snapshot
from .solver import SolverConfig, SolverState, simulate, step
from .geometry import (DirectionSet, cone_deficiency, direction_field, great_circle_obstruction,
                       holder_modulus, pairwise_alignment, stretching_factor)
from .flux import (disc_flux, divfree_defect, flipped_vorticity, flux_balance, flux_profile,
                   gamma_decay_profile, gamma_inequality_audit, w_profile)
from .criticality import (critical_flux_norm, g_energy, lambda_q, local_energy_residual,
                          regular_shell_search, scale_quantities, type_i_scan)
from .axisym import (explore_level_set, stream_function, swirl, to_cylindrical,
                     velocity_cone_check)
