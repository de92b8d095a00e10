"""Finite-channel scattering laboratory for the Hodge Laplacian on fibered-cusp models."""
from .branchcut import SpectralPoint, deck_flip, lambda_of_s, s_of_lambda, sqrt_plus
from .bundle import BundleData, Channel, channels_for_degree, kunneth_table, star_map, total_cohomology
from .cavity import CompactModel, dtn, interior_field
from .config import Numerics
from .errors import (BranchError, ConvergenceError, CuspidalError, InvariantViolation,
                     PoleProximity, ScenarioError)
from .scatter import Scenario, assemble, dualize, derivative_partner, t_derivative

__version__ = "0.1.0"
