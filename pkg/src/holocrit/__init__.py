"""Expected critical points of random holomorphic sections.

Subpackages are imported lazily by users; the top level re-exports the
most common entry points.
"""
__version__ = "0.1.0"

from .errors import (ConfigurationError, CurvatureError, HolocritError, KernelError,
                     SpanningError, StructuralError)
from .geometry import ChartGeometry, adapt_frame, fubini_study, normalize_coordinates
from .kernels import SU2, FiniteBasis, FSProjective, fd_jet_check, kernel_jets
from .jpd import JPDMatrices, assemble_abc, compute_lambda
from .density import (DensityResult, cp2_exact_number, density_dim1_exact,
                      density_mc_general_theta, density_mc_normalized, exact_cp1_numbers,
                      morse_density_mc)
from .ensemble import find_critical_points_cp1, monte_carlo_counts

__all__ = [
    "ChartGeometry", "ConfigurationError", "CurvatureError", "DensityResult", "FSProjective",
    "FiniteBasis", "HolocritError", "JPDMatrices", "KernelError", "SU2", "SpanningError",
    "StructuralError", "adapt_frame", "assemble_abc", "compute_lambda", "cp2_exact_number",
    "density_dim1_exact", "density_mc_general_theta", "density_mc_normalized",
    "exact_cp1_numbers", "fd_jet_check", "find_critical_points_cp1", "fubini_study",
    "kernel_jets", "monte_carlo_counts", "morse_density_mc", "normalize_coordinates",
]
