"""Cone-valued harmonic maps on grids: a numerical laboratory for nematic
line fields in the cone over RP^2 (and over S^2 for contrast)."""

from .cone import ConeParams, InvalidInputError, Potential, TargetMode, align_sign, edge_sq_distance, embed
from .grid import GridDomain, LineFieldState, ball_domain, box_domain, cylinder_domain, sample_field
from .energy import (energy_and_gradient, energy_gradient, radial_variation_residual,
                     stationarity_residual, total_energy)
from .solver import InitMode, SolveReport, SolverOptions, coarse_to_fine, harmonic_fill, minimize
from .frequency import (FrequencyProfile, blowup_rescale, check_doubling, check_frequency_monotone,
                        frequency_profile, frequency_quantities, homogeneity_defect)
from .oracle import Homogeneous2DMinimizer, el_residual, eval_2d, hopf_differential, lift_cylinder
from .defects import (DefectGraph, LoopSpec, circle_loop, classify_components, extract_zero_set,
                      loop_class, reifenberg_flatness, sphere_crossing_parity)
from .config import ExperimentConfig, parse_config, serialize_config
from .fileio import load_field, save_field

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
