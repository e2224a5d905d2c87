"""Urban surface reconstruction from multi-baseline SAR tomography.

Synthetic stack simulation, spectral and l1 tomographic inversion, min-cut
surface segmentation and the alternating REDRESS scheme.
"""
from .estimators import (beamforming_profile, capon_profile, estimate_covariance,
                         music_profile, spectral_volume)
from .evaluation import SurfaceErrorReport, beta_sweep, error_report, mean_error
from .forward import (Box, ReflectivityVolume, SARStack, SceneSpec, adjoint_phi, apply_phi,
                      make_scene, simulate_stack)
from .geometry import (AcquisitionGeometry, GroundGrid, RadarGrid, radar_cell_of,
                       radar_grid_covering, resample_to_rays, slant_range, spatial_frequency,
                       steering_vector)
from .maxflow import INF, CutResult, FlowNetwork, max_flow
from .redress import RedressParams, distance_to_surface, mu_map, redress
from .segmentation import (build_graph, cumulative_profiles, data_penalty, extract_surface,
                           segment_surface, shadow_mask, surface_energy)
from .sparse import (DivergenceError, SolverParams, invert_cs_per_cell, invert_l1_3d,
                     kkt_residual, operator_norm_sq, soft_threshold)
from .surface import ElevationMap

__version__ = "0.1.0"
