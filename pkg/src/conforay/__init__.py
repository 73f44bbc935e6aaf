"""Travel-time tomography for conformally Euclidean metrics.

Forward synthesis (geodesic shooting, boundary-normal charts, eikonal
travel times) and inverse reconstruction (eikonal-identity metric recovery,
conformal-Killing Cauchy march, isometry + conformal factor read-off).
"""

from .boundary import (BoundaryGeometry, circle_arc_boundary, inward_normal,
                       plane_patch_boundary, segment_boundary,
                       sphere_patch_boundary)
from .chart import NormalChart, build_normal_chart
from .ckf import (CATALOG_2D, EuclideanCKFParams, catalog_ckf_2d,
                  cke_operator, euclidean_ckf_eval)
from .dataset import GroundTruth, TravelTimeDataset, synthesize_dataset
from .distance import LatticeDistanceOracle, dijkstra_distance
from .eikonal import TravelTimeField, eikonal_solve
from .errors import (ConforayError, DatasetError, DefinitenessError,
                     DegenerateBoundaryError, DegenerateSpeedError,
                     DomainError, FieldRecoveryError, GenericityError,
                     GeometryError, InsufficientSourcesError,
                     MarchDivergenceError, ParameterError,
                     ParametrizationError, ParseError, PositivityError,
                     SpeedError, StencilError, UnreachableError,
                     VarianceError, VersionError)
from .fields import (AnalyticConformalFactor, Box, ConformalFactorField,
                     GriddedConformalFactor, conformal_christoffel)
from .geodesics import GeodesicPath, geodesic_shoot, shoot_batch
from .grids import (DGrid, axis_derivative, fifth_difference, grid_gradient,
                    polynomial_smooth, third_difference)
from .march import (CovectorFamilyOnD, ReconstructionResult,
                    assemble_cauchy_data, cke_march, reconstruct_gamma_rho,
                    spectral_project)
from .metric import (MetricFieldOnD, christoffels_from_metric_field,
                     metric_apply, project_semigeodesic, spd_mask)
from .phantoms import PhantomSpec
from .pipeline import (RoundTripReport, SolverConfig, reconstruct_dataset,
                       report_errors, run_roundtrip)
from .recovery import (BoundaryRhoTrace, TravelTimeGradients,
                       recover_boundary_rho, recover_metric_field,
                       recover_metric_point, travel_time_gradients)
from .ttdjson import dataset_equal, dataset_read, dataset_write

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
