"""Discrete Menger-type curvatures, curvature energies and multiscale
flatness numbers for weighted point clouds."""

__version__ = "0.1.0"

from .cloud import WeightedCloud
from .curvature import (EnergyEstimate, EnergyParams, SearchParams, energy, energy_tp,
                        eta_d_check, kappa, kappa_prime, kappa_svdm, menger_c, sup_kappa,
                        tangent_point_radius)
from .estimators import BetaNumbers, CurvatureEnergy, TangentPlanes
from .exceptions import (BudgetError, DomainError, MengerError, MeshParseError,
                         PreconditionError, RankDeficiencyError, SamplingError)
from .flatness import (ScaleRecord, ScalingFit, ahlfors_density, best_approx_plane, beta,
                       beta_upper_from_simplex, graph_patch_check, hausdorff_defect,
                       max_volume_simplex, scaling_fit, tangent_estimate, tangent_oscillation,
                       theta)
from .geometry import (Simplex, VoluminousParams, dist_to_affine, face, height, is_voluminous,
                       min_height, simplex_diameter, simplex_volume, varsigma)
from .grassmann import (Cone, Subspace, angle_perturbation_bound, cone_contains,
                        cone_inclusion_check, grassmann_distance, is_rho_eps_basis,
                        orthonormalize_tracked, project, project_perp)
from .shapes import GeneratorSpec, MeshSurface, generate, load_mesh, sample_mesh
