"""Model order reduction on Lie groups: fit reduced dynamics g' = rho(t) g acting on
snapshot data, discover minimal subalgebras and particle clusters, and compare the
resulting reduced models against linear (POD) baselines."""
from .actions import (
    ActionSpec,
    StatePoint,
    affine_cloud_action,
    apply_action,
    clustered_affine_action,
    generator_matrix_at,
    grid_translation_action,
    infinitesimal_generator,
    product_commuting,
    so2_polar_action,
)
from .clustering import cluster_search, filter_by_generator
from .config import RunConfig
from .datagen import BenchmarkConfig, gen_linear_transport, gen_radial_oscillator, gen_rigid_cloud, gen_sheering_clouds
from .fitting import (
    ReducedSnapshotMatrix,
    ReducedVectorField,
    SnapshotSet,
    evaluate_cost,
    fit_rho_theta,
    fit_velocity_based,
    fit_velocity_free,
    project_vector_field,
)
from .io import export_csv, ingest_csv
from .lie_core import (
    AlgebraBasis,
    AlgebraElement,
    GroupElement,
    Subalgebra,
    aff3_basis,
    basis_orthonormalize,
    bracket,
    dexp,
    dexpinv,
    exp_map,
    log_map,
    se3_basis,
)
from .lm import LMConfig
from .metrics import cloud_distance, estimate_group_width, pod_reconstruct_error, pod_svd, trajectory_errors
from .pipeline import run_pipeline
from .report import emit_report
from .rom import RomModel, Trajectory, integrate_rom, integrate_reference_fom, reconstruct
from .subalgebra import bracket_closure, subalgebra_search

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "StatePoint",
    "affine_cloud_action",
    "apply_action",
    "clustered_affine_action",
    "generator_matrix_at",
    "grid_translation_action",
    "infinitesimal_generator",
    "product_commuting",
    "so2_polar_action",
    "cluster_search",
    "filter_by_generator",
    "RunConfig",
    "BenchmarkConfig",
    "gen_linear_transport",
    "gen_radial_oscillator",
    "gen_rigid_cloud",
    "gen_sheering_clouds",
    "ReducedSnapshotMatrix",
    "ReducedVectorField",
    "SnapshotSet",
    "evaluate_cost",
    "fit_rho_theta",
    "fit_velocity_based",
    "fit_velocity_free",
    "project_vector_field",
    "export_csv",
    "ingest_csv",
    "AlgebraBasis",
    "AlgebraElement",
    "GroupElement",
    "Subalgebra",
    "aff3_basis",
    "basis_orthonormalize",
    "bracket",
    "dexp",
    "dexpinv",
    "exp_map",
    "log_map",
    "se3_basis",
    "LMConfig",
    "cloud_distance",
    "estimate_group_width",
    "pod_reconstruct_error",
    "pod_svd",
    "trajectory_errors",
    "run_pipeline",
    "emit_report",
    "RomModel",
    "Trajectory",
    "integrate_rom",
    "integrate_reference_fom",
    "reconstruct",
    "bracket_closure",
    "subalgebra_search",
]
