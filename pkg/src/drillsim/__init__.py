"""drillsim: a volumetric dental-drilling simulation core.

The tooth is a tissue-labelled sphere pack carrying a smooth implicit
surface. The package voxelizes and meshes that surface deterministically
(bitwise-identical results at any thread count), replays drill scripts as
material removal, scores drilled outcomes against an ideal cavity with a
clinically anchored error score plus a 24-metric battery, and ships the
calibration, gaze, and study-statistics tooling around it.
"""
from .calibration import (CalibrationOffset, Pose, ToolFrame, alignment_residual,
                          angle_difference, apply_correction, apply_misalignment,
                          camera_correction, load_calibration, normalize_angle,
                          save_calibration, target_controller_pose)
from .drill import (DrillScript, DrillStep, RemovalLog, apply_drill_step,
                    load_drill_script, parse_drill_script, replay,
                    save_drill_script)
from .field import (DEFAULT_DIMS, ISO_LEVEL, SUPPORT_SCALE, LatticeSample,
                    ScalarField, build_field, default_grid_box, kernel_weight,
                    sample_lattice, single_sphere_iso_radius)
from .gaze import (DEFAULT_HMD, GazeLog, GazeSample, HmdSpec, cyclops_ray,
                   hit_test_log, load_gaze_log, mean_eye_tooth_distance,
                   parse_gaze_log, pixel_footprint, ray_mesh_distance,
                   save_gaze_log, screen_share)
from .mesh import (TriangleMesh, euler_characteristic, extract_mesh,
                   is_watertight, load_ply, mesh_from_sample, save_ply)
from .scoring import (BATTERY_METRICS, ClassificationCounts, DentistScore,
                      MetricScore, classify, dentist_closed_form, dentist_score,
                      f1_score, metric_battery, outcome_report,
                      precision_sensitivity)
from .stats import (AnovaResult, CorrelationResult, IqrOutlierResult,
                    NormalityResult, Tails, TTestResult, cohen_kappa, ibmd,
                    icc_agreement, iqr_outliers, learning_gain, normality,
                    one_way_anova, paired_ttest, pearson,
                    uniform_coverage_select, welch_ttest)
from .volume import (NO_TISSUE, BoundingBox, Sphere, SpherePackVolume, Tissue,
                     load_sphere_pack, save_sphere_pack)
from .voxelgrid import (VoxelGrid, grid_from_sample, grids_compatible,
                        load_voxel_grid, save_voxel_grid, voxelize)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # volume
    "Tissue", "NO_TISSUE", "Sphere", "BoundingBox", "SpherePackVolume",
    "save_sphere_pack", "load_sphere_pack",
    # field
    "SUPPORT_SCALE", "ISO_LEVEL", "DEFAULT_DIMS", "ScalarField",
    "LatticeSample", "build_field", "default_grid_box", "kernel_weight",
    "sample_lattice", "single_sphere_iso_radius",
    # voxel grid
    "VoxelGrid", "voxelize", "grid_from_sample", "grids_compatible",
    "save_voxel_grid", "load_voxel_grid",
    # mesh
    "TriangleMesh", "extract_mesh", "mesh_from_sample", "is_watertight",
    "euler_characteristic", "save_ply", "load_ply",
    # drill
    "DrillStep", "DrillScript", "RemovalLog", "parse_drill_script",
    "load_drill_script", "save_drill_script", "apply_drill_step", "replay",
    # scoring
    "ClassificationCounts", "classify", "precision_sensitivity",
    "DentistScore", "dentist_score", "dentist_closed_form", "f1_score",
    "MetricScore", "metric_battery", "BATTERY_METRICS", "outcome_report",
    # stats
    "Tails", "TTestResult", "AnovaResult", "CorrelationResult",
    "NormalityResult", "IqrOutlierResult", "learning_gain", "iqr_outliers",
    "paired_ttest", "welch_ttest", "one_way_anova", "pearson", "cohen_kappa",
    "icc_agreement", "ibmd", "normality", "uniform_coverage_select",
    # calibration
    "Pose", "CalibrationOffset", "ToolFrame", "normalize_angle",
    "angle_difference", "target_controller_pose", "camera_correction",
    "apply_correction", "alignment_residual", "apply_misalignment",
    "save_calibration", "load_calibration",
    # gaze
    "HmdSpec", "DEFAULT_HMD", "GazeSample", "GazeLog", "parse_gaze_log",
    "load_gaze_log", "save_gaze_log", "cyclops_ray", "ray_mesh_distance",
    "hit_test_log", "mean_eye_tooth_distance", "pixel_footprint",
    "screen_share",
]
