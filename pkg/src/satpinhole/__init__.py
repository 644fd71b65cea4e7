"""Equivalent pinhole cameras for rational polynomial satellite models.

The package converts a rational polynomial camera over a rated ground volume
into a plain pinhole camera, measures and predicts the equivalence error,
shrinks it with a fitted image warp, and supports the surrounding batch
workflow: scene tiling, height-map fusion across views, and accuracy metrics.
"""

from .equivalence import (
    DEFAULT_GRID_DIMS,
    CameraFormatError,
    DecompositionError,
    DegenerateGridError,
    IllConditionedError,
    PinholeCamera,
    ProjectionMatrix,
    VirtualGrid,
    build_virtual_grid,
    decompose_projection,
    equate,
    load_camera,
    parse_camera,
    save_camera,
    solve_projection,
)
from .error_analysis import (
    EquivalenceReport,
    error_field,
    format_equivalence_report,
    measure_equivalence_error,
    parse_equivalence_report,
    predict_error,
    size_sweep,
    write_field_preview,
)
from .fusion import (
    DsmMetrics,
    EmptyOverlapError,
    FusionConfig,
    LatticeMismatchError,
    dsm_metrics,
    format_metrics_report,
    fuse_views,
    mosaic_tiles,
)
from .geodesy import (
    GeoPoint,
    ecef_to_geodetic,
    enu_to_geodetic,
    geodetic_to_ecef,
    geodetic_to_enu,
)
from .raster import (
    GridFormatError,
    Raster,
    load_ascii_grid,
    parse_ascii_grid,
    sample_bilinear,
    save_ascii_grid,
)
from .refinement import (
    DegenerateCorrespondencesError,
    Homography,
    PolynomialWarp,
    WarpFormatError,
    build_refinement,
    fit_homography,
    fit_polynomial,
    load_warp,
    resample,
    save_warp,
)
from .rpc import (
    ConvergenceError,
    ExtrapolationWarning,
    RpcModel,
    RpcParseError,
    SingularEvaluationError,
    load_rpc,
    parse_rpc,
    project_forward,
    project_inverse,
    save_rpc,
)
from .synth import (
    PushbroomCamera,
    RpcFitError,
    SyntheticScene,
    Volume,
    fit_rpc,
    fit_scene_rpc,
    make_pinhole_scene,
    make_pushbroom_scene,
    make_terrain,
    render_image,
    scene_projection,
)
from .tiling import (
    ManifestFormatError,
    Tile,
    TilePlan,
    crop_raster,
    crop_rpc,
    enhance_brightness,
    format_manifest,
    parse_manifest,
    plan_tiles,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_GRID_DIMS",
    "CameraFormatError",
    "ConvergenceError",
    "DecompositionError",
    "DegenerateCorrespondencesError",
    "DegenerateGridError",
    "DsmMetrics",
    "EmptyOverlapError",
    "EquivalenceReport",
    "ExtrapolationWarning",
    "FusionConfig",
    "GeoPoint",
    "GridFormatError",
    "Homography",
    "IllConditionedError",
    "LatticeMismatchError",
    "ManifestFormatError",
    "PinholeCamera",
    "PolynomialWarp",
    "ProjectionMatrix",
    "PushbroomCamera",
    "Raster",
    "RpcFitError",
    "RpcModel",
    "RpcParseError",
    "SingularEvaluationError",
    "SyntheticScene",
    "Tile",
    "TilePlan",
    "VirtualGrid",
    "Volume",
    "build_refinement",
    "build_virtual_grid",
    "crop_raster",
    "crop_rpc",
    "decompose_projection",
    "dsm_metrics",
    "ecef_to_geodetic",
    "enhance_brightness",
    "enu_to_geodetic",
    "equate",
    "error_field",
    "fit_homography",
    "fit_polynomial",
    "fit_rpc",
    "fit_scene_rpc",
    "format_equivalence_report",
    "format_manifest",
    "format_metrics_report",
    "fuse_views",
    "geodetic_to_ecef",
    "geodetic_to_enu",
    "load_ascii_grid",
    "load_camera",
    "load_rpc",
    "load_warp",
    "make_pinhole_scene",
    "make_pushbroom_scene",
    "make_terrain",
    "measure_equivalence_error",
    "mosaic_tiles",
    "parse_ascii_grid",
    "parse_camera",
    "parse_equivalence_report",
    "parse_manifest",
    "parse_rpc",
    "plan_tiles",
    "predict_error",
    "project_forward",
    "project_inverse",
    "render_image",
    "resample",
    "sample_bilinear",
    "save_ascii_grid",
    "save_camera",
    "save_rpc",
    "save_warp",
    "scene_projection",
    "size_sweep",
    "solve_projection",
    "write_field_preview",
]
