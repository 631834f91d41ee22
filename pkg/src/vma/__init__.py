"""Divide-and-conquer vectorized map annotation pipeline."""

__version__ = "0.1.0"

from vma.errors import (
    EmptyGroundTruth,
    EmptyTrajectory,
    FrameMismatch,
    InternalGeometryError,
    InvalidGeometry,
    SchemaError,
    VmaError,
)
from vma.model import (
    Frame,
    GLOBAL_FRAME,
    GeomKind,
    MapElement,
    VectorizedMap,
)
from vma.split import AnnotationUnit, Pose2D, Trajectory, crop_unit, sample_positions, split_scene
from vma.annotate import (
    AnnotatorConfig,
    AssignmentResult,
    OracleAnnotator,
    SubprocessAnnotator,
    annotate,
    hierarchical_assign,
    p2l_loss,
    p2p_loss,
)
from vma.merge import MergeConfig, Merger, associate_lines, fuse_lines, merge_all, merge_maps
from vma.sparsify import SparsifyConfig, douglas_peucker, sparsify_element, sparsify_map
from vma.metrics import EvalReport, RasterConfig, apls, ecm, evaluate, naive_connectivity, pixel_prf
from vma.synth import SceneSpec, generate_scene
from vma.pipeline import PipelineConfig, RunManifest, run_pipeline

__all__ = [
    "__version__",
    "AnnotationUnit",
    "AnnotatorConfig",
    "AssignmentResult",
    "EmptyGroundTruth",
    "EmptyTrajectory",
    "EvalReport",
    "Frame",
    "FrameMismatch",
    "GLOBAL_FRAME",
    "GeomKind",
    "InternalGeometryError",
    "InvalidGeometry",
    "MapElement",
    "MergeConfig",
    "Merger",
    "OracleAnnotator",
    "PipelineConfig",
    "Pose2D",
    "RasterConfig",
    "RunManifest",
    "SceneSpec",
    "SchemaError",
    "SparsifyConfig",
    "SubprocessAnnotator",
    "Trajectory",
    "VectorizedMap",
    "VmaError",
    "annotate",
    "apls",
    "associate_lines",
    "crop_unit",
    "douglas_peucker",
    "ecm",
    "evaluate",
    "fuse_lines",
    "generate_scene",
    "hierarchical_assign",
    "merge_all",
    "merge_maps",
    "naive_connectivity",
    "p2l_loss",
    "p2p_loss",
    "pixel_prf",
    "run_pipeline",
    "sample_positions",
    "sparsify_element",
    "sparsify_map",
    "split_scene",
]
