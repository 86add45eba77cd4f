"""clothlayers: synthetic clothed-human scans with exact per-layer labels,
multi-layer segmentation strategies, metrics, and a desk-scale trainer."""

__version__ = "0.1.0"

from ._kernels import active_backend
from .geometry import (NeighborList, PointCloud, ball_query,
                       farthest_point_sample, knn, transform)
from .layering import (CanonicalLabel, CanonicalLabels, CoarseLabels,
                       GarmentClass, Strategy, StrategyLabels, coarse_project,
                       consistency_check, decode, encode,
                       enumerate_valid_labels)
from .metrics import (ConfusionAccumulator, accumulate, avg_miou, iou,
                      macc_allacc, miou, report)
from .scanner import LabeledScan, ScanConfig, check_visibility, resample, scan
from .scene import (BodyModel, GarmentShell, Outfit, Scene, SceneSpec,
                    build_scene, sample_outfit, sample_scene, scene_from_spec,
                    surface_label)

__all__ = [
    "__version__", "active_backend",
    "PointCloud", "NeighborList", "knn", "farthest_point_sample",
    "ball_query", "transform",
    "GarmentClass", "CanonicalLabel", "CanonicalLabels", "CoarseLabels",
    "Strategy", "StrategyLabels", "encode", "decode", "coarse_project",
    "consistency_check", "enumerate_valid_labels",
    "ConfusionAccumulator", "accumulate", "iou", "miou", "avg_miou",
    "macc_allacc", "report",
    "ScanConfig", "LabeledScan", "scan", "resample", "check_visibility",
    "BodyModel", "GarmentShell", "Outfit", "Scene", "SceneSpec",
    "build_scene", "sample_outfit", "sample_scene", "scene_from_spec",
    "surface_label",
]
