"""stixelforge: multi-layer stixel ground truth from LiDAR point clouds,
occupancy/cut grid codecs, training losses, and evaluation metrics."""

from .agt import AgtConfig, classify_cluster, extract_stixel, generate_stixel_world
from .cluster import ColumnBin, DbscanConfig, bin_by_column, cluster_column_objects, dbscan
from .codec import (
    DecodeConfig,
    decode_heatmaps,
    encode_targets,
    heatmaps_from_targets,
    normalize_heatmaps,
)
from .core import (
    Calibration,
    CameraIntrinsics,
    Extrinsics,
    Frame,
    GridSpec,
    HeatmapPair,
    Plane,
    Point3,
    PointCloud,
    Stixel,
    StixelType,
    StixelWorld,
    TargetGrid,
    stixel_pixel_interval,
)
from .geometry import PixelCoord, project_point, project_points, remove_hidden_points, transform_to_camera
from .ground import RansacConfig, fit_plane_ransac, two_stage_ground
from .loss import LossWeights, PredictionPair, bce_loss, loss_gradient, sum_loss, total_loss
from .metrics import (
    FreespaceReport,
    MatchReport,
    SweepPoint,
    best_operating_point,
    bottom_contact_per_column,
    freespace_score,
    match_worlds,
    pr_sweep,
    stixel_iou,
    summarize_freespace,
)
from .synth import (
    Box,
    SceneSpec,
    SensorRig,
    Wall,
    default_calibration,
    oracle_stixel_world,
    parse_scene,
    random_scene,
    simulate_lidar,
)

__version__ = "0.1.0"
