"""Scene-flow estimation from stereo image pairs.

An 11-layer fully convolutional encoder-decoder regresses a dense 3D
motion vector per pixel from two consecutive stereo pairs.  The package
bundles the network and its hand-written gradients, ground-truth
reconstruction from optical flow and disparity, PFM/FLO raster I/O,
dataset indexing, training, and a command-line front end.
"""

from .dataset import (
    CameraConfig,
    RecordDataset,
    Sample,
    SampleRecord,
    index_dataset,
    load_sample,
    read_camera_config,
)
from .estimator import SceneFlowRegressor
from .flo import read_flo, read_flo_file, write_flo, write_flo_file
from .geometry import (
    CameraIntrinsics,
    ImageSpaceFlow,
    SceneFlowField,
    backproject,
    disparity_to_depth,
    reconstruct_scene_flow,
    sample_bilinear,
)
from .gradcheck import gradcheck
from .network import (
    Checkpoint,
    LayerSpec,
    Network,
    NetworkSpec,
    build_network,
    default_network_spec,
    layer_shapes,
    load_checkpoint,
    save_checkpoint,
)
from .pfm import read_pfm, read_pfm_file, write_pfm, write_pfm_file
from .training import TrainConfig, epe_loss, evaluate, fit, lr_schedule, masked_epe
from .validation import CheckpointError, DataError, ParseError, ShapeError
from .viz import colorize_channel, colorize_field

__version__ = "0.1.0"

__all__ = [
    "CameraConfig",
    "CameraIntrinsics",
    "Checkpoint",
    "CheckpointError",
    "DataError",
    "ImageSpaceFlow",
    "LayerSpec",
    "Network",
    "NetworkSpec",
    "ParseError",
    "RecordDataset",
    "Sample",
    "SampleRecord",
    "SceneFlowField",
    "SceneFlowRegressor",
    "ShapeError",
    "TrainConfig",
    "backproject",
    "build_network",
    "colorize_channel",
    "colorize_field",
    "default_network_spec",
    "disparity_to_depth",
    "epe_loss",
    "evaluate",
    "fit",
    "gradcheck",
    "index_dataset",
    "layer_shapes",
    "load_checkpoint",
    "load_sample",
    "lr_schedule",
    "masked_epe",
    "read_camera_config",
    "read_flo",
    "read_flo_file",
    "read_pfm",
    "read_pfm_file",
    "reconstruct_scene_flow",
    "sample_bilinear",
    "save_checkpoint",
    "write_flo",
    "write_flo_file",
    "write_pfm",
    "write_pfm_file",
]
