"""Field-of-view audio zooming: FOV directional features, mask and MVDR zoom pipelines,
a subband filter model forward pass, a desk-scale scene simulator and metrics."""

from .array_model import (ArrayGeometry, Direction, FieldOfView, LookGrid, build_look_grid, classify_sectors,
                          default_geometry, steering_phase)
from .fov_features import (FeatureBank, FeatureMap, directional_feature, feature_bank, fov_aggregate,
                           fov_features, fuse_concat, fuse_postprocess, ipd)
from .metrics import attenuation, evaluate, si_sdr
from .scene_sim import SceneSpec, render, sample_scene
from .signal_core import MultichannelWave, Spectrogram, StftConfig, istft, lps, read_wav, stft, write_wav
from .zoom_engine import ZoomConfig, zoom

__version__ = "0.1.0"
