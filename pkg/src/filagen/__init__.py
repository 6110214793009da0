"""filagen: paired synthetic filament micrograph generation and segmentation."""

from .raster import BinaryMask, GrayImage, PatchPair, binarize, extract_patches
from .skeleton import MorphParams, dilate, erode, thin
from .maskgen import FilamentPolyline, MaskGenConfig
from .neural import (
    DiscriminatorConfig,
    GeneratorConfig,
    LossWeights,
    SegmenterConfig,
)
from .training import TrainConfig
from .metrics import MetricsReport, iou, skiou

__version__ = "0.1.0"
