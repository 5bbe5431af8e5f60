"""Fast unsupervised image segmentation on a region graph with local
co-occurrence affinities and global saliency-space reconstruction links."""

from .config import PipelineConfig
from .imgproc import ImagePlane, load_image
from .pipeline import PHASES, run_partition, run_pipeline

__all__ = ["ImagePlane", "PHASES", "PipelineConfig", "load_image",
           "run_partition", "run_pipeline"]
__version__ = "0.1.0"
