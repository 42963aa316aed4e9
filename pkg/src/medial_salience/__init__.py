"""Average-outward-flux medial axes of line drawings and the contour
salience measures derived from them: separation, ribbon and taper."""

from .aof import (AofMap, Skeleton, SkeletonPoint, compute_aof, extract_skeleton,
                  object_angle, reconstruct_boundary, threshold_aof)
from .distance import DistanceField, compute_edt, region_fields, sample_gradient
from .estimators import (ChannelComposer, ContourSalience, LineDrawingBinarizer,
                         MedialAxisSkeletonizer, SalienceSplitter)
from .exceptions import (ChannelError, ConfigError, ImageDimensionError, ImageFormatError,
                         MedialSalienceError, ParameterError, RegionError, SampleError)
from .graph import (MedialBranch, SkeletonGraph, classify_points, partition_branches,
                    resample_branch, smooth_branch)
from .ingest import (BinaryContourImage, ContourFragment, RegionMap, binarize, label_regions,
                     load_line_drawing, prepare_line_drawing, trace_fragments)
from .outputs import (ChannelSpec, SplitResult, aggregate_stats, compose_channels,
                      export_stats, render_colormap, split_by_salience)
from .pipeline import PipelineResult, reconstruction_fidelity, reconstruction_tips, run, skeletonize
from .salience import (MEASURES, SalienceConfig, SalienceMap, branch_salience,
                       project_to_contours, ribbon_salience, separation_salience,
                       skeleton_salience, taper_salience, windowed_salience)

__version__ = "0.1.0"
