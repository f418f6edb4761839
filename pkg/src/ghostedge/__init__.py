"""Ghost-imaging edge detection toolkit.

Simulates bucket-detector acquisition of a grayscale object under random
speckle illumination with one-pixel pattern shifting, and recovers object
edges either by second-order correlation or by total-variation compressed
sensing on the differential bucket channels.
"""

from .image import (ShiftMode, as_grid, as_image, directional_gradient,
                    gradient_offset, normalize_map, read_pgm, shift,
                    sobel_edges, write_pgm)
from .speckle import (Distribution, PatternStack, generate_patterns,
                      load_stack, save_stack, shifted_stack, unflatten,
                      OFFSETS_3X3, SHIFTED_OFFSETS)
from .forward import (BucketVector, NoiseSpec, acquire, acquire_shifted,
                      add_awgn, bucket_value, gradient_bucket_channel,
                      load_bucket, save_bucket, sobel_bucket_channels)
from .solver import (SolveDiagnostics, TotalVariationSolver, solve_tv,
                     total_variation, tv_objective)
from .reconstruct import (CompressedEdgeReconstructor,
                          CorrelationEdgeReconstructor,
                          ImageDomainEdgeReconstructor, correlation_map,
                          fuse_magnitude)
from .metrics import (RegionMasks, compression_ratio, edge_snr, region_masks,
                      total_measurements)
from .experiment import (ExperimentConfig, MethodSpec, load_config,
                         median_rank, parse_method, run, sweep)
from . import phantoms

__version__ = "0.1.0"
