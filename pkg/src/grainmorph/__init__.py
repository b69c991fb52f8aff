"""Morphological analysis of grey-level micrographs of granular materials."""
from .cat import (CatSkeleton, ChainComplex, TriangleClass, build_skeleton, chain_decompose,
                  classify_triangles, prune_skeleton)
from .contour import (Contour, ContourSet, DegenerateContourError, InvalidContourSetError,
                      extract_contours, signed_area, validate_contour_set)
from .kernels import BACKEND
from .morphology import (GreyMesh, ParticleStats, SceneStats, SeparationConfig,
                         particle_statistics, remove_holes, scene_statistics, separate_grains,
                         torso_fluctuation, triangle_mean_grey)
from .raster import GreyImage, Histogram, RasterError, grey_histogram, load_greyscale, save_pgm
from .report import RenderSpec, emit_stats, parse_stats_json, render_svg
from .segmentation import (BINDER_BAND, BinaryImage, PcnnConvergenceError, PcnnParams,
                           SpectralBand, pcnn_segment, pcnn_smooth, spectral_segment)
from .tessellate import TriMesh, check_locally_delaunay, constrained_delaunay

__version__ = "0.1.0"
