"""planefit: plane and line reconstruction from unstructured point clouds
under a shared-direction budget.

The pipeline estimates per-point normals, repeatedly fuses neighboring
regions under an L0-gradient objective while a submodular selection step
thins the global set of distinct normals, then groups same-direction
points into planes.
"""

from .cloud_io import (CloudFormatError, grid_downsample, read_cloud,
                       write_outputs, write_ply)
from .fusion import (Region, RegionPartition, fuse_pass, init_partition,
                     partition_energy)
from .geometry import (NeighborGraph, PointCloud, angle_degrees,
                       build_knn_graph, canonicalize, canonicalize_rows,
                       estimate_normals_pca)
from .metrics import (GroundTruth, consistency_errors, normal_rms_error,
                      plane_distance_rms, projection_rms)
from .planes import (OUTLIER, Hyperplane, LabeledCloud, extract_planes,
                     point_plane_distance, project_point)
from .reconstruct import (ReconstructionConfig, ReconstructionResult,
                          count_distinct_normals, initial_lambda,
                          reconstruct_normals)
from .selection import (Candidate, CandidateSet, NoPlaneSupportError,
                        SelectionResult, assign_regions, build_candidates,
                        double_greedy, selection_cost)
from .synthetic import (SyntheticScene, corrupt, gen_lines_2d, sample_mesh,
                        sample_polyhedron)

__version__ = "0.1.0"

__all__ = [
    "CloudFormatError", "grid_downsample", "read_cloud", "write_outputs",
    "write_ply",
    "Region", "RegionPartition", "fuse_pass", "init_partition",
    "partition_energy",
    "NeighborGraph", "PointCloud", "angle_degrees", "build_knn_graph",
    "canonicalize", "canonicalize_rows", "estimate_normals_pca",
    "GroundTruth", "consistency_errors", "normal_rms_error",
    "plane_distance_rms", "projection_rms",
    "OUTLIER", "Hyperplane", "LabeledCloud", "extract_planes",
    "point_plane_distance", "project_point",
    "ReconstructionConfig", "ReconstructionResult", "count_distinct_normals",
    "initial_lambda", "reconstruct_normals",
    "Candidate", "CandidateSet", "NoPlaneSupportError", "SelectionResult",
    "assign_regions", "build_candidates", "double_greedy", "selection_cost",
    "SyntheticScene", "corrupt", "gen_lines_2d", "sample_mesh",
    "sample_polyhedron",
    "__version__",
]
