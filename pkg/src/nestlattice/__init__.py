"""Nested X-cross lattice unit cells: geometry, voxel homogenization and anisotropy analysis."""

__version__ = "0.1.0"

from .errors import (DegenerateInput, EmptyModel, InvalidSpec, LatticeError,  # noqa: E402
                     MinFeatureWarning, NonPositiveData, NonPositiveLength, NoSolid,
                     NotConverged, SingularFit, Unbracketed)
from .geometry import (NestedLatticeSpec, NestingOrderSpec, Segment, StrutModel,  # noqa: E402
                       build_base, build_full, catalog, find_design, t4fas_fold)
from .voxel import VoxelGrid, geometric_metrics, surface_mesh, voxelize  # noqa: E402
from .homogenize import LoadCase, MaterialSpec, StiffnessMatrix, homogenize  # noqa: E402
from .analysis import AnisotropyClass, analyze, cubic_project, zener  # noqa: E402
from .sweep import SweepPlan, run_pipeline, run_sweep, target_density  # noqa: E402
