"""Blockwise low-rank (H-matrix) compression toolkit for FEM stiffness matrices."""

from .bench import ExperimentConfig, ExperimentRecord, RateFit, fit_rate, run_experiment
from .clustering import (BlockPartition, Cluster, ClusterTree, build_cluster_tree,
                         build_partition, is_admissible, sparsity_constant)
from .dense import (LowRankFactor, NotSpdError, SingularMatrixError, cholesky,
                    lu_factor, spectral_norm, truncated_svd)
from .fem import (DofMap, PdeCoefficients, SparseMatrix, assemble,
                  assemble_convdiff, assemble_neumann)
from .hfactor import (HFactorization, HTriangularFactor, hcholesky_factorize,
                      hlu_factorize, schur_complement, schur_recursion_check,
                      triangular_solve)
from .hmatrix import HMatrix, NormBoundReport, compress, norm_bound, storage_stats
from .mesh import (BoundaryTag, Mesh, build_lshape, build_unit_cube,
                   build_unit_square, classify_boundary)

__all__ = [name for name in dir() if not name.startswith("_")]
