"""Hybrid Laplace-Beltrami / elastic functional maps for non-rigid shape correspondence."""

from .algebra import WeightedSpace, adjoint, hs_norm, hs_norm_trace, projector, weighted_space
from .conversion import (
    HybridBasis,
    embed_for_matching,
    encode_gt,
    encode_gt_hybrid,
    extract_p2p,
    extract_p2p_hybrid,
    make_schedule,
    zoomout,
    zoomout_hybrid,
)
from .descriptors import DescriptorSet, hks, project_descriptors, wks, xyz
from .errors import (
    HybridFMError,
    ParseError,
    EmptyMeshError,
    DegenerateMeshError,
    IndexOutOfRange,
    DimensionMismatch,
    LengthMismatch,
    DimensionError,
    NumericalError,
    ConvergenceError,
    RankError,
    NotSPD,
    SingularSystem,
    InsufficientSpectrum,
    EmptyEmbedding,
    ScheduleError,
    ChecksumError,
)
from .evaluation import GeodesicCache, geodesic_distances, mean_geodesic_error, pck_curve
from .fmap import (
    HybridMap,
    annealing_and_scales,
    loss_bijectivity,
    loss_couple_hs,
    loss_gt_hs,
    loss_orthogonality_hs,
    solve_hs,
    solve_hybrid,
    solve_standard,
)
from .fmb import read_fmb, write_fmb
from .mesh import Mesh, load_correspondence, load_mesh, save_correspondence, save_off, save_ply
from .operators import (
    SpectralBasis,
    SparseOperator,
    assemble_elastic_hessian,
    assemble_laplacian,
    compute_eigenbasis,
    elastic_basis,
    laplace_basis,
)

__version__ = "0.1.0"
