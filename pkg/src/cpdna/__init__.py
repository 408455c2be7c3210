"""Laplace-Beltrami spectra on closest-point narrow bands, spectral
shape fingerprints, and similarity clustering by multidimensional
scaling."""

from .band import BandGrid, build_band, neighbors
from .eigen import RitzPair, Spectrum, arnoldi_smallest, dense_eig, extract_spectrum
from .linalg import (IluFactors, SolveStats, SparseMatrix, from_coo, gmres,
                     ilu0, ilu_apply, spmv)
from .mds import Embedding, classical_mds, smacof, stress
from .meshio import MeshBvh, TriMesh, build_bvh, cp_mesh, icosphere, parse_obj
from .operators import DiscreteLB, assemble_lb, build_extension, build_laplacian
from .oracle import (ExactSpectrum, circle_spectrum, hemisphere_spectrum,
                     interval_spectrum, sphere_spectrum)
from .pipeline import (JobSpec, compute_spectrum, convergence_study,
                       invariance_study, solver_benchmark)
from .shapedna import (DissimilarityMatrix, ShapeDna, dissimilarity_matrix,
                       dna_distance, normalize_dna)
from .surfaces import (ClosestPointField, CpResult, SurfaceSpec, cp_arc,
                       cp_circle, cp_ellipsoid, cp_hemisphere, cp_parametric,
                       cp_sphere, cp_torus, make_field, mobius_chart,
                       sphere_patch_chart, surface_from_json, surface_to_json,
                       transform_surface)

__version__ = "0.1.0"
