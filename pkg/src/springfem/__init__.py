"""Tensor-valued spring networks equivalent to P1 finite elements.

Assembles the spring constants of the network induced by piecewise
linear elements on a simplicial mesh, classifies their definiteness,
and solves the pinned force-balance problem through either form.
"""

from .analysis import (
    MeshAnalysis,
    PdResult,
    analyze_mesh,
    classify_pd,
    classify_pd_batch,
    critical_poisson,
    pd_angle_check,
    pd_exact_check,
    poisson_limit_for_angle,
    projection_product_grid_max,
    projection_product_max,
    sym_eigenvalues,
    sym_eigenvalues_batch,
)
from .assembly import (
    IsotropicDecomposition,
    SpringConstant,
    decomposition_matrix,
    decompositions_all,
    diagonal_constant,
    diagonal_constants_direct,
    isotropic_decomposition,
    load_data,
    load_vector,
    spring_constant,
    spring_constants_all,
    vertex_weights,
)
from .elasticity import (
    ElasticityTensor,
    IsotropicMaterial,
    isotropic_tensor,
    material_from_poisson,
    plane_stress_material,
    plane_stress_poisson,
    random_full_symmetric_tensor,
    read_tensor,
    symmetric_form_eigenvalues,
    write_tensor,
)
from .errors import (
    AssemblyError,
    MaterialError,
    MeshError,
    MeshFormatError,
    SolverError,
    SpringFemError,
    UsageError,
)
from .mesh import (
    BoundaryPartition,
    Mesh,
    SpringPair,
    classify_boundary,
    generate_mesh,
    jitter,
    mesh_text,
    opposite_angle,
    parse_mesh,
    spring_adjacency,
    write_mesh,
)
from .reporting import (
    DEFAULT_NU_GRID,
    SweepResult,
    colormap_svg,
    poisson_grid,
    springs_csv,
    sweep_csv,
    sweep_figure,
    sweep_mesh,
)
from .system import (
    SpringBlockSystem,
    bilinear_k,
    build_system,
    displacement_csv,
    energy,
    fem_energy,
    fem_residual,
    solvability_check,
    solve,
    spring_residual,
    write_displacement_csv,
)
from .verify import verify_all, verify_csv

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "BoundaryPartition",
    "DEFAULT_NU_GRID",
    "ElasticityTensor",
    "IsotropicDecomposition",
    "IsotropicMaterial",
    "MaterialError",
    "Mesh",
    "MeshAnalysis",
    "MeshError",
    "MeshFormatError",
    "PdResult",
    "SolverError",
    "SpringBlockSystem",
    "SpringConstant",
    "SpringFemError",
    "SpringPair",
    "SweepResult",
    "UsageError",
    "analyze_mesh",
    "bilinear_k",
    "build_system",
    "classify_boundary",
    "classify_pd",
    "classify_pd_batch",
    "colormap_svg",
    "critical_poisson",
    "decomposition_matrix",
    "decompositions_all",
    "diagonal_constant",
    "diagonal_constants_direct",
    "displacement_csv",
    "energy",
    "fem_energy",
    "fem_residual",
    "generate_mesh",
    "isotropic_decomposition",
    "isotropic_tensor",
    "jitter",
    "load_data",
    "load_vector",
    "material_from_poisson",
    "mesh_text",
    "opposite_angle",
    "parse_mesh",
    "pd_angle_check",
    "pd_exact_check",
    "plane_stress_material",
    "plane_stress_poisson",
    "poisson_grid",
    "poisson_limit_for_angle",
    "projection_product_grid_max",
    "projection_product_max",
    "random_full_symmetric_tensor",
    "read_tensor",
    "solvability_check",
    "solve",
    "spring_adjacency",
    "spring_constant",
    "spring_constants_all",
    "spring_residual",
    "springs_csv",
    "sweep_csv",
    "sweep_figure",
    "sweep_mesh",
    "sym_eigenvalues",
    "sym_eigenvalues_batch",
    "symmetric_form_eigenvalues",
    "verify_all",
    "verify_csv",
    "vertex_weights",
    "write_displacement_csv",
    "write_mesh",
    "write_tensor",
]
