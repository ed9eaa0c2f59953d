"""Spring-block systems: force balance, solvers, residuals, energies.

Nodes act as rigid blocks; every node pair sharing an element is
connected by a spring with a matrix-valued constant.  Interior blocks
satisfy the force balance

    sum_j K_ij (u_j - u_i) + F_i = 0,

boundary blocks are pinned to prescribed displacements.  Eliminating
the pinned blocks leaves a symmetric positive-definite system in the
interior displacements, solved by a dense symmetric factorization for
small systems and diagonally preconditioned conjugate gradients for
large ones.

``fem_residual`` evaluates the same balance through the bilinear form
of the underlying continuum problem without ever touching spring
constants; the two routes agreeing entrywise is the system-equivalence
check exercised by the test suite and the ``verify`` command.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse

from .analysis import classify_pd_batch
from .assembly import (
    LoadData,
    load_data,
    load_vector,
    spring_constants_all,
)
from .elasticity import ElasticityTensor, IsotropicMaterial, isotropic_tensor
from .errors import AssemblyError, SolverError
from .mesh import BoundaryPartition, Mesh, classify_boundary, spring_adjacency

#: Springs with norm below this fraction of the largest spring are
#: dropped from the neighbour structure.
NEIGHBOR_REL_TOL = 1e-14

#: Required relative symmetry of interior-pair springs at build time.
SYMMETRY_REL_TOL = 1e-10

#: Unknown count up to which the dense direct factorization is used.
DIRECT_LIMIT = 3000

CG_REL_TOL = 1e-12
CG_MAXITER_FACTOR = 50


@dataclass(frozen=True)
class SpringBlockSystem:
    """Assembled spring constants, adjacency and load data of one mesh.

    ``constants[s]`` is the spring constant of ``pairs[s]`` oriented
    from the smaller to the larger node id; the reversed orientation is
    its transpose.  ``active`` masks springs that survived the norm
    threshold; ``neighbors[i]`` lists the nodes coupled to node i
    through active springs.
    """

    mesh: Mesh
    tensor: ElasticityTensor
    partition: BoundaryPartition
    pairs: list
    constants: np.ndarray
    active: np.ndarray
    neighbors: list
    loads: LoadData
    scale: float

    @property
    def dim(self) -> int:
        return self.mesh.dim


def build_system(
    mesh: Mesh,
    material,
    f=None,
    g=None,
    check_symmetry: bool = True,
) -> SpringBlockSystem:
    """Assemble the spring-block system of a mesh.

    ``material`` may be an IsotropicMaterial or a full ElasticityTensor.
    Every interior-pair spring is checked against its independently
    assembled reverse orientation; a relative asymmetry above 1e-10
    aborts the build, since downstream solvers rely on it.
    """
    tensor = (
        isotropic_tensor(material, mesh.dim)
        if isinstance(material, IsotropicMaterial)
        else material
    )
    pairs = spring_adjacency(mesh)
    constants = spring_constants_all(mesh, tensor, pairs)
    norms = np.linalg.norm(constants, axis=(1, 2))
    scale = float(norms.max()) if norms.size else 0.0

    if check_symmetry:
        reverse = spring_constants_all(mesh, tensor, pairs, reverse=True)
        interior = np.array([p.interior_pair for p in pairs])
        sig = interior & (norms > NEIGHBOR_REL_TOL * scale)
        if np.any(sig):
            # the reversed orientation must transpose back onto the forward
            # matrix; comparing without the transpose would be vacuous, the
            # two assemblies agree identically on interior pairs
            rev_t = np.transpose(reverse, (0, 2, 1))
            rel = np.linalg.norm((constants - rev_t)[sig], axis=(1, 2)) / norms[sig]
            worst = float(rel.max())
            if worst > SYMMETRY_REL_TOL:
                raise AssemblyError(
                    f"interior spring constants asymmetric (relative residual {worst:.3e}); "
                    "the mesh/tensor combination violates the structural symmetry guarantee"
                )

    active = norms > NEIGHBOR_REL_TOL * scale
    neighbors: list[list[int]] = [[] for _ in range(mesh.num_nodes)]
    for s, p in enumerate(pairs):
        if active[s]:
            neighbors[p.i].append(p.j)
            neighbors[p.j].append(p.i)
    neighbors = [np.array(sorted(ns), dtype=np.int64) for ns in neighbors]

    partition = classify_boundary(mesh)
    return SpringBlockSystem(
        mesh=mesh,
        tensor=tensor,
        partition=partition,
        pairs=pairs,
        constants=constants,
        active=active,
        neighbors=neighbors,
        loads=load_data(mesh, f, g, partition),
        scale=scale,
    )


def _pair_arrays(system: SpringBlockSystem):
    idx_i = np.array([p.i for p in system.pairs], dtype=np.int64)
    idx_j = np.array([p.j for p in system.pairs], dtype=np.int64)
    return idx_i[system.active], idx_j[system.active], system.constants[system.active]


def spring_residual(system: SpringBlockSystem, u: np.ndarray) -> np.ndarray:
    """Force balance residual sum_j K_ij (u_j - u_i) + F_i on interior rows.

    Returns an (N, d) array with boundary rows zeroed.
    """
    u = np.asarray(u, dtype=float)
    idx_i, idx_j, ks = _pair_arrays(system)
    diff = u[idx_j] - u[idx_i]
    r = np.zeros_like(u)
    np.add.at(r, idx_i, np.einsum("skl,sl->sk", ks, diff))
    np.add.at(r, idx_j, -np.einsum("skl,sk->sl", ks, diff))
    r += system.loads.forces
    r[system.partition.boundary] = 0.0
    return r


def bilinear_k(system: SpringBlockSystem, u: np.ndarray, v: np.ndarray) -> float:
    """The spring energy pairing sum over pairs of K_ij(u_j-u_i).(v_j-v_i)."""
    idx_i, idx_j, ks = _pair_arrays(system)
    du = np.asarray(u, dtype=float)[idx_j] - np.asarray(u, dtype=float)[idx_i]
    dv = np.asarray(v, dtype=float)[idx_j] - np.asarray(v, dtype=float)[idx_i]
    return float(np.einsum("skl,sl,sk->", ks, du, dv))


def energy(system: SpringBlockSystem, u: np.ndarray) -> float:
    """Total energy 0.5 (u,u)_K minus the interior work of the loads.

    Matches the continuum energy for fields vanishing on the pinned
    set; springs joining two pinned nodes need not be symmetric, so the
    two functionals may differ on fields supported there.
    """
    interior = system.partition.interior
    work = float(np.einsum("nd,nd->", system.loads.forces[interior], np.asarray(u)[interior]))
    return 0.5 * bilinear_k(system, u, u) - work


def _interior_matrix(system: SpringBlockSystem):
    """Eliminated system H x = b over interior displacement unknowns.

    H carries blocks of the (positive-definite) energy form: the
    negated spring constants off the diagonal and neighbour sums on it.
    Returns (H, b, interior, slots) with H dense or CSR depending on
    size.
    """
    mesh, d = system.mesh, system.dim
    interior = system.partition.interior
    slot = -np.ones(mesh.num_nodes, dtype=np.int64)
    slot[interior] = np.arange(interior.size)
    n_unk = interior.size * d
    b = system.loads.forces[interior].copy()
    gv = system.loads.boundary_values

    idx_i, idx_j, ks = _pair_arrays(system)
    rows_blk, cols_blk, vals_blk = [], [], []

    def add_block(r, c, mat):
        rows_blk.append(r)
        cols_blk.append(c)
        vals_blk.append(mat)

    for s in range(idx_i.size):
        i, j, k = int(idx_i[s]), int(idx_j[s]), ks[s]
        si, sj = slot[i], slot[j]
        if si >= 0:
            add_block(si, si, k)
            if sj >= 0:
                add_block(si, sj, -k)
            else:
                b[si] += k @ gv[j]
        if sj >= 0:
            add_block(sj, sj, k.T)
            if si >= 0:
                add_block(sj, si, -k.T)
            else:
                b[sj] += k.T @ gv[i]

    if n_unk == 0:
        return np.zeros((0, 0)), b.reshape(-1), interior, slot

    if n_unk <= DIRECT_LIMIT:
        h = np.zeros((n_unk, n_unk))
        for r, c, mat in zip(rows_blk, cols_blk, vals_blk):
            h[r * d : r * d + d, c * d : c * d + d] += mat
    else:
        n_blocks = len(vals_blk)
        data = np.empty(n_blocks * d * d)
        rr = np.empty(n_blocks * d * d, dtype=np.int64)
        cc = np.empty(n_blocks * d * d, dtype=np.int64)
        local_r, local_c = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        for t, (r, c, mat) in enumerate(zip(rows_blk, cols_blk, vals_blk)):
            sl = slice(t * d * d, (t + 1) * d * d)
            data[sl] = mat.ravel()
            rr[sl] = (r * d + local_r).ravel()
            cc[sl] = (c * d + local_c).ravel()
        h = scipy.sparse.coo_matrix((data, (rr, cc)), shape=(n_unk, n_unk)).tocsr()
    return h, b.reshape(-1), interior, slot


def _cg(h, b: np.ndarray, maxiter: int) -> np.ndarray:
    """Diagonally preconditioned conjugate gradients, deterministic."""
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    diag = np.asarray(h.diagonal()).ravel()
    if np.any(diag <= 0.0):
        raise SolverError("system diagonal has non-positive entries; cannot precondition")
    inv_diag = 1.0 / diag
    x = np.zeros_like(b)
    r = b.copy()
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for _ in range(maxiter):
        hp = h @ p
        alpha = rz / float(p @ hp)
        x += alpha * p
        r -= alpha * hp
        if np.linalg.norm(r) <= CG_REL_TOL * bnorm:
            return x
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"conjugate gradients did not reach relative residual {CG_REL_TOL:g} "
        f"within {maxiter} iterations"
    )


def solve(system: SpringBlockSystem) -> np.ndarray:
    """Solve the pinned force-balance problem; returns displacements (N, d).

    Boundary rows carry the prescribed values.  Systems with at most
    3000 unknowns use a dense symmetric factorization; larger ones use
    conjugate gradients with a diagonal preconditioner (relative
    residual 1e-12, iteration cap 50x the unknown count).  Both paths
    are deterministic: repeated solves return bit-identical arrays.
    """
    h, b, interior, _ = _interior_matrix(system)
    u = system.loads.boundary_values.copy()
    if interior.size == 0:
        return u
    n_unk = b.size
    if n_unk <= DIRECT_LIMIT:
        try:
            factor = scipy.linalg.cho_factor(h, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise SolverError(
                f"symmetric factorization failed ({exc}); the interior system is "
                "singular or indefinite for this mesh/material"
            ) from None
        x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    else:
        x = _cg(h, b, maxiter=CG_MAXITER_FACTOR * n_unk)
    u[interior] = x.reshape(interior.size, system.dim)
    return u


def residual_bound(system: SpringBlockSystem) -> float:
    """Acceptance bound for solve residuals: 1e-9 * (1 + max |F_i|)."""
    interior = system.partition.interior
    fmax = float(np.abs(system.loads.forces[interior]).max()) if interior.size else 0.0
    return 1e-9 * (1.0 + fmax)


# ---------------------------------------------------------------------------
# Independent continuum route (no spring constants anywhere below)


def fem_residual(mesh: Mesh, tensor: ElasticityTensor, u: np.ndarray, f=None) -> np.ndarray:
    """Residual of the continuum weak form on interior rows, (N, d).

    Entry (i, k) is the energy pairing of the piecewise linear
    interpolant of ``u`` with the hat displacement phi_i e_k, minus the
    vertex-quadrature load.  Assembled from per-element stresses only;
    equals the *negative* of the spring-form residual.
    """
    u = np.asarray(u, dtype=float)
    grads = mesh.gradients()
    vols = mesh.volumes()
    u_elem = u[mesh.elements]
    grad_u = np.einsum("mvp,mvq->mpq", u_elem, grads)
    strain = 0.5 * (grad_u + np.transpose(grad_u, (0, 2, 1)))
    stress = np.einsum("pqrs,mrs->mpq", tensor.c, strain)
    r = np.zeros_like(u)
    for v in range(mesh.dim + 1):
        np.add.at(r, mesh.elements[:, v], np.einsum("m,mpq,mq->mp", vols, stress, grads[:, v, :]))
    r -= load_vector(mesh, f)
    r[classify_boundary(mesh).boundary] = 0.0
    return r


def fem_energy(mesh: Mesh, tensor: ElasticityTensor, u: np.ndarray, f=None) -> float:
    """Continuum energy 0.5 a(u,u) - <f,u> of the interpolant of ``u``.

    Uses per-element stresses and the vertex quadrature for the load,
    the same rule the spring route uses, so the two energies agree for
    displacements vanishing on the boundary.
    """
    u = np.asarray(u, dtype=float)
    grads = mesh.gradients()
    vols = mesh.volumes()
    u_elem = u[mesh.elements]
    grad_u = np.einsum("mvp,mvq->mpq", u_elem, grads)
    strain = 0.5 * (grad_u + np.transpose(grad_u, (0, 2, 1)))
    stress = np.einsum("pqrs,mrs->mpq", tensor.c, strain)
    internal = 0.5 * float(np.einsum("m,mpq,mpq->", vols, stress, strain))
    work = float(np.einsum("nd,nd->", load_vector(mesh, f), u))
    return internal - work


# ---------------------------------------------------------------------------
# Chain solvability


@dataclass(frozen=True)
class SolvabilityReport:
    """Result of the positive-definite chain reachability check.

    ``certified`` means every interior block connects to the pinned
    boundary through springs with positive-definite constants, which
    guarantees step-by-step solvability of the force balance.  An
    uncertified system may still be solvable; the check is one-sided.
    """

    certified: bool
    uncertified_nodes: np.ndarray


def solvability_check(system: SpringBlockSystem) -> SolvabilityReport:
    """Breadth-first reachability from the boundary over pd springs."""
    sym = 0.5 * (system.constants + np.transpose(system.constants, (0, 2, 1)))
    pd, _, _ = classify_pd_batch(sym, system.scale)
    pd = pd & system.active

    n = system.mesh.num_nodes
    adj: list[list[int]] = [[] for _ in range(n)]
    for s, p in enumerate(system.pairs):
        if pd[s]:
            adj[p.i].append(p.j)
            adj[p.j].append(p.i)

    seen = system.partition.is_boundary.copy()
    stack = list(system.partition.boundary)
    while stack:
        node = stack.pop()
        for other in adj[node]:
            if not seen[other]:
                seen[other] = True
                stack.append(other)
    missing = np.nonzero(~seen)[0]
    return SolvabilityReport(certified=missing.size == 0, uncertified_nodes=missing)


def displacement_csv(mesh: Mesh, u: np.ndarray) -> str:
    """Per-node displacements with coordinates as CSV, 17 significant digits."""
    d = mesh.dim
    cols = ["node", "x", "y", "z"][: 1 + d] + [f"u{k + 1}" for k in range(d)]
    lines = [",".join(cols)]
    for n in range(mesh.num_nodes):
        vals = [str(n)]
        vals += [f"{x:.17g}" for x in mesh.nodes[n]]
        vals += [f"{x:.17g}" for x in u[n]]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def write_displacement_csv(path, mesh: Mesh, u: np.ndarray) -> None:
    """Write the displacement CSV to a file."""
    Path(path).write_text(displacement_csv(mesh, u))
