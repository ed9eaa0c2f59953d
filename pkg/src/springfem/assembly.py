"""Assembly of tensor-valued spring constants and load data.

For nodes i, j sharing at least one element, the spring constant is the
d x d matrix

    K_ij[k,l] = - sum_alpha |T_a| sum_{q,s} C[k,l,q,s] g_i[q] g_j[s]

where g_i, g_j are the hat-function gradients of the two nodes on the
incident element T_a and C is the symmetrized coefficient array of the
stiffness tensor.  All integrands are constant per element, so the sums
are exact; no quadrature error enters anywhere in this module.

For isotropic materials the same matrix splits into a purely geometric
part and a multiple of the identity:

    K_ij = (lam + mu) * A_ij + mu * gamma_ij * I,
    A_ij[k,l] = - sum_alpha |T_a| g_j[k] g_i[l],   gamma_ij = trace(A_ij).

Element sums run in ascending element order, so results are
deterministic and reruns are bit-identical.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .elasticity import ElasticityTensor, symmetrized_coeff_tensor
from .errors import MeshError
from .mesh import BoundaryPartition, Mesh, SpringPair, classify_boundary, spring_adjacency


@dataclass(frozen=True)
class SpringConstant:
    """Spring constant matrix for one node pair (oriented i -> j)."""

    pair: SpringPair
    matrix: np.ndarray


@dataclass(frozen=True)
class IsotropicDecomposition:
    """Geometric part A and its trace gamma for one node pair."""

    pair: SpringPair
    a: np.ndarray
    gamma: float


@dataclass(frozen=True)
class LoadData:
    """Nodal loads and boundary displacements.

    ``forces`` holds the hat-function load of every node (only interior
    rows enter force balances); ``boundary_values`` holds the prescribed
    displacement of every node (only boundary rows are used).
    """

    forces: np.ndarray
    boundary_values: np.ndarray
    partition: BoundaryPartition


def _pair_keys(pairs: list[SpringPair], num_nodes: int) -> np.ndarray:
    return np.array([p.i * num_nodes + p.j for p in pairs], dtype=np.int64)


def _local_pair_data(mesh: Mesh, a: int, b: int):
    """Per-element data for local vertex pair (a, b): ordered global ids
    and the gradients belonging to the smaller / larger id."""
    elems = mesh.elements
    grads = mesh.gradients()
    ga, gb = grads[:, a, :], grads[:, b, :]
    na, nb = elems[:, a], elems[:, b]
    swap = na > nb
    lo = np.where(swap, nb, na)
    hi = np.where(swap, na, nb)
    g_lo = np.where(swap[:, None], gb, ga)
    g_hi = np.where(swap[:, None], ga, gb)
    return lo, hi, g_lo, g_hi


def spring_constants_all(
    mesh: Mesh,
    tensor: ElasticityTensor,
    pairs: list[SpringPair] | None = None,
    reverse: bool = False,
) -> np.ndarray:
    """Spring constants of all pairs, stacked (S, d, d) in pair order.

    With ``reverse=True`` the matrices of the reversed orientation
    K_ji are assembled independently (not transposed copies), which is
    what symmetry checks compare against.
    """
    if tensor.dim != mesh.dim:
        raise MeshError(f"tensor dim {tensor.dim} does not match mesh dim {mesh.dim}")
    if pairs is None:
        pairs = spring_adjacency(mesh)
    cs = symmetrized_coeff_tensor(tensor)
    keys = _pair_keys(pairs, mesh.num_nodes)
    vols = mesh.volumes()
    out = np.zeros((len(pairs), mesh.dim, mesh.dim))
    for a, b in itertools.combinations(range(mesh.dim + 1), 2):
        lo, hi, g_lo, g_hi = _local_pair_data(mesh, a, b)
        rows = np.searchsorted(keys, lo * mesh.num_nodes + hi)
        g_i, g_j = (g_hi, g_lo) if reverse else (g_lo, g_hi)
        contrib = -np.einsum("klqs,eq,es,e->ekl", cs, g_i, g_j, vols)
        np.add.at(out, rows, contrib)
    return out


def spring_constant(mesh: Mesh, tensor: ElasticityTensor, pair: SpringPair) -> SpringConstant:
    """Spring constant of one pair, summed in ascending element order."""
    matrix = _spring_matrix(mesh, tensor, pair.i, pair.j, pair.elements)
    return SpringConstant(pair=pair, matrix=matrix)


def _spring_matrix(mesh, tensor, i, j, element_ids):
    if tensor.dim != mesh.dim:
        raise MeshError(f"tensor dim {tensor.dim} does not match mesh dim {mesh.dim}")
    cs = symmetrized_coeff_tensor(tensor)
    vols = mesh.volumes()
    grads = mesh.gradients()
    k = np.zeros((mesh.dim, mesh.dim))
    for e in sorted(element_ids):
        elem = list(mesh.elements[e])
        g_i = grads[e, elem.index(i), :]
        g_j = grads[e, elem.index(j), :]
        k -= vols[e] * np.einsum("klqs,q,s->kl", cs, g_i, g_j)
    return k


def decompositions_all(
    mesh: Mesh, pairs: list[SpringPair] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Geometric parts of all pairs: stacked A (S, d, d) and gamma (S,)."""
    if pairs is None:
        pairs = spring_adjacency(mesh)
    keys = _pair_keys(pairs, mesh.num_nodes)
    vols = mesh.volumes()
    a_stack = np.zeros((len(pairs), mesh.dim, mesh.dim))
    for a, b in itertools.combinations(range(mesh.dim + 1), 2):
        lo, hi, g_lo, g_hi = _local_pair_data(mesh, a, b)
        rows = np.searchsorted(keys, lo * mesh.num_nodes + hi)
        contrib = -np.einsum("ek,el,e->ekl", g_hi, g_lo, vols)
        np.add.at(a_stack, rows, contrib)
    gamma = np.trace(a_stack, axis1=1, axis2=2)
    return a_stack, gamma


def isotropic_decomposition(mesh: Mesh, pair: SpringPair) -> IsotropicDecomposition:
    """Geometric part A_ij and gamma = trace(A_ij) for one pair."""
    vols = mesh.volumes()
    grads = mesh.gradients()
    a = np.zeros((mesh.dim, mesh.dim))
    for e in sorted(pair.elements):
        elem = list(mesh.elements[e])
        g_i = grads[e, elem.index(pair.i), :]
        g_j = grads[e, elem.index(pair.j), :]
        a -= vols[e] * np.outer(g_j, g_i)
    return IsotropicDecomposition(pair=pair, a=a, gamma=float(np.trace(a)))


def decomposition_matrix(a: np.ndarray, gamma, lam: float, mu: float) -> np.ndarray:
    """Rebuild spring constants from the geometric split.

    K = lam A^T + mu A + mu gamma I; when A is symmetric (pairs with an
    interior endpoint) this is the familiar (lam + mu) A + mu gamma I.
    Works on a single (d, d) matrix or a stacked (S, d, d) array.
    """
    d = a.shape[-1]
    eye = np.eye(d)
    at = np.swapaxes(a, -1, -2)
    if a.ndim == 2:
        return lam * at + mu * a + mu * float(gamma) * eye
    return lam * at + mu * a + mu * np.asarray(gamma)[:, None, None] * eye


def diagonal_constant(mesh: Mesh, tensor: ElasticityTensor, node: int) -> np.ndarray:
    """Diagonal matrix K_ii = - sum over neighbours of K_ij.

    Neighbour terms are assembled per pair in ascending neighbour order.
    """
    if not 0 <= node < mesh.num_nodes:
        raise MeshError(f"node index {node} out of range")
    total = np.zeros((mesh.dim, mesh.dim))
    for pair in spring_adjacency(mesh):
        if node == pair.i:
            total += _spring_matrix(mesh, tensor, pair.i, pair.j, pair.elements)
        elif node == pair.j:
            total += _spring_matrix(mesh, tensor, pair.j, pair.i, pair.elements)
    return -total


def diagonal_constants_direct(mesh: Mesh, tensor: ElasticityTensor) -> np.ndarray:
    """Diagonal matrices assembled straight from the bilinear form.

    Independent of the neighbour sums: K_ii[k,l] is assembled as the
    negated energy pairing of hat displacements phi_i e_l and phi_i e_k,
    element by element.  Stacked (N, d, d).
    """
    cs = symmetrized_coeff_tensor(tensor)
    vols = mesh.volumes()
    grads = mesh.gradients()
    out = np.zeros((mesh.num_nodes, mesh.dim, mesh.dim))
    for v in range(mesh.dim + 1):
        g = grads[:, v, :]
        contrib = -np.einsum("klqs,eq,es,e->ekl", cs, g, g, vols)
        np.add.at(out, mesh.elements[:, v], contrib)
    return out


# ---------------------------------------------------------------------------
# Loads and boundary data


def as_node_field(f, mesh: Mesh) -> np.ndarray:
    """Evaluate a field spec at all nodes, returning (N, d).

    Accepts None (zero field), a length-d constant vector, an (N, d)
    array, or a callable mapping an (N, d) coordinate array to (N, d)
    values.
    """
    n, d = mesh.num_nodes, mesh.dim
    if f is None:
        return np.zeros((n, d))
    if callable(f):
        values = np.asarray(f(mesh.nodes), dtype=float)
    else:
        values = np.asarray(f, dtype=float)
        if values.shape == (d,):
            values = np.tile(values, (n, 1))
    if values.shape != (n, d):
        raise MeshError(f"field values must have shape ({n}, {d}), got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise MeshError("non-finite field value")
    return values


def vertex_weights(mesh: Mesh) -> np.ndarray:
    """Integration weight of each hat function: sum |T_a| / (d+1)."""
    w = np.zeros(mesh.num_nodes)
    share = mesh.volumes() / (mesh.dim + 1)
    for v in range(mesh.dim + 1):
        np.add.at(w, mesh.elements[:, v], share)
    return w


def load_vector(mesh: Mesh, f) -> np.ndarray:
    """Nodal loads F_i = f(P_i) * sum |T_a| / (d+1) for every node.

    This is the vertex quadrature of the hat-weighted load integral; it
    is exact whenever f is constant on every incident element.
    """
    return vertex_weights(mesh)[:, None] * as_node_field(f, mesh)


def dirichlet_values(mesh: Mesh, g, partition: BoundaryPartition | None = None) -> np.ndarray:
    """Prescribed displacements, nonzero only on boundary rows, (N, d)."""
    if partition is None:
        partition = classify_boundary(mesh)
    values = np.zeros((mesh.num_nodes, mesh.dim))
    gv = as_node_field(g, mesh)
    values[partition.boundary] = gv[partition.boundary]
    return values


def load_data(mesh: Mesh, f=None, g=None, partition: BoundaryPartition | None = None) -> LoadData:
    """Bundle nodal loads and boundary displacements for a mesh."""
    if partition is None:
        partition = classify_boundary(mesh)
    return LoadData(
        forces=load_vector(mesh, f),
        boundary_values=dirichlet_values(mesh, g, partition),
        partition=partition,
    )
