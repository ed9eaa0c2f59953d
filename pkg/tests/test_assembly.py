import math

import numpy as np
import pytest

import oracles
from springfem.assembly import (
    as_node_field,
    decomposition_matrix,
    decompositions_all,
    diagonal_constant,
    diagonal_constants_direct,
    dirichlet_values,
    isotropic_decomposition,
    load_data,
    load_vector,
    spring_constant,
    spring_constants_all,
    vertex_weights,
)
from springfem.elasticity import (
    ElasticityTensor,
    IsotropicMaterial,
    isotropic_tensor,
    material_from_poisson,
    random_full_symmetric_tensor,
)
from springfem.errors import MeshError
from springfem.mesh import (
    Mesh,
    classify_boundary,
    cube_kuhn,
    equilateral,
    jitter,
    patch_equilateral,
    patch_square,
    spring_adjacency,
    square_right,
)

S3 = math.sqrt(3.0)


def pair_by_nodes(mesh, i, j):
    for p in spring_adjacency(mesh):
        if (p.i, p.j) == (i, j):
            return p
    raise AssertionError(f"no spring ({i}, {j})")


CROSS_MESHES = [
    ("jittered-square", jitter(square_right(3), 0.12, 3)),
    ("equilateral", equilateral(2)),
    ("jittered-cube", jitter(cube_kuhn(2), 0.08, 11)),
    ("patch-eq", patch_equilateral()),
]


class TestFrozenPatchValues:
    def test_square_diagonal_spring(self):
        mesh = patch_square()
        dec = isotropic_decomposition(mesh, pair_by_nodes(mesh, 0, 2))
        assert np.abs(dec.a - np.array([[0.0, 0.5], [0.5, 0.0]])).max() < 1e-15
        assert dec.gamma == pytest.approx(0.0, abs=1e-15)
        k = spring_constant(
            mesh, isotropic_tensor(IsotropicMaterial(1.0, 1.0), 2), pair_by_nodes(mesh, 0, 2)
        )
        assert np.abs(k.matrix - np.array([[0.0, 1.0], [1.0, 0.0]])).max() < 1e-14

    def test_equilateral_shared_spring(self):
        mesh = patch_equilateral()
        dec = isotropic_decomposition(mesh, pair_by_nodes(mesh, 0, 1))
        expected = np.array([[S3 / 2.0, 0.0], [0.0, -S3 / 6.0]])
        assert np.abs(dec.a - expected).max() < 1e-14
        assert dec.gamma == pytest.approx(S3 / 3.0, rel=1e-14)

    def test_single_element_spring_rank(self):
        # a one-element isotropic A-matrix is a scaled outer product
        mesh = patch_square()
        dec = isotropic_decomposition(mesh, pair_by_nodes(mesh, 0, 1))
        assert np.linalg.matrix_rank(dec.a, tol=1e-12) == 1


class TestAgainstStrainRoute:
    @pytest.mark.parametrize("label,mesh", CROSS_MESHES, ids=[m[0] for m in CROSS_MESHES])
    def test_all_pairs_match_oracle(self, label, mesh):
        tensors = [
            isotropic_tensor(material_from_poisson(0.3), mesh.dim),
            isotropic_tensor(material_from_poisson(-0.5), mesh.dim),
            random_full_symmetric_tensor(mesh.dim, seed=1),
            random_full_symmetric_tensor(mesh.dim, seed=2),
        ]
        pairs = spring_adjacency(mesh)
        for tensor in tensors:
            ks = spring_constants_all(mesh, tensor)
            scale = np.abs(ks).max()
            for s, p in enumerate(pairs):
                ref = oracles.spring_block(mesh, tensor.c, p.i, p.j)
                assert np.abs(ks[s] - ref).max() <= 1e-12 * scale

    def test_single_pair_matches_batch(self):
        mesh = jitter(equilateral(3), 0.1, 5)
        tensor = random_full_symmetric_tensor(2, seed=3)
        ks = spring_constants_all(mesh, tensor)
        scale = np.abs(ks).max()
        for s, p in enumerate(spring_adjacency(mesh)):
            got = spring_constant(mesh, tensor, p)
            assert np.abs(got.matrix - ks[s]).max() <= 1e-15 * scale
            assert got.pair is p


class TestDuality:
    @pytest.mark.parametrize("label,mesh", CROSS_MESHES, ids=[m[0] for m in CROSS_MESHES])
    def test_reverse_is_transpose(self, label, mesh):
        tensor = random_full_symmetric_tensor(mesh.dim, seed=8)
        fwd = spring_constants_all(mesh, tensor)
        rev = spring_constants_all(mesh, tensor, reverse=True)
        scale = np.abs(fwd).max()
        assert np.abs(rev - np.transpose(fwd, (0, 2, 1))).max() <= 1e-12 * scale

    def test_holds_with_major_symmetry_only(self):
        rng = np.random.default_rng(17)
        c = rng.normal(size=(2, 2, 2, 2))
        c = 0.5 * (c + c.transpose(2, 3, 0, 1))
        tensor = ElasticityTensor(2, c)
        mesh = jitter(square_right(2), 0.1, 1)
        fwd = spring_constants_all(mesh, tensor)
        rev = spring_constants_all(mesh, tensor, reverse=True)
        assert np.abs(rev - np.transpose(fwd, (0, 2, 1))).max() <= 1e-12 * np.abs(fwd).max()


class TestIsotropicDecomposition:
    @pytest.mark.parametrize("nu", [-0.7, -0.5, 0.0, 0.25, 0.45])
    def test_matches_tensor_route(self, nu):
        material = material_from_poisson(nu, mu=1.3)
        for mesh in (jitter(equilateral(3), 0.1, 2), jitter(cube_kuhn(2), 0.06, 4)):
            tensor = isotropic_tensor(material, mesh.dim)
            ks = spring_constants_all(mesh, tensor)
            a_stack, gamma = decompositions_all(mesh)
            rebuilt = decomposition_matrix(a_stack, gamma, material.lam, material.mu)
            assert np.abs(rebuilt - ks).max() <= 1e-12 * np.abs(ks).max()

    def test_gamma_is_trace(self):
        mesh = jitter(equilateral(3), 0.12, 6)
        a_stack, gamma = decompositions_all(mesh)
        assert np.abs(gamma - np.trace(a_stack, axis1=1, axis2=2)).max() < 1e-14

    def test_single_matches_batch(self):
        mesh = equilateral(2)
        a_stack, gamma = decompositions_all(mesh)
        scale = np.abs(a_stack).max()
        for s, p in enumerate(spring_adjacency(mesh)):
            dec = isotropic_decomposition(mesh, p)
            assert np.abs(dec.a - a_stack[s]).max() <= 1e-15 * scale
            assert dec.gamma == pytest.approx(gamma[s], abs=1e-15 * scale)

    def test_decomposition_matrix_single(self):
        a = np.array([[0.0, 0.5], [0.5, 0.0]])
        k = decomposition_matrix(a, 0.0, 1.0, 1.0)
        assert np.abs(k - np.array([[0.0, 1.0], [1.0, 0.0]])).max() < 1e-15


class TestDiagonalConstants:
    def test_row_sum_identity(self):
        mesh = jitter(square_right(3), 0.1, 9)
        tensor = random_full_symmetric_tensor(2, seed=5)
        ks = spring_constants_all(mesh, tensor)
        pairs = spring_adjacency(mesh)
        direct = diagonal_constants_direct(mesh, tensor)
        scale = np.abs(direct).max()
        sums = np.zeros_like(direct)
        for s, p in enumerate(pairs):
            sums[p.i] += ks[s]
            # the constant of the reversed orientation is the transpose
            sums[p.j] += ks[s].T
        assert np.abs(direct + sums).max() <= 1e-12 * scale

    def test_single_node_matches_direct(self):
        mesh = jitter(cube_kuhn(2), 0.05, 13)
        tensor = isotropic_tensor(material_from_poisson(0.2), 3)
        direct = diagonal_constants_direct(mesh, tensor)
        for node in (0, 13, 20):
            got = diagonal_constant(mesh, tensor, node)
            assert np.abs(got - direct[node]).max() <= 1e-12 * np.abs(direct).max()

    def test_matches_fem_oracle_diagonal(self):
        mesh = jitter(square_right(2), 0.1, 15)
        tensor = random_full_symmetric_tensor(2, seed=6)
        big = oracles.fem_matrix(mesh, tensor.c)
        direct = diagonal_constants_direct(mesh, tensor)
        d = mesh.dim
        for i in range(mesh.num_nodes):
            block = big[i * d : i * d + d, i * d : i * d + d]
            assert np.abs(direct[i] + block).max() <= 1e-12 * np.abs(big).max()


class TestRigidMotion:
    def test_isotropic_covariance(self):
        base = jitter(equilateral(3), 0.1, 19)
        material = material_from_poisson(0.3)
        tensor = isotropic_tensor(material, 2)
        ks = spring_constants_all(base, tensor)
        rng = np.random.default_rng(23)
        q, _ = np.linalg.qr(rng.normal(size=(2, 2)))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        moved = Mesh(base.nodes @ q.T + np.array([2.0, -1.0]), base.elements)
        ks_moved = spring_constants_all(moved, tensor)
        expected = np.einsum("kp,spq,lq->skl", q, ks, q)
        assert np.abs(ks_moved - expected).max() <= 1e-10 * np.abs(ks).max()

    def test_translation_leaves_constants(self):
        base = jitter(cube_kuhn(2), 0.05, 29)
        tensor = random_full_symmetric_tensor(3, seed=7)
        moved = Mesh(base.nodes + np.array([10.0, -4.0, 0.5]), base.elements)
        a = spring_constants_all(base, tensor)
        b = spring_constants_all(moved, tensor)
        assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


class TestLoads:
    def test_center_vertex_weight(self):
        w = vertex_weights(square_right(2))
        assert w[4] == pytest.approx(0.25, rel=1e-14)

    def test_weights_sum_to_volume(self):
        for mesh in (equilateral(3), jitter(cube_kuhn(2), 0.06, 31)):
            assert vertex_weights(mesh).sum() == pytest.approx(
                mesh.volumes().sum(), rel=1e-13
            )

    def test_load_vector_matches_oracle(self):
        mesh = jitter(square_right(3), 0.1, 33)
        f = lambda x: np.stack([x[:, 0] ** 2, x[:, 1] - 2.0], axis=1)
        got = load_vector(mesh, f)
        ref = oracles.vertex_load(mesh, f(mesh.nodes))
        assert np.abs(got - ref).max() < 1e-14

    def test_zero_and_none_loads(self):
        mesh = equilateral(2)
        assert np.array_equal(load_vector(mesh, None), np.zeros((mesh.num_nodes, 2)))
        assert np.abs(load_vector(mesh, np.zeros(2))).max() == 0.0

    def test_as_node_field_variants(self):
        mesh = square_right(2)
        n = mesh.num_nodes
        assert np.array_equal(as_node_field(None, mesh), np.zeros((n, 2)))
        tiled = as_node_field(np.array([1.0, 2.0]), mesh)
        assert tiled.shape == (n, 2)
        assert np.all(tiled == [1.0, 2.0])
        full = np.arange(2 * n, dtype=float).reshape(n, 2)
        assert np.array_equal(as_node_field(full, mesh), full)
        fn = as_node_field(lambda x: x * 2.0, mesh)
        assert np.array_equal(fn, mesh.nodes * 2.0)

    def test_as_node_field_rejects_bad_shapes(self):
        mesh = square_right(2)
        with pytest.raises(MeshError):
            as_node_field(np.zeros(3), mesh)
        with pytest.raises(MeshError):
            as_node_field(np.zeros((4, 2)), mesh)
        with pytest.raises(MeshError):
            as_node_field(lambda x: np.zeros((2, 2)), mesh)
        with pytest.raises(MeshError):
            as_node_field(np.array([1.0, float("nan")]), mesh)

    def test_dirichlet_values_affine(self):
        mesh = square_right(3)
        b = np.array([[1.0, 2.0], [-0.5, 0.25]])
        c = np.array([0.1, -0.2])
        g = lambda x: x @ b.T + c
        part = classify_boundary(mesh)
        vals = dirichlet_values(mesh, g, part)
        assert np.abs(vals[part.boundary] - g(mesh.nodes[part.boundary])).max() < 1e-15
        assert np.abs(vals[part.interior]).max() == 0.0

    def test_load_data_bundle(self):
        mesh = square_right(2)
        part = classify_boundary(mesh)
        data = load_data(mesh, np.array([0.0, -1.0]), np.array([0.5, 0.0]), part)
        assert data.partition is part
        assert data.forces.shape == (9, 2)
        assert np.all(data.boundary_values[part.boundary] == [0.5, 0.0])
        assert np.abs(data.boundary_values[part.interior]).max() == 0.0
