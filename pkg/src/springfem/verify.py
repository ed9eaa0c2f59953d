"""Self-verification suites over the built-in mesh battery.

Each group exercises one structural guarantee through two independent
code routes and reports (cases, failures, max deviation):

- symmetry: forward vs independently assembled reverse spring
  constants on interior pairs, plus transpose duality on all pairs.
- row-sum: diagonal constants assembled straight from the bilinear
  form against the negated neighbour sums.
- pd-equivalence: eigenvalue classification of the spring constant
  against the geometric criterion on the shifted eigenvalues, across
  the full default ratio grid.
- angle-implication: wherever the opening-angle condition certifies a
  spring, the eigenvalue classification must agree.
- projection-bound: closed-form maximum of (a.x)(b.x) over unit x
  against a dense direction grid.
- system-equivalence: spring-form force balance against the continuum
  weak form, residuals, energies and solver exactness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import (
    ANGLE_GUARD,
    PD_REL_TOL,
    classify_springs,
    decompositions_all_cached,
    projection_product_grid_max,
    projection_product_max,
    spring_min_cosines,
    sym_eigenvalues_batch,
)
from .assembly import decomposition_matrix, diagonal_constants_direct, spring_constants_all
from .elasticity import (
    isotropic_tensor,
    material_from_poisson,
    random_full_symmetric_tensor,
)
from .mesh import (
    cube_kuhn,
    equilateral,
    jitter,
    patch_equilateral,
    patch_regular_tet_ring,
    patch_square,
    spring_adjacency,
    square_right,
)
from .reporting import DEFAULT_NU_GRID
from .system import (
    build_system,
    energy,
    bilinear_k,
    fem_energy,
    fem_residual,
    residual_bound,
    solve,
    spring_residual,
)

SYMMETRY_TOL = 1e-10
DUALITY_TOL = 1e-12
ROW_SUM_TOL = 1e-12
IDENTITY_TOL = 1e-10


@dataclass(frozen=True)
class VerifyGroup:
    """Outcome of one verification group."""

    name: str
    cases: int
    failures: int
    max_error: float

    @property
    def status(self) -> str:
        return "ok" if self.failures == 0 else "FAIL"


def _battery():
    return [
        ("patch_square", patch_square()),
        ("patch_equilateral", patch_equilateral()),
        ("square_right:4", square_right(4)),
        ("equilateral:5", equilateral(5)),
        ("square_right:5+jitter", jitter(square_right(5), 0.12, seed=3)),
        ("equilateral:4+jitter", jitter(equilateral(4), 0.1, seed=7)),
        ("patch_regular_tet_ring", patch_regular_tet_ring()),
        ("cube_kuhn:2", cube_kuhn(2)),
        ("cube_kuhn:2+jitter", jitter(cube_kuhn(2), 0.08, seed=11)),
    ]


def _tensors_for(dim: int):
    out = [isotropic_tensor(material_from_poisson(nu), dim) for nu in (-0.5, 0.0, 0.3)]
    out += [random_full_symmetric_tensor(dim, seed) for seed in (0, 1)]
    return out


def group_symmetry() -> VerifyGroup:
    cases = failures = 0
    worst = 0.0
    for _, mesh in _battery():
        pairs = spring_adjacency(mesh)
        interior = np.array([p.interior_pair for p in pairs])
        for tensor in _tensors_for(mesh.dim):
            fwd = spring_constants_all(mesh, tensor, pairs)
            rev = spring_constants_all(mesh, tensor, pairs, reverse=True)
            norms = np.linalg.norm(fwd, axis=(1, 2))
            scale = float(norms.max())

            if np.any(interior):
                denom = np.maximum(norms[interior], 1e-300)
                rel = np.linalg.norm((fwd - rev)[interior], axis=(1, 2)) / denom
                cases += int(interior.sum())
                failures += int(np.count_nonzero(rel > SYMMETRY_TOL))
                worst = max(worst, float(rel.max()))

            dual = np.linalg.norm(rev - np.transpose(fwd, (0, 2, 1)), axis=(1, 2))
            rel_dual = dual / np.maximum(norms, scale * 1e-3)
            cases += len(pairs)
            failures += int(np.count_nonzero(rel_dual > DUALITY_TOL))
            worst = max(worst, float(rel_dual.max()))
    return VerifyGroup("symmetry", cases, failures, worst)


def group_row_sum() -> VerifyGroup:
    cases = failures = 0
    worst = 0.0
    for _, mesh in _battery():
        pairs = spring_adjacency(mesh)
        idx_i = np.array([p.i for p in pairs])
        idx_j = np.array([p.j for p in pairs])
        tensors = [isotropic_tensor(material_from_poisson(0.3), mesh.dim)]
        tensors.append(random_full_symmetric_tensor(mesh.dim, 5))
        for tensor in tensors:
            diag = diagonal_constants_direct(mesh, tensor)
            acc = np.zeros_like(diag)
            np.add.at(acc, idx_i, spring_constants_all(mesh, tensor, pairs))
            np.add.at(acc, idx_j, spring_constants_all(mesh, tensor, pairs, reverse=True))
            resid = np.linalg.norm(diag + acc, axis=(1, 2))
            scale = float(np.linalg.norm(diag, axis=(1, 2)).max())
            rel = resid / scale
            cases += mesh.num_nodes
            failures += int(np.count_nonzero(rel > ROW_SUM_TOL))
            worst = max(worst, float(rel.max()))
    return VerifyGroup("row-sum", cases, failures, worst)


def group_pd_equivalence() -> VerifyGroup:
    cases = failures = 0
    worst = 0.0
    for _, mesh in _battery():
        pairs = spring_adjacency(mesh)
        a_stack, gamma = decompositions_all_cached(mesh, pairs)
        eta_min = sym_eigenvalues_batch(a_stack)[:, -1]
        for nu in DEFAULT_NU_GRID:
            material = material_from_poisson(float(nu))
            lam, mu = material.lam, material.mu
            pd, margin, scale = classify_springs(a_stack, gamma, material)
            ks = decomposition_matrix(a_stack, gamma, lam, mu)
            tol = PD_REL_TOL * np.maximum(np.linalg.norm(ks, axis=(1, 2)), scale)
            predicted = -eta_min < gamma * mu / (lam + mu) - tol / (lam + mu)
            hard = (predicted != pd) & (np.abs(margin) > 2.0 * tol)
            cases += len(pairs)
            failures += int(np.count_nonzero(hard))
            if np.any(hard):
                worst = max(worst, float(np.abs(margin[hard]).max()))
    return VerifyGroup("pd-equivalence", cases, failures, worst)


def group_angle_implication() -> VerifyGroup:
    meshes = [
        equilateral(6),
        square_right(6),
        jitter(square_right(6), 0.1, seed=5),
        patch_equilateral(),
        cube_kuhn(2),
        jitter(cube_kuhn(2), 0.08, seed=9),
        patch_regular_tet_ring(),
    ]
    cases = failures = 0
    worst = 0.0
    for mesh in meshes:
        pairs = spring_adjacency(mesh)
        a_stack, gamma = decompositions_all_cached(mesh, pairs)
        min_cos = spring_min_cosines(mesh, pairs)
        for nu in DEFAULT_NU_GRID:
            material = material_from_poisson(float(nu))
            pd, margin, _ = classify_springs(a_stack, gamma, material)
            certified = min_cos > 1.0 / (3.0 - 4.0 * float(nu)) + ANGLE_GUARD
            counterexamples = certified & ~pd
            cases += len(pairs)
            failures += int(np.count_nonzero(counterexamples))
            if np.any(counterexamples):
                worst = max(worst, float(-margin[counterexamples].min()))
    return VerifyGroup("angle-implication", cases, failures, worst)


def group_projection_bound() -> VerifyGroup:
    rng = np.random.default_rng(20240817)
    cases = failures = 0
    worst = 0.0

    def check(a, b, samples, tol):
        nonlocal cases, failures, worst
        res = projection_product_max(a, b)
        grid = projection_product_grid_max(a, b, samples)
        achieved = float((a @ res.argmax) * (b @ res.argmax))
        bad = (
            grid > res.value + 1e-12
            or res.value - grid > tol
            or abs(achieved - res.value) > 1e-12
        )
        cases += 1
        failures += int(bad)
        worst = max(worst, abs(res.value - grid), abs(achieved - res.value))

    for t in range(100):
        dim = 2 if t % 2 == 0 else 3
        a = rng.standard_normal(dim)
        b = rng.standard_normal(dim)
        a /= np.linalg.norm(a)
        b /= np.linalg.norm(b)
        check(a, b, 10**4 if dim == 2 else 10**5, 1e-6 if dim == 2 else 1e-3)

    for dim in (2, 3):
        e = np.zeros(dim)
        e[0] = 1.0
        same = projection_product_max(e, e)
        anti = projection_product_max(e, -e)
        for res, expect in ((same, 1.0), (anti, 0.0)):
            cases += 1
            err = abs(res.value - expect)
            failures += int(err > 1e-12)
            worst = max(worst, err)
        failures += int(abs(float(e @ anti.argmax)) > 1e-12)
    return VerifyGroup("projection-bound", cases, failures, worst)


def _system_configs():
    rng = np.random.default_rng(7)
    b2 = rng.standard_normal((2, 2))
    c2 = rng.standard_normal(2)
    b3 = rng.standard_normal((3, 3))
    c3 = rng.standard_normal(3)
    return [
        (square_right(4), 0.3, np.array([0.0, -1.0]), None),
        (equilateral(4), 0.1, lambda x: x @ b2.T + c2, lambda x: x @ b2.T - c2),
        (cube_kuhn(2), 0.2, np.array([0.0, 0.0, -1.0]), lambda x: x @ b3.T + c3),
        (square_right(2), -0.3, np.array([1.0, 0.5]), np.array([0.1, -0.2])),
    ]


def group_system_equivalence() -> VerifyGroup:
    cases = failures = 0
    worst = 0.0

    def record(err, tol):
        nonlocal cases, failures, worst
        cases += 1
        failures += int(err > tol)
        worst = max(worst, err)

    rng = np.random.default_rng(13)
    for mesh, nu, f, g in _system_configs():
        material = material_from_poisson(nu)
        tensor = isotropic_tensor(material, mesh.dim)
        system = build_system(mesh, material, f=f, g=g)
        bound = residual_bound(system)
        fmax = float(np.abs(system.loads.forces).max())

        u = solve(system)
        r_spring = spring_residual(system, u)
        record(float(np.abs(r_spring).max()), bound)
        r_fem = fem_residual(mesh, tensor, u, f)
        record(float(np.abs(r_spring + r_fem).max()), bound)

        for _ in range(3):
            w = rng.uniform(-1.0, 1.0, u.shape)
            r_s = spring_residual(system, w)
            r_f = fem_residual(mesh, tensor, w, f)
            tol = IDENTITY_TOL * max(1.0, system.scale * float(np.abs(w).max()), fmax)
            record(float(np.abs(r_s + r_f).max()), tol)

            # energy identities hold for fields vanishing on the pinned set:
            # springs joining two pinned nodes need not be symmetric matrices
            w0 = w.copy()
            w0[system.partition.boundary] = 0.0
            e_spring = energy(system, w0)
            e_fem = fem_energy(mesh, tensor, w0, f)
            record(abs(e_spring - e_fem), IDENTITY_TOL * (1.0 + abs(e_fem)))

            quad = bilinear_k(system, w0, w0)
            quad_fem = 2.0 * fem_energy(mesh, tensor, w0, None)
            record(abs(quad - quad_fem), IDENTITY_TOL * (1.0 + abs(quad_fem)))

        shift = np.arange(1, mesh.dim + 1, dtype=float) / 10.0
        shifted = build_system(
            mesh,
            material,
            f=f,
            g=lambda x, g=g, shift=shift: (
                np.tile(shift, (x.shape[0], 1))
                if g is None
                else (g(x) if callable(g) else np.tile(np.asarray(g), (x.shape[0], 1))) + shift
            ),
        )
        u2 = solve(shifted)
        record(float(np.abs(u2 - (u + shift)).max()), 1e-8 * (1.0 + float(np.abs(u).max())))
    return VerifyGroup("system-equivalence", cases, failures, worst)


GROUPS = {
    "symmetry": group_symmetry,
    "row-sum": group_row_sum,
    "pd-equivalence": group_pd_equivalence,
    "angle-implication": group_angle_implication,
    "projection-bound": group_projection_bound,
    "system-equivalence": group_system_equivalence,
}


def verify_all(names=None) -> list[VerifyGroup]:
    """Run the named verification groups (all of them by default)."""
    if names is None:
        names = list(GROUPS)
    unknown = [n for n in names if n not in GROUPS]
    if unknown:
        raise ValueError(f"unknown verification group(s): {', '.join(unknown)}")
    return [GROUPS[name]() for name in names]


def verify_csv(groups) -> str:
    """Render group results as CSV with a status column."""
    lines = ["group,cases,failures,max_error,status"]
    for g in groups:
        lines.append(f"{g.name},{g.cases},{g.failures},{g.max_error:.3e},{g.status}")
    return "\n".join(lines) + "\n"
