"""Spectral analysis and positive-definiteness tests for spring constants.

A spring constant K_ij of an isotropic material splits as
K = (lam + mu) A + mu gamma I, so its eigenvalues are

    zeta_l = (lam + mu) eta_l + gamma mu,

where eta_l are the eigenvalues of the geometric part A.  Positive
definiteness is therefore equivalent to the purely geometric criterion

    -eta_min < gamma * mu / (lam + mu) = gamma (1 - 2 nu),

and a simple sufficient condition exists in terms of the opening angles
opposite the spring: if every incident element satisfies
cos(theta) > 1 / (3 - 4 nu), the spring constant is positive-definite.

Classification uses the relative tolerance tau = 1e-10 * max(|K|_F,
scale); values within tau of zero are classified *not* positive
definite, so boundary cases never certify.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .assembly import (
    _local_pair_data,
    _pair_keys,
    decomposition_matrix,
    decompositions_all,
    spring_constants_all,
)
from .elasticity import (
    NU_RANGE,
    IsotropicMaterial,
    isotropic_tensor,
    plane_stress_material,
)
from .errors import MaterialError
from .mesh import spring_adjacency

#: pd threshold: zeta_min must exceed 1e-10 * max(|K|_F, scale).
PD_REL_TOL = 1e-10

#: Sentinel (lo > hi) encoding an empty critical interval.
EMPTY_INTERVAL = (0.5, -1.0)

#: Strictness guard for the angle criterion: the cosine must clear the
#: threshold by this much.  Keeps bit-level noise at exact-equality
#: geometries (equilateral pairs at their threshold ratio) from
#: upgrading a boundary case to "certified".
ANGLE_GUARD = 1e-9

_JACOBI_REL_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 30


# ---------------------------------------------------------------------------
# Symmetric eigenvalues (d <= 3)


def _eig2_batch(m: np.ndarray) -> np.ndarray:
    a = m[:, 0, 0]
    c = m[:, 1, 1]
    b = 0.5 * (m[:, 0, 1] + m[:, 1, 0])
    mean = 0.5 * (a + c)
    radius = np.hypot(0.5 * (a - c), b)
    return np.stack([mean + radius, mean - radius], axis=1)


def _jacobi3_batch(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of symmetric 3x3 stacks by cyclic plane rotations.

    Fixed sweep order (0,1), (0,2), (1,2); iterates until every matrix
    has off-diagonal norm below 1e-14 of its initial Frobenius norm.
    """
    w = 0.5 * (m + np.transpose(m, (0, 2, 1)))
    # scale each matrix to unit max entry so squared terms cannot overflow
    scale = np.abs(w).max(axis=(1, 2))
    scale[scale == 0.0] = 1.0
    w = w / scale[:, None, None]
    target = _JACOBI_REL_TOL * np.linalg.norm(w, axis=(1, 2))
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = np.sqrt(
            w[:, 0, 1] ** 2 + w[:, 0, 2] ** 2 + w[:, 1, 2] ** 2
            + w[:, 1, 0] ** 2 + w[:, 2, 0] ** 2 + w[:, 2, 1] ** 2
        )
        if np.all(off <= target):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            r = 3 - p - q
            apq = w[:, p, q]
            nz = apq != 0.0
            if not np.any(nz):
                continue
            theta = np.zeros_like(apq)
            theta[nz] = 0.5 * (w[nz, q, q] - w[nz, p, p]) / apq[nz]
            t = np.zeros_like(apq)
            # theta**2 overflows past ~1e154; there t ~ 1/(2 theta)
            big = nz & (np.abs(theta) > 1e150)
            mid = nz & ~big
            t[mid] = np.sign(theta[mid]) / (np.abs(theta[mid]) + np.sqrt(theta[mid] ** 2 + 1.0))
            t[big] = 0.5 / theta[big]
            t[nz & (theta == 0.0)] = 1.0
            c = 1.0 / np.sqrt(t**2 + 1.0)
            s = t * c
            app = w[:, p, p] - t * apq
            aqq = w[:, q, q] + t * apq
            arp = c * w[:, r, p] - s * w[:, r, q]
            arq = s * w[:, r, p] + c * w[:, r, q]
            w[:, p, p] = app
            w[:, q, q] = aqq
            w[:, p, q] = w[:, q, p] = 0.0
            w[:, r, p] = w[:, p, r] = arp
            w[:, r, q] = w[:, q, r] = arq
    diag = np.stack([w[:, 0, 0], w[:, 1, 1], w[:, 2, 2]], axis=1)
    return -np.sort(-diag, axis=1) * scale[:, None]


def sym_eigenvalues_batch(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a stack of symmetric matrices, descending, (S, d)."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 3 or m.shape[1] != m.shape[2] or m.shape[1] not in (1, 2, 3):
        raise ValueError(f"expected stack of square matrices of size <= 3, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite matrix entry")
    d = m.shape[1]
    if d == 1:
        return m[:, :, 0].copy()
    m = 0.5 * (m + np.transpose(m, (0, 2, 1)))
    if d == 2:
        return _eig2_batch(m)
    return _jacobi3_batch(m)


def sym_eigenvalues(matrix: np.ndarray) -> np.ndarray:
    """Eigenvalues of one symmetric matrix (d <= 3), descending.

    The input is symmetrized as (M + M^T)/2 first.  The 2x2 case uses
    the exact closed form; 3x3 uses cyclic plane rotations driven to
    off-diagonal norm below 1e-14 of the input norm.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    return sym_eigenvalues_batch(matrix[None, :, :])[0]


# ---------------------------------------------------------------------------
# Positive definiteness


@dataclass(frozen=True)
class PdResult:
    """Classification of one matrix: smallest eigenvalue vs tolerance."""

    pd: bool
    margin: float
    tol: float


def classify_pd_batch(ks: np.ndarray, scale: float = 0.0):
    """Classify a stack of matrices; returns (pd, margin, tol) arrays."""
    eig = sym_eigenvalues_batch(ks)
    margin = eig[:, -1]
    norms = np.linalg.norm(ks, axis=(1, 2))
    tol = PD_REL_TOL * np.maximum(norms, scale)
    return margin > tol, margin, tol


def classify_pd(matrix: np.ndarray, scale: float = 0.0) -> PdResult:
    """Classify one symmetric matrix as positive-definite or not.

    ``scale`` feeds the relative tolerance so near-zero matrices on a
    mesh with springs of typical size ``scale`` never self-certify.
    Any margin within tolerance of zero classifies as not pd.
    """
    matrix = np.asarray(matrix, dtype=float)
    pd, margin, tol = classify_pd_batch(matrix[None, :, :], scale)
    return PdResult(pd=bool(pd[0]), margin=float(margin[0]), tol=float(tol[0]))


@dataclass(frozen=True)
class ExactPdCheck:
    """Geometric positive-definiteness criterion, exact form.

    ``lhs`` is -eta_min of the geometric part, ``rhs`` is
    gamma * mu / (lam + mu); the spring constant is positive-definite
    exactly when lhs < rhs.
    """

    pd_predicted: bool
    lhs: float
    rhs: float


def pd_exact_check(
    a: np.ndarray, gamma: float, material: IsotropicMaterial, scale: float = 0.0
) -> ExactPdCheck:
    """Evaluate the exact eigenvalue criterion for one geometric part.

    Uses the same relative tolerance as classify_pd (transferred through
    the eigenvalue shift), so the two agree wherever the margin is not
    within tolerance of the threshold.
    """
    a = np.asarray(a, dtype=float)
    lam, mu = material.lam, material.mu
    eta = sym_eigenvalues(a)
    lhs = -float(eta[-1])
    rhs = float(gamma) * mu / (lam + mu)
    k = decomposition_matrix(a, gamma, lam, mu)
    tol = PD_REL_TOL * max(float(np.linalg.norm(k)), scale) / (lam + mu)
    return ExactPdCheck(pd_predicted=lhs < rhs - tol, lhs=lhs, rhs=rhs)


def pd_angle_check(angles, nu: float, guard: float = ANGLE_GUARD) -> bool:
    """Sufficient angle condition for positive definiteness.

    True when every opening angle opposite the spring satisfies
    cos(theta) > 1 / (3 - 4 nu) by more than ``guard``.  Certifies
    positive definiteness; a False result decides nothing.
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size == 0:
        raise ValueError("angle list is empty")
    if not (NU_RANGE[0] < nu < NU_RANGE[1]):
        raise ValueError(f"nu must lie in (-1, 0.5), got {nu}")
    threshold = 1.0 / (3.0 - 4.0 * nu)
    return bool(np.all(np.cos(angles) > threshold + guard))


def poisson_limit_for_angle(theta: float) -> float:
    """Largest ratio nu for which an opening angle theta passes the
    angle condition, from inverting cos(theta) = 1 / (3 - 4 nu).

    Returns -1.0 when no admissible ratio works (cos(theta) <= 1/7 is
    already outside the reachable threshold range) and caps at 0.5.
    """
    c = math.cos(theta)
    if c <= 1.0 / 7.0:
        return -1.0
    return min(0.5, (3.0 - 1.0 / c) / 4.0)


def critical_poisson(a: np.ndarray, gamma: float) -> tuple[float, float]:
    """Open interval of ratios nu giving a positive-definite spring.

    Derived from the exact criterion: with nu* = (1 + eta_min/gamma)/2,
    positive gamma gives (-1, nu*), negative gamma gives (nu*, 1/2) and
    gamma = 0 gives everything or nothing depending on sign(eta_min).
    An empty set is returned as the sentinel (0.5, -1.0) with lo > hi.
    """
    a = np.asarray(a, dtype=float)
    eta_min = float(sym_eigenvalues(a)[-1])
    lo, hi = NU_RANGE
    if gamma > 0.0:
        nu_star = 0.5 * (1.0 + eta_min / gamma)
        if nu_star <= lo:
            return EMPTY_INTERVAL
        return (lo, min(hi, nu_star))
    if gamma < 0.0:
        nu_star = 0.5 * (1.0 + eta_min / gamma)
        if nu_star >= hi:
            return EMPTY_INTERVAL
        return (max(lo, nu_star), hi)
    if eta_min > 0.0:
        return (lo, hi)
    return EMPTY_INTERVAL


# ---------------------------------------------------------------------------
# Direction bound max (a.x)(b.x) over unit x


@dataclass(frozen=True)
class ProjectionProductMax:
    """Maximum of (a.x)(b.x) over unit vectors x.

    ``argmax`` is one maximizer (its negation works too); when a = -b
    the maximizers form the whole unit sphere of the plane orthogonal
    to a, ``argmax`` is one of them and ``degenerate`` is set.
    """

    value: float
    argmax: np.ndarray
    degenerate: bool


def projection_product_max(a, b) -> ProjectionProductMax:
    """Closed-form maximum of x -> (a.x)(b.x) over |x| = 1.

    For unit vectors a, b the maximum is (1 + a.b)/2, attained at the
    normalized bisector +-(a+b)/|a+b|; when a + b = 0 the value 0 is
    attained on every unit vector orthogonal to a.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape not in ((2,), (3,)):
        raise ValueError(f"expected two vectors of equal dim 2 or 3, got {a.shape}, {b.shape}")
    for v in (a, b):
        if not np.all(np.isfinite(v)) or abs(np.linalg.norm(v) - 1.0) > 1e-12:
            raise ValueError("inputs must be unit vectors")
    value = 0.5 * (1.0 + float(a @ b))
    s = a + b
    norm_s = float(np.linalg.norm(s))
    if norm_s > 1e-12:
        return ProjectionProductMax(value=value, argmax=s / norm_s, degenerate=False)
    # a = -b: any unit vector orthogonal to a attains the maximum 0.
    pick = np.zeros_like(a)
    pick[int(np.argmin(np.abs(a)))] = 1.0
    ortho = pick - (pick @ a) * a
    ortho /= np.linalg.norm(ortho)
    return ProjectionProductMax(value=value, argmax=ortho, degenerate=True)


def projection_product_grid_max(a, b, samples: int) -> float:
    """Brute-force maximum of (a.x)(b.x) over a deterministic direction grid.

    Uses a uniform angle grid in 2D and a Fibonacci sphere in 3D.  At
    least 1000 samples are required.  Grid values never exceed the true
    maximum, so this serves as an independent lower-bound oracle.
    """
    if samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {samples}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.shape not in ((2,), (3,)):
        raise ValueError(f"expected two vectors of equal dim 2 or 3, got {a.shape}, {b.shape}")
    if a.shape == (2,):
        theta = 2.0 * math.pi * np.arange(samples) / samples
        x = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    else:
        k = np.arange(samples)
        z = 1.0 - 2.0 * (k + 0.5) / samples
        radius = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        phi = math.pi * (3.0 - math.sqrt(5.0)) * k
        x = np.stack([radius * np.cos(phi), radius * np.sin(phi), z], axis=1)
    return float(np.max((x @ a) * (x @ b)))


# ---------------------------------------------------------------------------
# Whole-mesh spring analysis


@dataclass(frozen=True)
class SpringReport:
    """Everything the per-spring report lists for one node pair."""

    i: int
    j: int
    interior_pair: bool
    eigenvalues_k: np.ndarray
    eigenvalues_a: np.ndarray
    gamma: float
    sym_residual: float
    pd: bool
    margin: float
    angle_ok: bool
    theta_max: float
    nu_lo: float
    nu_hi: float


@dataclass(frozen=True)
class MeshAnalysis:
    """Vectorized per-spring analysis of one mesh and material.

    ``material`` is the material actually used in the 2D computation;
    under plane stress this is the reduced material and the reported
    critical ratios are mapped back to 3D material space.
    """

    mesh: object
    material: IsotropicMaterial
    plane_stress: bool
    pairs: list
    interior_pair: np.ndarray
    a: np.ndarray
    gamma: np.ndarray
    eig_a: np.ndarray
    eig_k: np.ndarray
    pd: np.ndarray
    margin: np.ndarray
    angle_ok: np.ndarray
    theta_max: np.ndarray
    min_cos: np.ndarray
    nu_lo: np.ndarray
    nu_hi: np.ndarray
    sym_residual: np.ndarray
    scale: float

    def reports(self) -> list[SpringReport]:
        out = []
        for s, p in enumerate(self.pairs):
            out.append(
                SpringReport(
                    i=p.i,
                    j=p.j,
                    interior_pair=p.interior_pair,
                    eigenvalues_k=self.eig_k[s],
                    eigenvalues_a=self.eig_a[s],
                    gamma=float(self.gamma[s]),
                    sym_residual=float(self.sym_residual[s]),
                    pd=bool(self.pd[s]),
                    margin=float(self.margin[s]),
                    angle_ok=bool(self.angle_ok[s]),
                    theta_max=float(self.theta_max[s]),
                    nu_lo=float(self.nu_lo[s]),
                    nu_hi=float(self.nu_hi[s]),
                )
            )
        return out


def spring_min_cosines(mesh, pairs) -> np.ndarray:
    """Smallest cosine of the opening angles opposite each spring.

    cos(theta) on an element is the negated normalized product of the
    two endpoint hat gradients; the per-spring minimum corresponds to
    the widest opening angle.
    """
    keys = _pair_keys(pairs, mesh.num_nodes)
    out = np.full(len(pairs), np.inf)
    for a, b in itertools.combinations(range(mesh.dim + 1), 2):
        lo, hi, g_lo, g_hi = _local_pair_data(mesh, a, b)
        rows = np.searchsorted(keys, lo * mesh.num_nodes + hi)
        dots = np.einsum("ed,ed->e", g_lo, g_hi)
        norms = np.linalg.norm(g_lo, axis=1) * np.linalg.norm(g_hi, axis=1)
        cos = np.clip(-dots / norms, -1.0, 1.0)
        np.minimum.at(out, rows, cos)
    return out


def classify_springs(
    a_stack: np.ndarray, gamma: np.ndarray, material: IsotropicMaterial
) -> tuple[np.ndarray, np.ndarray, float]:
    """Classify all springs of a mesh from their geometric parts.

    Returns (pd mask, smallest eigenvalues, scale).  The scale is the
    largest spring norm on the mesh and feeds every tolerance, so
    near-zero springs classify as not pd.  This single code path backs
    both the per-spring report and the ratio sweeps, which keeps their
    counts consistent by construction.
    """
    ks = decomposition_matrix(a_stack, gamma, material.lam, material.mu)
    norms = np.linalg.norm(ks, axis=(1, 2))
    scale = float(norms.max()) if norms.size else 0.0
    pd, margin, _ = classify_pd_batch(ks, scale)
    return pd, margin, scale


def _critical_intervals(eta_min: np.ndarray, gamma: np.ndarray):
    lo = np.full_like(eta_min, NU_RANGE[0])
    hi = np.full_like(eta_min, NU_RANGE[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        nu_star = 0.5 * (1.0 + eta_min / gamma)
    pos = gamma > 0.0
    neg = gamma < 0.0
    zero = ~(pos | neg)
    hi[pos] = np.minimum(NU_RANGE[1], nu_star[pos])
    lo[neg] = np.maximum(NU_RANGE[0], nu_star[neg])
    empty = (pos & (nu_star <= NU_RANGE[0])) | (neg & (nu_star >= NU_RANGE[1]))
    empty |= zero & (eta_min <= 0.0)
    lo[empty], hi[empty] = EMPTY_INTERVAL
    return lo, hi


def analyze_mesh(mesh, material: IsotropicMaterial, plane_stress: bool = False) -> MeshAnalysis:
    """Full per-spring analysis of a mesh for one isotropic material.

    With ``plane_stress=True`` (2D meshes only) the given material is
    interpreted as a 3D material loaded with zero out-of-plane stress:
    the computation runs on its reduced in-plane equivalent and the
    critical ratio columns are mapped back to 3D material space.
    """
    if plane_stress:
        if mesh.dim != 2:
            raise MaterialError("plane stress applies to 2D meshes only")
        comp = plane_stress_material(material)
    else:
        comp = material

    pairs = spring_adjacency(mesh)
    a_stack, gamma = decompositions_all_cached(mesh, pairs)
    pd, margin, scale = classify_springs(a_stack, gamma, comp)
    eig_a = sym_eigenvalues_batch(a_stack)
    ks = decomposition_matrix(a_stack, gamma, comp.lam, comp.mu)
    eig_k = sym_eigenvalues_batch(ks)

    tensor = isotropic_tensor(comp, mesh.dim)
    k_fwd = spring_constants_all(mesh, tensor, pairs)
    k_rev = spring_constants_all(mesh, tensor, pairs, reverse=True)
    diff = np.linalg.norm(k_fwd - k_rev, axis=(1, 2))
    norms = np.linalg.norm(k_fwd, axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        sym_residual = np.where(norms > 0.0, diff / norms, 0.0)

    min_cos = spring_min_cosines(mesh, pairs)
    theta_max = np.arccos(np.clip(min_cos, -1.0, 1.0))
    nu = comp.poisson
    angle_ok = min_cos > 1.0 / (3.0 - 4.0 * nu) + ANGLE_GUARD

    nu_lo, nu_hi = _critical_intervals(eig_a[:, -1].copy(), gamma)
    if plane_stress:
        # Map interval endpoints from the reduced computation back to
        # 3D material ratios; the admissible material range shrinks to
        # (-1/2, 1/2), so the upper end is clamped.
        regular = ~((nu_lo == EMPTY_INTERVAL[0]) & (nu_hi == EMPTY_INTERVAL[1]))
        nu_lo[regular] = nu_lo[regular] / (1.0 - nu_lo[regular])
        nu_hi[regular] = np.minimum(NU_RANGE[1], nu_hi[regular] / (1.0 - nu_hi[regular]))

    return MeshAnalysis(
        mesh=mesh,
        material=comp,
        plane_stress=plane_stress,
        pairs=pairs,
        interior_pair=np.array([p.interior_pair for p in pairs]),
        a=a_stack,
        gamma=gamma,
        eig_a=eig_a,
        eig_k=eig_k,
        pd=pd,
        margin=margin,
        angle_ok=angle_ok,
        theta_max=theta_max,
        min_cos=min_cos,
        nu_lo=nu_lo,
        nu_hi=nu_hi,
        sym_residual=sym_residual,
        scale=scale,
    )


def decompositions_all_cached(mesh, pairs):
    """Geometric parts of all pairs, cached on the mesh object."""
    cached = getattr(mesh, "_decompositions", None)
    if cached is None:
        cached = decompositions_all(mesh, pairs)
        mesh._decompositions = cached
    return cached
