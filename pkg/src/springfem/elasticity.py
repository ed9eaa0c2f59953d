"""Elasticity tensors and isotropic material parameters.

The stiffness of a homogeneous material is a rank-4 tensor c[p,q,r,s]
with the minor symmetries (p,q) <-> (q,p), (r,s) <-> (s,r) and the major
symmetry (p,q,r,s) <-> (r,s,p,q).  Isotropic materials are described by
the pair (lambda, mu); their dimensionless shape is captured by the
ratio nu = lambda / (2 (lambda + mu)), restricted to (-1, 1/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MaterialError, MeshFormatError

TENSOR_FORMAT_NAME = "tensor"
TENSOR_FORMAT_VERSION = 1

#: Open admissible range of the isotropic ratio nu.
NU_RANGE = (-1.0, 0.5)


@dataclass(frozen=True)
class ElasticityTensor:
    """Dense rank-4 stiffness tensor for dimension 2 or 3."""

    dim: int
    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if self.dim not in (2, 3):
            raise MaterialError(f"dimension must be 2 or 3, got {self.dim}")
        if c.shape != (self.dim,) * 4:
            raise MaterialError(f"tensor shape {c.shape} does not match dim {self.dim}")
        if not np.all(np.isfinite(c)):
            raise MaterialError("non-finite tensor entry")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    def validate(self, tol: float = 0.0) -> None:
        """Check the two minor symmetries and the major symmetry.

        Raises MaterialError naming the first violated symmetry when any
        deviation exceeds ``tol`` (absolute).
        """
        c = self.c
        checks = [
            ("first minor symmetry c[p,q,r,s] = c[q,p,r,s]", c.transpose(1, 0, 2, 3)),
            ("second minor symmetry c[p,q,r,s] = c[p,q,s,r]", c.transpose(0, 1, 3, 2)),
            ("major symmetry c[p,q,r,s] = c[r,s,p,q]", c.transpose(2, 3, 0, 1)),
        ]
        for name, swapped in checks:
            dev = float(np.abs(c - swapped).max())
            if dev > tol:
                raise MaterialError(f"{name} violated by {dev:.3e}")


@dataclass(frozen=True)
class IsotropicMaterial:
    """Isotropic stiffness parameters (lam, mu).

    Admissibility requires mu > 0 and lam + 2*mu/3 > 0; together these
    give lam + mu > 0 and an isotropic ratio nu in (-1, 1/2), so the
    material is admissible in both dimensions.
    """

    lam: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.mu)):
            raise MaterialError("material parameters must be finite")
        if self.mu <= 0.0:
            raise MaterialError(f"mu must be positive, got {self.mu}")
        if self.lam + 2.0 * self.mu / 3.0 <= 0.0:
            raise MaterialError(
                f"lam + 2*mu/3 must be positive, got lam={self.lam}, mu={self.mu}"
            )

    @property
    def poisson(self) -> float:
        """The ratio nu = lam / (2 (lam + mu)), always in (-1, 1/2)."""
        return self.lam / (2.0 * (self.lam + self.mu))


def material_from_poisson(nu: float, mu: float = 1.0) -> IsotropicMaterial:
    """Material with the given ratio nu in (-1, 1/2) and shear modulus mu."""
    if not (math.isfinite(nu) and NU_RANGE[0] < nu < NU_RANGE[1]):
        raise MaterialError(f"nu must lie in the open interval (-1, 0.5), got {nu}")
    if not (math.isfinite(mu) and mu > 0.0):
        raise MaterialError(f"mu must be positive, got {mu}")
    return IsotropicMaterial(lam=2.0 * mu * nu / (1.0 - 2.0 * nu), mu=mu)


def plane_stress_poisson(nu: float) -> float:
    """Map a 2D computation ratio to the matching 3D plane-stress ratio.

    An in-plane computation with ratio nu models a 3D material, loaded
    with zero out-of-plane stress, whose ratio is nu / (1 - nu).  The
    map is monotone on the admissible range, so thresholds in
    computation space convert to material space through it.
    """
    if not (math.isfinite(nu) and NU_RANGE[0] < nu < NU_RANGE[1]):
        raise MaterialError(f"nu must lie in the open interval (-1, 0.5), got {nu}")
    return nu / (1.0 - nu)


def plane_stress_material(material: IsotropicMaterial) -> IsotropicMaterial:
    """Reduce a 3D material to its in-plane equivalent under zero normal stress.

    Shear is unchanged; lam becomes 2*lam*mu / (lam + 2*mu).  The reduced
    ratio is nu / (1 + nu), so materials with nu <= -1/2 have no
    admissible reduction and raise MaterialError.
    """
    lam, mu = material.lam, material.mu
    return IsotropicMaterial(lam=2.0 * lam * mu / (lam + 2.0 * mu), mu=mu)


def isotropic_tensor(material: IsotropicMaterial, dim: int) -> ElasticityTensor:
    """Dense isotropic stiffness tensor for the given dimension.

    c[p,q,r,s] = lam d_pq d_rs + mu (d_pr d_qs + d_ps d_qr).
    """
    if dim not in (2, 3):
        raise MaterialError(f"dimension must be 2 or 3, got {dim}")
    eye = np.eye(dim)
    c = (
        material.lam * np.einsum("pq,rs->pqrs", eye, eye)
        + material.mu * np.einsum("pr,qs->pqrs", eye, eye)
        + material.mu * np.einsum("ps,qr->pqrs", eye, eye)
    )
    return ElasticityTensor(dim=dim, c=c)


def symmetrized_coeff(tensor: ElasticityTensor, k: int, l: int, q: int, s: int) -> float:
    """One entry of the coefficient array used by spring assembly.

    C[k,l,q,s] = (c[k,q,l,s] + c[q,k,l,s] + c[k,q,s,l] + c[q,k,s,l]) / 4,
    which averages the tensor over the gradient/direction index swaps
    produced by the symmetric strain of a hat-function displacement.
    """
    c = tensor.c
    return 0.25 * (c[k, q, l, s] + c[q, k, l, s] + c[k, q, s, l] + c[q, k, s, l])


def symmetrized_coeff_tensor(tensor: ElasticityTensor) -> np.ndarray:
    """Full coefficient array C[k,l,q,s]; see symmetrized_coeff."""
    c = tensor.c
    return 0.25 * (
        np.einsum("kqls->klqs", c)
        + np.einsum("qkls->klqs", c)
        + np.einsum("kqsl->klqs", c)
        + np.einsum("qksl->klqs", c)
    )


def random_full_symmetric_tensor(dim: int, seed: int) -> ElasticityTensor:
    """Random tensor with exact minor and major symmetries.

    Standard-normal entries are averaged over the symmetry group in
    three stages; each stage preserves the previous ones exactly in
    floating point, so validate(tol=0.0) passes.
    """
    if dim not in (2, 3):
        raise MaterialError(f"dimension must be 2 or 3, got {dim}")
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((dim,) * 4)
    c = 0.5 * (c + c.transpose(1, 0, 2, 3))
    c = 0.5 * (c + c.transpose(0, 1, 3, 2))
    c = 0.5 * (c + c.transpose(2, 3, 0, 1))
    return ElasticityTensor(dim=dim, c=c)


def symmetric_form_eigenvalues(tensor: ElasticityTensor) -> np.ndarray:
    """Eigenvalues of the quadratic form e -> c : e : e on symmetric matrices.

    All positive means the tensor is positive-definite in the sense used
    for well-posed elasticity.  Returned ascending.
    """
    d = tensor.dim
    basis = []
    for p in range(d):
        m = np.zeros((d, d))
        m[p, p] = 1.0
        basis.append(m)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for p in range(d):
        for q in range(p + 1, d):
            m = np.zeros((d, d))
            m[p, q] = m[q, p] = inv_sqrt2
            basis.append(m)
    n = len(basis)
    gram = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            gram[a, b] = np.einsum("pqrs,pq,rs->", tensor.c, basis[a], basis[b])
    return np.linalg.eigvalsh(0.5 * (gram + gram.T))


# ---------------------------------------------------------------------------
# File I/O


def read_tensor(path) -> ElasticityTensor:
    """Read a stiffness tensor file (header, dim line, d^4 floats)."""
    text = Path(path).read_text()
    lines = [
        (no, line.split())
        for no, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not lines:
        raise MeshFormatError("empty tensor file")
    no, toks = lines[0]
    if toks != [TENSOR_FORMAT_NAME, str(TENSOR_FORMAT_VERSION)]:
        raise MeshFormatError(
            f"expected header '{TENSOR_FORMAT_NAME} {TENSOR_FORMAT_VERSION}', "
            f"got {' '.join(toks)!r}",
            no,
        )
    if len(lines) < 2:
        raise MeshFormatError("missing 'dim D' line")
    no, toks = lines[1]
    if len(toks) != 2 or toks[0] != "dim" or toks[1] not in ("2", "3"):
        raise MeshFormatError(f"expected 'dim 2' or 'dim 3', got {' '.join(toks)!r}", no)
    dim = int(toks[1])
    values: list[float] = []
    for no, toks in lines[2:]:
        for t in toks:
            try:
                values.append(float(t))
            except ValueError:
                raise MeshFormatError(f"bad tensor entry {t!r}", no) from None
            if not math.isfinite(values[-1]):
                raise MeshFormatError("non-finite tensor entry", no)
    if len(values) != dim**4:
        raise MeshFormatError(f"expected {dim**4} tensor entries, got {len(values)}")
    c = np.array(values).reshape((dim,) * 4)
    return ElasticityTensor(dim=dim, c=c)


def write_tensor(tensor: ElasticityTensor, path) -> None:
    """Write a stiffness tensor file (round-trip exact)."""
    d = tensor.dim
    out = [f"{TENSOR_FORMAT_NAME} {TENSOR_FORMAT_VERSION}", f"dim {d}"]
    flat = tensor.c.reshape(d * d, d * d)
    out.extend(" ".join(f"{x:.17g}" for x in row) for row in flat)
    Path(path).write_text("\n".join(out) + "\n")
