"""Simplicial meshes for spring-block elasticity models.

A mesh is a cloud of nodes in R^d (d = 2 or 3) together with positively
oriented simplices (triangles or tetrahedra).  Each node carries a
piecewise linear hat function; everything the assembly routines need
(element volumes, hat-function gradients, opposite angles, node pairs
that share an element) is computed here.

Meshes are treated as immutable: node and element arrays are marked
read-only after construction and every derived quantity is cached.

File format ("springmesh", version 1)::

    springmesh 1
    dim 2
    nodes 4
    0 0
    1 0
    1 1
    0 1
    elements 2
    0 1 2
    0 2 3

Lines whose first non-blank character is ``#`` are comments.  Indices
are 0-based.  The writer emits coordinates with 17 significant digits so
a write/parse round trip reproduces every float exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MeshError, MeshFormatError

FORMAT_NAME = "springmesh"
FORMAT_VERSION = 1

# Relative tolerance deciding when an element counts as zero-volume.
DEGENERATE_REL_TOL = 1e-12


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass(frozen=True)
class ElementGeometry:
    """Volume and hat-function gradients of one simplex.

    ``gradients[v]`` is the (constant) gradient of the hat function of
    local vertex ``v``; rows sum to zero.
    """

    volume: float
    gradients: np.ndarray


@dataclass(frozen=True)
class BoundaryPartition:
    """Split of node indices into interior and boundary sets."""

    interior: np.ndarray
    boundary: np.ndarray
    is_boundary: np.ndarray

    @property
    def interior_count(self) -> int:
        return int(self.interior.size)


@dataclass(frozen=True)
class SpringPair:
    """Unordered node pair (i < j) sharing at least one element.

    ``elements`` lists the indices of all incident elements in ascending
    order.  ``interior_pair`` is true when at least one endpoint is an
    interior node; only such pairs carry the structural symmetry
    guarantee of the assembled spring constants.
    """

    i: int
    j: int
    elements: tuple[int, ...]
    interior_pair: bool


class Mesh:
    """Immutable simplicial mesh.

    Elements are stored in canonical form: vertex indices sorted
    ascending, then the last two swapped if needed so the signed volume
    is positive.  Construction validates indices and rejects degenerate
    (zero-volume) elements.
    """

    def __init__(self, nodes, elements):
        nodes = np.ascontiguousarray(np.asarray(nodes, dtype=float))
        elements = np.ascontiguousarray(np.asarray(elements, dtype=np.int64))
        if nodes.ndim != 2 or nodes.shape[1] not in (2, 3):
            raise MeshError(f"node array must be (N, 2) or (N, 3), got {nodes.shape}")
        dim = nodes.shape[1]
        if elements.ndim != 2 or elements.shape[1] != dim + 1:
            raise MeshError(
                f"element array must be (M, {dim + 1}) for dim {dim}, got {elements.shape}"
            )
        if not np.all(np.isfinite(nodes)):
            raise MeshError("non-finite node coordinate")
        n = nodes.shape[0]
        if elements.size and (elements.min() < 0 or elements.max() >= n):
            raise MeshError("element vertex index out of range")
        if elements.shape[0] == 0:
            raise MeshError("mesh has no elements")

        elements = np.sort(elements, axis=1)
        for row in range(elements.shape[0]):
            if len(set(elements[row])) != dim + 1:
                raise MeshError(f"element {row} repeats a vertex index")

        vols = _signed_volumes(nodes, elements)
        flip = vols < 0.0
        if np.any(flip):
            elements[flip, -2], elements[flip, -1] = (
                elements[flip, -1].copy(),
                elements[flip, -2].copy(),
            )
            vols = np.abs(vols)
        tol = _degenerate_tolerances(nodes, elements)
        bad = np.nonzero(vols <= tol)[0]
        if bad.size:
            raise MeshError(f"element {bad[0]} is degenerate (zero volume)")

        nodes.setflags(write=False)
        elements.setflags(write=False)
        self.nodes = nodes
        self.elements = elements
        self._volumes = vols
        self._gradients: np.ndarray | None = None
        self._boundary: BoundaryPartition | None = None
        self._springs: list[SpringPair] | None = None

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def volumes(self) -> np.ndarray:
        """Element volumes (areas in 2D), shape (M,)."""
        return self._volumes

    def gradients(self) -> np.ndarray:
        """Hat-function gradients per element, shape (M, dim+1, dim)."""
        if self._gradients is None:
            edges = self.nodes[self.elements[:, 1:]] - self.nodes[self.elements[:, :1]]
            # Rows of edges are P_v - P_0; hat gradients of vertices 1..d
            # are the columns of the inverse edge matrix.
            inv = np.linalg.inv(edges)
            rest = np.transpose(inv, (0, 2, 1))
            first = -rest.sum(axis=1, keepdims=True)
            grads = np.concatenate([first, rest], axis=1)
            grads.setflags(write=False)
            self._gradients = grads
        return self._gradients

    def __repr__(self) -> str:  # pragma: no cover
        return f"Mesh(dim={self.dim}, nodes={self.num_nodes}, elements={self.num_elements})"


def _signed_volumes(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    edges = nodes[elements[:, 1:]] - nodes[elements[:, :1]]
    return np.linalg.det(edges) / math.factorial(nodes.shape[1])


def _degenerate_tolerances(nodes: np.ndarray, elements: np.ndarray) -> np.ndarray:
    dim = nodes.shape[1]
    h2 = np.zeros(elements.shape[0])
    for a, b in itertools.combinations(range(dim + 1), 2):
        d = nodes[elements[:, a]] - nodes[elements[:, b]]
        h2 = np.maximum(h2, np.einsum("md,md->m", d, d))
    h = np.sqrt(h2)
    return DEGENERATE_REL_TOL * h**dim / math.factorial(dim)


def element_geometry(mesh: Mesh, index: int) -> ElementGeometry:
    """Geometry of element ``index``: volume and hat-function gradients."""
    if not 0 <= index < mesh.num_elements:
        raise MeshError(f"element index {index} out of range")
    return ElementGeometry(
        volume=float(mesh.volumes()[index]),
        gradients=mesh.gradients()[index],
    )


def classify_boundary(mesh: Mesh) -> BoundaryPartition:
    """Partition nodes into interior and boundary sets.

    A facet ((d-1)-subsimplex) incident to exactly one element lies on
    the boundary; all its nodes are boundary nodes.  A facet shared by
    more than two elements makes the mesh non-manifold and is rejected.
    """
    if mesh._boundary is not None:
        return mesh._boundary
    counts: dict[tuple[int, ...], int] = {}
    dim = mesh.dim
    for elem in mesh.elements:
        for skip in range(dim + 1):
            # orientation fixes may reorder vertices, so key on the sorted facet
            facet = tuple(sorted(v for k, v in enumerate(elem) if k != skip))
            counts[facet] = counts.get(facet, 0) + 1
    boundary: set[int] = set()
    for facet, c in counts.items():
        if c > 2:
            raise MeshError(f"facet {facet} shared by {c} elements (non-manifold mesh)")
        if c == 1:
            boundary.update(facet)
    mask = np.zeros(mesh.num_nodes, dtype=bool)
    mask[list(boundary)] = True
    part = BoundaryPartition(
        interior=np.nonzero(~mask)[0],
        boundary=np.nonzero(mask)[0],
        is_boundary=mask,
    )
    mesh._boundary = part
    return part


def spring_adjacency(mesh: Mesh) -> list[SpringPair]:
    """All node pairs sharing at least one element, sorted by (i, j).

    Every pair of vertices of every element defines a spring; the pair
    records all incident elements.
    """
    if mesh._springs is not None:
        return mesh._springs
    incident: dict[tuple[int, int], list[int]] = {}
    dim = mesh.dim
    for e, elem in enumerate(mesh.elements):
        for a, b in itertools.combinations(range(dim + 1), 2):
            i, j = int(elem[a]), int(elem[b])
            if i > j:
                i, j = j, i
            incident.setdefault((i, j), []).append(e)
    onb = classify_boundary(mesh).is_boundary
    pairs = [
        SpringPair(
            i=i,
            j=j,
            elements=tuple(sorted(elems)),
            interior_pair=not (onb[i] and onb[j]),
        )
        for (i, j), elems in sorted(incident.items())
    ]
    mesh._springs = pairs
    return pairs


def opposite_angle(mesh: Mesh, element_index: int, i: int, j: int) -> float:
    """Angle (radians) the element opens opposite the edge (i, j).

    In a triangle this is the interior angle at the vertex opposite that
    edge; in a tetrahedron it is the dihedral angle along the edge
    opposite (i, j), i.e. between the two faces containing exactly one
    of the endpoints.  Both equal the angle between the two boundary
    facets of the element, whose outward unit normals are the negated,
    normalized hat-function gradients of the endpoints.
    """
    if i == j:
        raise MeshError("opposite_angle needs two distinct nodes")
    elem = mesh.elements[element_index]
    where = {int(v): k for k, v in enumerate(elem)}
    if i not in where or j not in where:
        raise MeshError(f"nodes ({i}, {j}) not both in element {element_index}")
    grads = mesh.gradients()[element_index]
    gi = grads[where[i]]
    gj = grads[where[j]]
    c = float(gi @ gj / (np.linalg.norm(gi) * np.linalg.norm(gj)))
    return math.acos(min(1.0, max(-1.0, -c)))


# ---------------------------------------------------------------------------
# File I/O


def parse_mesh(path) -> Mesh:
    """Read a springmesh file.  Errors carry 1-based line numbers."""
    text = Path(path).read_text()
    lines = [
        (no, line.split())
        for no, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    pos = 0

    def take(what: str) -> tuple[int, list[str]]:
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(f"unexpected end of file, expected {what}")
        item = lines[pos]
        pos += 1
        return item

    no, toks = take("header")
    if toks != [FORMAT_NAME, str(FORMAT_VERSION)]:
        raise MeshFormatError(
            f"expected header '{FORMAT_NAME} {FORMAT_VERSION}', got {' '.join(toks)!r}", no
        )
    no, toks = take("'dim D'")
    if len(toks) != 2 or toks[0] != "dim" or toks[1] not in ("2", "3"):
        raise MeshFormatError(f"expected 'dim 2' or 'dim 3', got {' '.join(toks)!r}", no)
    dim = int(toks[1])

    no, toks = take("'nodes N'")
    if len(toks) != 2 or toks[0] != "nodes":
        raise MeshFormatError(f"expected 'nodes N', got {' '.join(toks)!r}", no)
    n_nodes = _parse_count(toks[1], "node count", no)

    nodes = np.empty((n_nodes, dim))
    for k in range(n_nodes):
        no, toks = take("node coordinates")
        if len(toks) != dim:
            raise MeshFormatError(f"expected {dim} coordinates, got {len(toks)}", no)
        try:
            row = [float(t) for t in toks]
        except ValueError:
            raise MeshFormatError(f"bad coordinate in {' '.join(toks)!r}", no) from None
        if not all(math.isfinite(x) for x in row):
            raise MeshFormatError("non-finite coordinate", no)
        nodes[k] = row

    no, toks = take("'elements M'")
    if len(toks) != 2 or toks[0] != "elements":
        raise MeshFormatError(f"expected 'elements M', got {' '.join(toks)!r}", no)
    n_elems = _parse_count(toks[1], "element count", no)

    elements = np.empty((n_elems, dim + 1), dtype=np.int64)
    for k in range(n_elems):
        no, toks = take("element indices")
        if len(toks) != dim + 1:
            raise MeshFormatError(f"expected {dim + 1} vertex indices, got {len(toks)}", no)
        try:
            row = [int(t) for t in toks]
        except ValueError:
            raise MeshFormatError(f"bad vertex index in {' '.join(toks)!r}", no) from None
        for v in row:
            if not 0 <= v < n_nodes:
                raise MeshFormatError(f"vertex index {v} out of range [0, {n_nodes})", no)
        if len(set(row)) != dim + 1:
            raise MeshFormatError("element repeats a vertex index", no)
        verts = nodes[row]
        vol = abs(np.linalg.det(verts[1:] - verts[0]) / math.factorial(dim))
        h = max(
            float(np.linalg.norm(verts[a] - verts[b]))
            for a, b in itertools.combinations(range(dim + 1), 2)
        )
        if vol <= DEGENERATE_REL_TOL * h**dim / math.factorial(dim):
            raise MeshFormatError("degenerate (zero volume) element", no)
        elements[k] = row

    if pos != len(lines):
        raise MeshFormatError("unexpected trailing content", lines[pos][0])
    return Mesh(nodes, elements)


def _parse_count(token: str, what: str, line: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise MeshFormatError(f"bad {what} {token!r}", line) from None
    if value <= 0:
        raise MeshFormatError(f"{what} must be positive, got {value}", line)
    return value


def mesh_text(mesh: Mesh) -> str:
    """Serialize a mesh in springmesh format (round-trip exact)."""
    out = [f"{FORMAT_NAME} {FORMAT_VERSION}", f"dim {mesh.dim}", f"nodes {mesh.num_nodes}"]
    out.extend(" ".join(_fmt(x) for x in row) for row in mesh.nodes)
    out.append(f"elements {mesh.num_elements}")
    out.extend(" ".join(str(v) for v in row) for row in mesh.elements)
    return "\n".join(out) + "\n"


def write_mesh(mesh: Mesh, path) -> None:
    """Write a mesh file in springmesh format."""
    Path(path).write_text(mesh_text(mesh))


# ---------------------------------------------------------------------------
# Generators


def square_right(n: int) -> Mesh:
    """Unit square, n x n cells each split along the same diagonal."""
    _check_resolution(n)
    nodes = np.array(
        [(i / n, j / n) for j in range(n + 1) for i in range(n + 1)], dtype=float
    )

    def idx(i, j):
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            a, b = idx(i, j), idx(i + 1, j)
            c, d = idx(i + 1, j + 1), idx(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    return Mesh(nodes, np.array(elements))


def equilateral(n: int) -> Mesh:
    """Rhombus of n x n cells tiled by unit-side equilateral triangles.

    Every interior edge is shared by two equilateral triangles.
    """
    _check_resolution(n)
    s = math.sqrt(3.0) / 2.0
    nodes = np.array(
        [(i + 0.5 * j, j * s) for j in range(n + 1) for i in range(n + 1)], dtype=float
    )

    def idx(i, j):
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            elements.append((idx(i, j), idx(i + 1, j), idx(i, j + 1)))
            elements.append((idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)))
    return Mesh(nodes, np.array(elements))


def cube_kuhn(n: int) -> Mesh:
    """Unit cube, n^3 cells, each cut into six tetrahedra.

    Every cell is subdivided the same way (all six tetrahedra share the
    main diagonal of the cell), which makes neighbouring cells conform.
    """
    _check_resolution(n)
    nodes = np.array(
        [
            (i / n, j / n, k / n)
            for k in range(n + 1)
            for j in range(n + 1)
            for i in range(n + 1)
        ],
        dtype=float,
    )

    def idx(p):
        return (p[2] * (n + 1) + p[1]) * (n + 1) + p[0]

    steps = [np.eye(3, dtype=int)[a] for a in range(3)]
    elements = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                base = np.array((i, j, k))
                for perm in itertools.permutations(range(3)):
                    p0 = base
                    p1 = p0 + steps[perm[0]]
                    p2 = p1 + steps[perm[1]]
                    p3 = p2 + steps[perm[2]]
                    elements.append((idx(p0), idx(p1), idx(p2), idx(p3)))
    return Mesh(nodes, np.array(elements))


def patch_square() -> Mesh:
    """Unit square split along one diagonal: two right triangles."""
    nodes = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    return Mesh(nodes, np.array([(0, 1, 2), (0, 2, 3)]))


def patch_equilateral() -> Mesh:
    """Two unit equilateral triangles glued along one shared edge."""
    s = math.sqrt(3.0) / 2.0
    nodes = np.array([(0.0, 0.0), (1.0, 0.0), (0.5, s), (0.5, -s)])
    return Mesh(nodes, np.array([(0, 1, 2), (0, 3, 1)]))


def patch_regular_tet_ring() -> Mesh:
    """Five tetrahedra arranged around one shared axis edge.

    The axis edge has length 1 and the far edges of the five faces fan
    out at exactly 72 degrees around it, so every ring edge sees a
    72-degree opening opposite it.  Side edges match the axis length
    (regular proportions cannot close a ring exactly, so ring edges are
    slightly longer).
    """
    r = math.sqrt(3.0) / 2.0
    nodes = [(0.0, 0.0, -0.5), (0.0, 0.0, 0.5)]
    for k in range(5):
        phi = 2.0 * math.pi * k / 5.0
        nodes.append((r * math.cos(phi), r * math.sin(phi), 0.0))
    elements = [(0, 1, 2 + k, 2 + (k + 1) % 5) for k in range(5)]
    return Mesh(np.array(nodes), np.array(elements))


def jitter(mesh: Mesh, amplitude: float, seed: int) -> Mesh:
    """Perturb interior nodes by uniform offsets in [-amplitude, amplitude]^d.

    Boundary nodes stay fixed.  If any element degenerates or inverts,
    the whole draw is repeated (up to 50 times) so the result is
    deterministic for a given seed.
    """
    if not (math.isfinite(amplitude) and amplitude >= 0.0):
        raise MeshError(f"jitter amplitude must be >= 0, got {amplitude}")
    interior = classify_boundary(mesh).interior
    if amplitude == 0.0 or interior.size == 0:
        return Mesh(mesh.nodes, mesh.elements)
    rng = np.random.default_rng(seed)
    for _ in range(50):
        offsets = np.zeros_like(mesh.nodes)
        offsets[interior] = rng.uniform(-amplitude, amplitude, (interior.size, mesh.dim))
        nodes = mesh.nodes + offsets
        vols = _signed_volumes(nodes, mesh.elements)
        if np.all(vols > _degenerate_tolerances(nodes, mesh.elements)):
            return Mesh(nodes, mesh.elements)
    raise MeshError(
        f"jitter amplitude {amplitude} keeps inverting elements; use a smaller value"
    )


def _check_resolution(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise MeshError(f"mesh resolution must be a positive integer, got {n!r}")


GENERATORS = {
    "square_right": (square_right, True),
    "equilateral": (equilateral, True),
    "cube_kuhn": (cube_kuhn, True),
    "patch_square": (patch_square, False),
    "patch_equilateral": (patch_equilateral, False),
    "patch_regular_tet_ring": (patch_regular_tet_ring, False),
}


def generate_mesh(spec: str) -> Mesh:
    """Build a mesh from a spec string like ``equilateral:8``.

    The grammar is ``name`` or ``name:n`` where ``n`` is the resolution
    for the structured generators (``square_right``, ``equilateral``,
    ``cube_kuhn``).  The ``patch_*`` generators take no argument.
    """
    name, _, arg = spec.partition(":")
    name = name.strip()
    if name not in GENERATORS:
        known = ", ".join(sorted(GENERATORS))
        raise MeshError(f"unknown mesh generator {name!r} (known: {known})")
    fn, needs_arg = GENERATORS[name]
    if needs_arg:
        if not arg:
            raise MeshError(f"generator {name!r} needs a resolution, e.g. '{name}:8'")
        try:
            n = int(arg)
        except ValueError:
            raise MeshError(f"bad resolution {arg!r} in mesh spec {spec!r}") from None
        return fn(n)
    if arg:
        raise MeshError(f"generator {name!r} takes no argument")
    return fn()
