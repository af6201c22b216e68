"""Structured simplicial meshes of the unit square, unit cube and L-shape.

All meshes are lattice-based: nodes sit at multiples of 1/n, triangles are
produced by splitting every grid cell along the same diagonal, tetrahedra by
the Kuhn (Freudenthal) subdivision of each cube cell.  Boundary facets are
extracted by element-incidence counting and classified into Dirichlet,
Neumann and Robin parts by geometric predicates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# Coordinate tolerance for boundary predicates.  Lattice points are exact in
# binary for power-of-two n; the tolerance covers the remaining cases.
COORD_TOL = 1e-12

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
ROBIN = "robin"


@dataclass(frozen=True)
class BoundaryTag:
    """Boundary condition tag for a single facet.

    ``kind`` is one of DIRICHLET, NEUMANN, ROBIN; ``alpha`` is the (positive)
    Robin coefficient and must be None otherwise.
    """

    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN, ROBIN):
            raise ValueError(f"unknown boundary tag kind: {self.kind!r}")
        if self.kind == ROBIN:
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("Robin tag requires alpha > 0")
        elif self.alpha is not None:
            raise ValueError("alpha only valid for Robin tags")


@dataclass
class Mesh:
    """Simplicial mesh with tagged boundary facets.

    nodes: (num_nodes, dim) array of coordinates in [0, 1]^dim.
    elements: (num_elements, dim+1) array of node indices, positively oriented.
    boundary_facets: list of (facet node tuple, BoundaryTag).
    h: mesh width, the maximum element diameter.
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_facets: list[tuple[tuple[int, ...], BoundaryTag]] = field(default_factory=list)
    h: float = 0.0

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]

    def element_volumes(self) -> np.ndarray:
        """Signed volumes of all elements (positive for oriented meshes)."""
        verts = self.nodes[self.elements]
        edges = verts[:, 1:, :] - verts[:, :1, :]
        if self.dim == 2:
            det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
            return det / 2.0
        det = np.linalg.det(edges)
        return det / 6.0

    def dirichlet_nodes(self) -> set[int]:
        """Nodes lying on the closure of the Dirichlet boundary."""
        out: set[int] = set()
        for facet, tag in self.boundary_facets:
            if tag.kind == DIRICHLET:
                out.update(facet)
        return out

    def dump(self) -> str:
        """Plain-text dump: nodes, elements, tagged facets, one per line."""
        lines = []
        for x in self.nodes:
            lines.append(" ".join(repr(float(c)) for c in x))
        lines.append("")
        for el in self.elements:
            lines.append(" ".join(str(int(i)) for i in el))
        lines.append("")
        for facet, tag in self.boundary_facets:
            name = tag.kind if tag.alpha is None else f"{tag.kind}:{tag.alpha}"
            lines.append(" ".join(str(i) for i in facet) + " " + name)
        return "\n".join(lines) + "\n"


def _orient(nodes: np.ndarray, elements: np.ndarray, dim: int) -> np.ndarray:
    """Swap two vertices of every negatively oriented element."""
    elements = np.array(elements, dtype=np.int64)
    verts = nodes[elements]
    edges = verts[:, 1:, :] - verts[:, :1, :]
    if dim == 2:
        det = edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0]
    else:
        det = np.linalg.det(edges)
    flip = det < 0
    elements[flip, 0], elements[flip, 1] = (
        elements[flip, 1].copy(),
        elements[flip, 0].copy(),
    )
    return elements


def _extract_boundary(elements: np.ndarray, dim: int) -> list[tuple[int, ...]]:
    """Facets belonging to exactly one element, as sorted node tuples."""
    counts: dict[tuple[int, ...], int] = {}
    for el in elements:
        for facet in itertools.combinations(sorted(int(i) for i in el), dim):
            counts[facet] = counts.get(facet, 0) + 1
    return [f for f, c in counts.items() if c == 1]


def _mesh_width(nodes: np.ndarray, elements: np.ndarray) -> float:
    verts = nodes[elements]
    m = verts.shape[1]
    h = 0.0
    for a in range(m):
        for b in range(a + 1, m):
            d = np.linalg.norm(verts[:, a, :] - verts[:, b, :], axis=1)
            h = max(h, float(d.max()))
    return h


def _finalize(dim: int, nodes: np.ndarray, elements) -> Mesh:
    elements = _orient(nodes, np.asarray(elements, dtype=np.int64), dim)
    facets = _extract_boundary(elements, dim)
    mesh = Mesh(
        dim=dim,
        nodes=nodes,
        elements=elements,
        boundary_facets=[(f, BoundaryTag(NEUMANN)) for f in facets],
        h=_mesh_width(nodes, elements),
    )
    return mesh


def build_unit_square(n: int) -> Mesh:
    """Uniform triangulation of (0,1)^2 with n subdivisions per axis.

    Every grid cell is split along the diagonal from its lower-left to its
    upper-right corner, giving 2 n^2 triangles and h = sqrt(2)/n.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    nodes = np.array([(x, y) for j in range(n + 1) for i in range(n + 1)
                      for x, y in [(xs[i], xs[j])]])
    def nid(i, j):
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            a, b = nid(i, j), nid(i + 1, j)
            c, d = nid(i + 1, j + 1), nid(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    return _finalize(2, nodes, elements)


# Vertex orderings of the six Kuhn tetrahedra of the unit cube: each is a
# monotone path from (0,0,0) to (1,1,1) given by a coordinate permutation.
_KUHN_PERMS = list(itertools.permutations(range(3)))


def build_unit_cube(n: int) -> Mesh:
    """Kuhn (Freudenthal) tetrahedralization of (0,1)^3, 6 n^3 tetrahedra."""
    if n < 1:
        raise ValueError("n must be >= 1")
    xs = np.linspace(0.0, 1.0, n + 1)
    nodes = np.array([(xs[i], xs[j], xs[k])
                      for k in range(n + 1) for j in range(n + 1) for i in range(n + 1)])

    def nid(i, j, k):
        return (k * (n + 1) + j) * (n + 1) + i

    elements = []
    for k in range(n):
        for j in range(n):
            for i in range(n):
                base = np.array([i, j, k])
                for perm in _KUHN_PERMS:
                    corner = base.copy()
                    tet = [nid(*corner)]
                    for axis in perm:
                        corner = corner.copy()
                        corner[axis] += 1
                        tet.append(nid(*corner))
                    elements.append(tuple(tet))
    return _finalize(3, nodes, elements)


def build_lshape(n: int) -> Mesh:
    """Triangulation of the L-shape (0,1)x(0,1/2) u (0,1/2)x[1/2,1).

    n must be even so the re-entrant corner (1/2, 1/2) is a lattice point.
    Cells of the n x n grid outside the L are dropped and nodes renumbered.
    """
    if n < 2 or n % 2 != 0:
        raise ValueError("n must be even and >= 2")
    xs = np.linspace(0.0, 1.0, n + 1)
    half = n // 2

    def full_nid(i, j):
        return j * (n + 1) + i

    used_cells = [(i, j) for j in range(n) for i in range(n)
                  if j < half or (j >= half and i < half)]
    used_nodes = sorted({full_nid(i + di, j + dj)
                         for (i, j) in used_cells for di in (0, 1) for dj in (0, 1)})
    renum = {old: new for new, old in enumerate(used_nodes)}
    nodes = np.array([(xs[old % (n + 1)], xs[old // (n + 1)]) for old in used_nodes])

    elements = []
    for i, j in used_cells:
        a = renum[full_nid(i, j)]
        b = renum[full_nid(i + 1, j)]
        c = renum[full_nid(i + 1, j + 1)]
        d = renum[full_nid(i, j + 1)]
        elements.append((a, b, c))
        elements.append((a, c, d))
    return _finalize(2, nodes, elements)


# Dirichlet predicates per problem (applied to a single node coordinate).
# For convdiff-lshape the paper's experiment fixes the Neumann part instead,
# so the predicate below is the complement test applied facet-wise.
def _on(v: float, target: float) -> bool:
    return abs(v - target) <= COORD_TOL


_PROBLEM_DIMS = {
    "mixed-2d": 2,
    "neumann-2d": 2,
    "mixed-3d": 3,
    "neumann-3d": 3,
    "convdiff-lshape": 2,
}


def classify_boundary(mesh: Mesh, problem_id: str) -> Mesh:
    """Tag boundary facets of ``mesh`` in place according to ``problem_id``.

    mixed-2d: Dirichlet on {x1 = 0 or x2 = 0}, Neumann elsewhere.
    mixed-3d: Dirichlet on {exists i: x_i = 0}, Neumann elsewhere.
    neumann-2d / neumann-3d: everything Neumann.
    convdiff-lshape: Neumann on {x2 = 0 or x1 = 1}, Dirichlet elsewhere.

    A facet gets a tag iff all of its nodes satisfy the predicate.
    """
    if problem_id not in _PROBLEM_DIMS:
        raise ValueError(f"unknown problem_id: {problem_id!r}")
    if _PROBLEM_DIMS[problem_id] != mesh.dim:
        raise ValueError(f"{problem_id} expects dim {_PROBLEM_DIMS[problem_id]}, "
                         f"mesh has dim {mesh.dim}")

    if problem_id in ("neumann-2d", "neumann-3d"):
        mesh.boundary_facets = [(f, BoundaryTag(NEUMANN)) for f, _ in mesh.boundary_facets]
        return mesh

    if problem_id == "mixed-2d":
        def dirichlet_facet(facet):
            return all(_on(mesh.nodes[i][0], 0.0) or _on(mesh.nodes[i][1], 0.0)
                       for i in facet)
    elif problem_id == "mixed-3d":
        def dirichlet_facet(facet):
            return all(any(_on(mesh.nodes[i][k], 0.0) for k in range(3))
                       for i in facet)
    else:  # convdiff-lshape: Dirichlet is the complement of the Neumann part
        def dirichlet_facet(facet):
            return not all(_on(mesh.nodes[i][1], 0.0) or _on(mesh.nodes[i][0], 1.0)
                           for i in facet)

    tagged = []
    for facet, _ in mesh.boundary_facets:
        is_dir = dirichlet_facet(facet)
        tagged.append((facet, BoundaryTag(DIRICHLET if is_dir else NEUMANN)))
    mesh.boundary_facets = tagged
    return mesh


def build_problem_mesh(problem_id: str, n: int) -> Mesh:
    """Build and tag the mesh belonging to a named experiment problem."""
    if problem_id in ("mixed-2d", "neumann-2d"):
        mesh = build_unit_square(n)
    elif problem_id in ("mixed-3d", "neumann-3d"):
        mesh = build_unit_cube(n)
    elif problem_id == "convdiff-lshape":
        mesh = build_lshape(n)
    else:
        raise ValueError(f"unknown problem_id: {problem_id!r}")
    return classify_boundary(mesh, problem_id)
