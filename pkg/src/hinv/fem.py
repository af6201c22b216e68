"""P1 Galerkin assembly of second-order elliptic bilinear forms.

Assembles diffusion, convection, reaction and Robin boundary terms into a
compressed sparse matrix over the free (non-Dirichlet) degrees of freedom.
The stabilized pure-Neumann variant carries its rank-one term as a separate
vector so the sparse part stays sparse.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import DIRICHLET, Mesh


class AssemblyError(ValueError):
    pass


@dataclass
class PdeCoefficients:
    """Constant diffusion tensor plus optional convection/reaction/Robin data.

    diffusion: d x d SPD matrix.
    convection: callable x -> d-vector, or None.
    reaction: callable x -> scalar, or None.
    robin_alpha: positive coefficient applied on Robin-tagged facets.
    stabilization: add the rank-one term (integral of u)(integral of v).
    """

    diffusion: np.ndarray
    convection: Callable[[np.ndarray], np.ndarray] | None = None
    reaction: Callable[[np.ndarray], float] | None = None
    robin_alpha: float | None = None
    stabilization: bool = False

    def validate(self, dim: int) -> None:
        C = np.asarray(self.diffusion, dtype=float)
        if C.shape != (dim, dim):
            raise AssemblyError(f"diffusion must be {dim}x{dim}")
        if not np.allclose(C, C.T, atol=1e-14):
            raise AssemblyError("diffusion matrix must be symmetric")
        if np.linalg.eigvalsh(C).min() <= 0:
            raise AssemblyError("diffusion matrix must be positive definite")
        if self.robin_alpha is not None and self.robin_alpha <= 0:
            raise AssemblyError("robin_alpha must be positive")


@dataclass
class DofMap:
    """Bijection between free (non-Dirichlet) mesh nodes and 0..N-1."""

    free_nodes: np.ndarray
    node_to_dof: np.ndarray  # -1 for constrained nodes
    N: int

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        constrained = mesh.dirichlet_nodes()
        free = np.array([i for i in range(mesh.num_nodes) if i not in constrained],
                        dtype=np.int64)
        inv = np.full(mesh.num_nodes, -1, dtype=np.int64)
        inv[free] = np.arange(free.size)
        return cls(free_nodes=free, node_to_dof=inv, N=free.size)


@dataclass
class SparseMatrix:
    """Assembled stiffness matrix: CSR part plus optional rank-one update.

    The full operator is ``csr + outer(stab, stab)`` when ``stab`` is set
    (stabilized Neumann form), else just ``csr``.
    """

    csr: sp.csr_matrix
    stab: np.ndarray | None = None

    @property
    def N(self) -> int:
        return self.csr.shape[0]

    @property
    def shape(self):
        return self.csr.shape

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.csr @ x
        if self.stab is not None:
            y = y + self.stab * (self.stab @ x)
        return y

    def rmatvec(self, x: np.ndarray) -> np.ndarray:
        y = self.csr.T @ x
        if self.stab is not None:
            y = y + self.stab * (self.stab @ x)
        return y

    def toarray(self) -> np.ndarray:
        A = self.csr.toarray()
        if self.stab is not None:
            A = A + np.outer(self.stab, self.stab)
        return A

    def permuted(self, perm: np.ndarray) -> "SparseMatrix":
        """Symmetric reordering: entry (i, j) of the result is (perm[i], perm[j])."""
        csr = self.csr[perm, :][:, perm].tocsr()
        stab = self.stab[perm] if self.stab is not None else None
        return SparseMatrix(csr=csr, stab=stab)

    def export_matrix_market(self, path) -> None:
        """Coordinate-format Matrix Market dump (1-based, real general)."""
        A = sp.coo_matrix(self.csr if self.stab is None
                          else self.csr + sp.coo_matrix(np.outer(self.stab, self.stab)))
        with open(path, "w") as f:
            f.write("%%MatrixMarket matrix coordinate real general\n")
            f.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
            for i, j, v in zip(A.row, A.col, A.data):
                f.write(f"{i + 1} {j + 1} {float(v)!r}\n")


def _element_geometry(mesh: Mesh, el: np.ndarray):
    """Volume, P1 basis gradients (rows) and barycenter of one element."""
    verts = mesh.nodes[el]
    d = mesh.dim
    edges = (verts[1:] - verts[0]).T  # d x d
    det = np.linalg.det(edges)
    vol = det / (2.0 if d == 2 else 6.0)
    # Gradients of barycentric coordinates: rows of inv(edges) give grads of
    # lambda_1..lambda_d, lambda_0 closes the partition of unity.
    inv = np.linalg.inv(edges)
    grads = np.vstack([-inv.sum(axis=0), inv])  # (d+1) x d
    bary = verts.mean(axis=0)
    return vol, grads, bary


def _p1_mass(vol: float, m: int) -> np.ndarray:
    """Exact P1 mass matrix on a simplex with m vertices and volume vol."""
    return vol / ((m) * (m + 1)) * (np.ones((m, m)) + np.eye(m))


def assemble(mesh: Mesh, coeffs: PdeCoefficients, dofmap: DofMap) -> SparseMatrix:
    """Galerkin matrix of the bilinear form over the free DOFs.

    Diffusion, constant-in-element reaction (evaluated at the barycenter
    times the exact mass matrix) and Robin facet terms use exact P1 formulas;
    the convection term uses one-point barycenter quadrature.
    """
    coeffs.validate(mesh.dim)
    if dofmap.N == 0:
        raise AssemblyError("empty DOF set")
    C = np.asarray(coeffs.diffusion, dtype=float)
    d = mesh.dim
    m = d + 1

    rows, cols, vals = [], [], []
    load = np.zeros(dofmap.N)  # integrals of basis functions, for stabilization

    for el in mesh.elements:
        vol, grads, bary = _element_geometry(mesh, el)
        ke = vol * grads @ C @ grads.T
        if coeffs.convection is not None:
            b = np.asarray(coeffs.convection(bary), dtype=float)
            # int_T (b . grad psi_k) psi_j ~ vol * (b . g_k) / m
            conv = vol / m * np.outer(np.ones(m), grads @ b)
            ke = ke + conv
        if coeffs.reaction is not None:
            ke = ke + coeffs.reaction(bary) * _p1_mass(vol, m)
        dofs = dofmap.node_to_dof[el]
        for a in range(m):
            if dofs[a] < 0:
                continue
            load[dofs[a]] += vol / m
            for bidx in range(m):
                if dofs[bidx] < 0:
                    continue
                rows.append(dofs[a])
                cols.append(dofs[bidx])
                vals.append(ke[a, bidx])

    for facet, tag in mesh.boundary_facets:
        if tag.kind == "robin":
            alpha = tag.alpha if tag.alpha is not None else coeffs.robin_alpha
            if alpha is None:
                raise AssemblyError("Robin facet without alpha")
            fm = _facet_mass(mesh, facet) * alpha
            fdofs = dofmap.node_to_dof[list(facet)]
            for a in range(len(facet)):
                if fdofs[a] < 0:
                    continue
                for bidx in range(len(facet)):
                    if fdofs[bidx] < 0:
                        continue
                    rows.append(fdofs[a])
                    cols.append(fdofs[bidx])
                    vals.append(fm[a, bidx])

    csr = sp.coo_matrix((vals, (rows, cols)), shape=(dofmap.N, dofmap.N)).tocsr()
    csr.sum_duplicates()
    csr.eliminate_zeros()
    stab = load if coeffs.stabilization else None
    return SparseMatrix(csr=csr, stab=stab)


def _facet_mass(mesh: Mesh, facet) -> np.ndarray:
    """Exact P1 mass matrix of a boundary facet (edge in 2D, triangle in 3D)."""
    verts = mesh.nodes[list(facet)]
    if mesh.dim == 2:
        length = np.linalg.norm(verts[1] - verts[0])
        return length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    area = 0.5 * np.linalg.norm(np.cross(verts[1] - verts[0], verts[2] - verts[0]))
    return area / 12.0 * (np.ones((3, 3)) + np.eye(3))


def assemble_neumann(mesh: Mesh, diffusion: np.ndarray) -> SparseMatrix:
    """Stabilized pure-Neumann matrix K + m m^T with m_j the basis integrals."""
    if any(tag.kind == DIRICHLET for _, tag in mesh.boundary_facets):
        raise AssemblyError("pure-Neumann assembly requires a Dirichlet-free mesh")
    dofmap = DofMap.from_mesh(mesh)
    coeffs = PdeCoefficients(diffusion=np.asarray(diffusion, dtype=float),
                             stabilization=True)
    return assemble(mesh, coeffs, dofmap)


def assemble_convdiff(mesh: Mesh, c: float, dofmap: DofMap) -> SparseMatrix:
    """Convection-diffusion matrix c*K + convection with b(x) = (-x2, x1)."""
    if c <= 0:
        raise AssemblyError("diffusion constant c must be positive")
    if mesh.dim != 2:
        raise AssemblyError("convection-diffusion form is 2D only")
    coeffs = PdeCoefficients(
        diffusion=c * np.eye(2),
        convection=lambda x: np.array([-x[1], x[0]]),
    )
    return assemble(mesh, coeffs, dofmap)
