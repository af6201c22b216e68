import numpy as np
import pytest

from hinv.fem import DofMap, PdeCoefficients, assemble
from hinv.mesh import DIRICHLET, BoundaryTag, build_unit_square


def all_dirichlet_square(n):
    mesh = build_unit_square(n)
    mesh.boundary_facets = [(f, BoundaryTag(DIRICHLET)) for f, _ in mesh.boundary_facets]
    return mesh


def poisson_dirichlet_l2_error(n):
    """L2 error of the P1 solution of -Laplace u = f with a polynomial solution.

    Manufactured solution u = x(1-x) y(1-y) on the unit square with
    homogeneous Dirichlet data; the load uses barycenter quadrature, the
    error the exact P1 mass matrix.
    """
    mesh = all_dirichlet_square(n)
    dofmap = DofMap.from_mesh(mesh)
    A = assemble(mesh, PdeCoefficients(diffusion=np.eye(2)), dofmap)

    def exact(x):
        return x[0] * (1 - x[0]) * x[1] * (1 - x[1])

    def f(x):
        return 2 * (x[1] * (1 - x[1]) + x[0] * (1 - x[0]))

    rhs = np.zeros(dofmap.N)
    mass = np.zeros((dofmap.N, dofmap.N))
    for el in mesh.elements:
        verts = mesh.nodes[el]
        vol = abs(np.linalg.det(verts[1:] - verts[0])) / 2.0
        bary = verts.mean(axis=0)
        dofs = dofmap.node_to_dof[el]
        for a in range(3):
            if dofs[a] < 0:
                continue
            rhs[dofs[a]] += vol * f(bary) / 3.0
            for b in range(3):
                if dofs[b] < 0:
                    continue
                mass[dofs[a], dofs[b]] += vol / 12.0 * (2.0 if a == b else 1.0)

    uh = np.linalg.solve(A.toarray(), rhs)
    err = uh - np.array([exact(mesh.nodes[i]) for i in dofmap.free_nodes])
    return float(np.sqrt(err @ mass @ err))


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
