"""Mesh generation and boundary classification tests."""

import itertools
from collections import Counter

import numpy as np
import pytest

from hinv.mesh import (DIRICHLET, NEUMANN, ROBIN, BoundaryTag, build_lshape,
                       build_problem_mesh, build_unit_cube, build_unit_square,
                       classify_boundary)


def facet_share_counts(mesh):
    counts = Counter()
    for el in mesh.elements:
        for facet in itertools.combinations(sorted(int(i) for i in el), mesh.dim):
            counts[facet] += 1
    return counts


class TestUnitSquare:
    def test_n1_counts(self):
        m = build_unit_square(1)
        assert m.num_nodes == 4
        assert m.num_elements == 2

    def test_n2_counts_and_width(self):
        m = build_unit_square(2)
        assert m.num_nodes == 9
        assert m.num_elements == 8
        assert m.h == pytest.approx(np.sqrt(2) / 2)

    def test_n4_boundary_facet_count(self):
        # Enumerate cell edges on the boundary: 4 sides x 4 cells each.
        m = build_unit_square(4)
        assert len(m.boundary_facets) == 16

    def test_rejects_n0(self):
        with pytest.raises(ValueError):
            build_unit_square(0)

    def test_positive_volumes(self):
        vols = build_unit_square(5).element_volumes()
        assert (vols > 0).all()
        assert vols.sum() == pytest.approx(1.0, abs=1e-12)


class TestUnitCube:
    def test_n1_kuhn_subdivision(self):
        m = build_unit_cube(1)
        assert m.num_nodes == 8
        assert m.num_elements == 6

    def test_n2_counts(self):
        m = build_unit_cube(2)
        assert m.num_nodes == 27
        assert m.num_elements == 48

    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_total_volume(self, n):
        m = build_unit_cube(n)
        assert m.element_volumes().sum() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_n0(self):
        with pytest.raises(ValueError):
            build_unit_cube(0)

    def test_conforming(self):
        counts = facet_share_counts(build_unit_cube(3))
        assert set(counts.values()) <= {1, 2}


class TestLShape:
    def test_n2_counts(self):
        m = build_lshape(2)
        assert m.num_nodes == 8
        assert m.num_elements == 6

    def test_area(self):
        assert build_lshape(4).element_volumes().sum() == pytest.approx(0.75, abs=1e-12)

    def test_reentrant_corner_is_node(self):
        m = build_lshape(6)
        assert any(np.allclose(x, [0.5, 0.5]) for x in m.nodes)

    @pytest.mark.parametrize("n", [1, 3, 0])
    def test_rejects_odd_or_small(self, n):
        with pytest.raises(ValueError):
            build_lshape(n)


@pytest.mark.parametrize("builder,ns", [
    (build_unit_square, [2, 8, 32, 64]),
    (build_lshape, [2, 8, 32]),
    (build_unit_cube, [2, 6, 12]),
])
def test_facet_sharing_and_geometry(builder, ns):
    for n in ns:
        m = builder(n)
        counts = facet_share_counts(m)
        boundary = {f for f, _ in m.boundary_facets}
        for facet, c in counts.items():
            assert c in (1, 2)
            assert (c == 1) == (facet in boundary)
        assert (m.nodes >= -1e-15).all() and (m.nodes <= 1 + 1e-15).all()
        vols = m.element_volumes()
        assert (vols > 0).all()


class TestClassifyBoundary:
    def test_mixed_2d_n2(self):
        m = classify_boundary(build_unit_square(2), "mixed-2d")
        kinds = Counter(t.kind for _, t in m.boundary_facets)
        assert kinds == {DIRICHLET: 4, NEUMANN: 4}

    def test_neumann_2d_all_neumann(self):
        m = classify_boundary(build_unit_square(3), "neumann-2d")
        assert all(t.kind == NEUMANN for _, t in m.boundary_facets)

    def test_mixed_3d_n1_three_faces_dirichlet(self):
        # Three cube faces at x_i = 0 are Dirichlet, two triangles each.
        m = classify_boundary(build_unit_cube(1), "mixed-3d")
        kinds = Counter(t.kind for _, t in m.boundary_facets)
        assert kinds == {DIRICHLET: 6, NEUMANN: 6}

    def test_convdiff_lshape_neumann_part(self):
        m = classify_boundary(build_lshape(4), "convdiff-lshape")
        for facet, tag in m.boundary_facets:
            on_neumann = all(
                abs(m.nodes[i][1]) < 1e-12 or abs(m.nodes[i][0] - 1) < 1e-12
                for i in facet)
            assert tag.kind == (NEUMANN if on_neumann else DIRICHLET)

    def test_tags_partition_boundary(self):
        m = build_problem_mesh("mixed-2d", 8)
        kinds = Counter(t.kind for _, t in m.boundary_facets)
        assert sum(kinds.values()) == len(m.boundary_facets)
        assert set(kinds) <= {DIRICHLET, NEUMANN}

    def test_unknown_problem(self):
        with pytest.raises(ValueError):
            classify_boundary(build_unit_square(2), "nosuch")

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            classify_boundary(build_unit_square(2), "mixed-3d")


class TestBoundaryTag:
    def test_robin_requires_positive_alpha(self):
        with pytest.raises(ValueError):
            BoundaryTag(ROBIN)
        with pytest.raises(ValueError):
            BoundaryTag(ROBIN, alpha=-1.0)
        assert BoundaryTag(ROBIN, alpha=2.5).alpha == 2.5

    def test_alpha_rejected_elsewhere(self):
        with pytest.raises(ValueError):
            BoundaryTag(NEUMANN, alpha=1.0)


def test_mesh_dump_roundtrip_counts():
    m = build_problem_mesh("mixed-2d", 2)
    text = m.dump()
    sections = text.strip().split("\n\n")
    assert len(sections) == 3
    assert len(sections[0].splitlines()) == m.num_nodes
    assert len(sections[1].splitlines()) == m.num_elements
    assert len(sections[2].splitlines()) == len(m.boundary_facets)
    assert "dirichlet" in sections[2]
