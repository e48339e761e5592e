import os
import tempfile

import numpy as np
import pytest

from greenbound._prototype import AssemblyError, DomainError, EllipticityError
from greenbound.discrete_domain import (
    OperatorSpec, build_interval_grid, build_rect_grid, build_disk_grid,
    assemble_operator, check_ellipticity, exhaustion_chain,
    SKEWED, UPWIND,
)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

class TestGrids:
    def test_interval_nodes(self):
        grid = build_interval_grid(0, 1, 3)
        assert grid.n_interior == 3
        assert grid.n_active == 5
        np.testing.assert_allclose(grid.coords[grid.interior, 0], [0.25, 0.5, 0.75])
        np.testing.assert_allclose(sorted(grid.coords[grid.boundary, 0]), [0.0, 1.0])

    def test_interval_spacing(self):
        assert build_interval_grid(0, 1, 511).spacing == (1 / 512,)

    def test_interval_errors(self):
        with pytest.raises(DomainError):
            build_interval_grid(1, 0, 3)
        with pytest.raises(DomainError):
            build_interval_grid(0, 1, 2)

    def test_rect_counts(self):
        grid = build_rect_grid(((0, 1), (0, 1)), 4, 4)
        assert grid.n_interior == 16
        assert grid.n_active == 36
        assert grid.weight == pytest.approx(0.04)

    def test_rect_errors(self):
        with pytest.raises(DomainError):
            build_rect_grid(((0, 1), (0, 1)), 2, 4)
        with pytest.raises(DomainError):
            build_rect_grid(((0, 0), (0, 1)), 4, 4)

    def test_disk_matches_brute_force(self):
        grid = build_disk_grid((0, 0), 1, 9)
        axis = np.linspace(-1, 1, 9)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        assert grid.n_interior == int(np.count_nonzero(xx ** 2 + yy ** 2 < 1))

    def test_disk_trace_on_circle(self):
        grid = build_disk_grid((0.5, -0.5), 2.0, 11)
        radii = np.linalg.norm(grid.trace[grid.boundary] - np.array([0.5, -0.5]), axis=1)
        np.testing.assert_allclose(radii, 2.0)
        assert np.all(np.linalg.norm(grid.coords[grid.interior] - np.array([0.5, -0.5]), axis=1) < 2.0)

    def test_interior_and_boundary_disjoint(self):
        grid = build_disk_grid((0, 0), 1, 15)
        assert len(set(grid.ids[grid.interior]) & set(grid.ids[grid.boundary])) == 0

    def test_sub_box_and_nearest(self):
        grid = build_interval_grid(0, 1, 255)
        small = grid.sub_box([0.25], [0.75])
        assert small.n_interior == 127
        assert small.is_nested_in(grid)
        k = grid.nearest_node([0.5])
        assert grid.coords[k, 0] == pytest.approx(0.5)

    def test_sub_box_2d(self):
        grid = build_rect_grid(((0, 1), (0, 1)), 32, 32)
        h = grid.spacing[0]
        small = grid.sub_box([8 * h, 8 * h], [25 * h, 25 * h])
        assert small.n_interior == 16 * 16
        assert small.is_nested_in(grid)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

class TestAssembly:
    def test_1d_laplacian_stencil(self):
        grid = build_interval_grid(0, 1, 3)
        a = assemble_operator(grid, OperatorSpec.laplacian(1)).interior_block.toarray()
        h2 = 0.25 ** 2
        expected = (np.diag([-2.0] * 3) + np.diag([1.0] * 2, 1) + np.diag([1.0] * 2, -1)) / h2
        np.testing.assert_allclose(a, expected)

    def test_peclet_switch(self):
        grid = build_interval_grid(0, 1, 3)
        assembled = assemble_operator(grid, OperatorSpec.laplacian_drift([10.0]))
        assert assembled.upwind.all()
        calm = assemble_operator(grid, OperatorSpec.laplacian_drift([1.0]))
        assert not calm.upwind.any()

    def test_upwind_everywhere(self):
        grid = build_interval_grid(0, 1, 7)
        assembled = assemble_operator(grid, OperatorSpec.laplacian_drift([0.1], scheme=UPWIND))
        assert assembled.upwind.all()

    def test_2d_five_point(self):
        grid = build_rect_grid(((0, 1), (0, 1)), 5, 5)
        m = assemble_operator(grid, OperatorSpec.laplacian(2)).matrix
        assert np.all(np.diff(m.indptr) == 5)
        h2 = grid.spacing[0] ** 2
        np.testing.assert_allclose(m.diagonal(), -4.0 / h2)

    def test_quadratic_reproduced_exactly(self):
        grid = build_interval_grid(0, 1, 15)
        op = OperatorSpec.constant([[2.0]], [0.5])
        u = grid.coords[:, 0] ** 2
        lu = assemble_operator(grid, op).apply(u)
        np.testing.assert_allclose(lu, 2.0 * 2.0 + 0.5 * 2.0 * grid.coords[grid.interior, 0], rtol=1e-12)

    def test_upwind_is_first_order(self):
        errors = []
        for n in (31, 63):
            grid = build_interval_grid(0, 1, n)
            op = OperatorSpec.laplacian_drift([1.0], scheme=UPWIND)
            u = grid.coords[:, 0] ** 2
            exact = 2.0 + 2.0 * grid.coords[grid.interior, 0]
            errors.append(np.max(np.abs(assemble_operator(grid, op).apply(u) - exact)))
        assert errors[1] < 0.6 * errors[0]
        assert errors[1] == pytest.approx(1 / 64, rel=1e-9)

    def test_m_matrix_violation_names_node(self):
        grid = build_rect_grid(((0, 1), (0, 1)), 4, 4)
        op = OperatorSpec.constant([[1.0, 0.9], [0.9, 1.0]])
        with pytest.raises(AssemblyError, match="interior node"):
            assemble_operator(grid, op)

    def test_skewed_stencil_keeps_m_matrix(self):
        grid = build_rect_grid(((0, 1), (0, 1)), 4, 4)
        op = OperatorSpec.constant([[1.0, 0.9], [0.9, 1.0]], cross_stencil=SKEWED)
        m = assemble_operator(grid, op).matrix.tocoo()
        off = m.row != m.col
        assert np.all(m.data[off] >= 0)

    def test_skewed_stencil_consistent_on_xy(self):
        grid = build_rect_grid(((0, 1), (0, 1)), 6, 6)
        op = OperatorSpec.constant([[1.0, -0.5], [-0.5, 1.0]], cross_stencil=SKEWED)
        u = grid.coords[:, 0] * grid.coords[:, 1]
        lu = assemble_operator(grid, op).apply(u)
        np.testing.assert_allclose(lu, -1.0, rtol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(AssemblyError):
            assemble_operator(build_interval_grid(0, 1, 3), OperatorSpec.laplacian(2))

    def test_export_coo(self):
        grid = build_interval_grid(0, 1, 3)
        assembled = assemble_operator(grid, OperatorSpec.laplacian(1))
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "a.txt")
            assembled.export_coo(path)
            with open(path) as fh:
                lines = fh.read().splitlines()
        assert len(lines) == assembled.matrix.nnz
        i, j, v = lines[0].split()
        assert float(v) == assembled.matrix[int(i), int(j)]


# ---------------------------------------------------------------------------
# ellipticity
# ---------------------------------------------------------------------------

class TestEllipticity:
    def test_identity(self):
        assert check_ellipticity(OperatorSpec.laplacian(2), build_rect_grid(((0, 1), (0, 1)), 3, 3)) == pytest.approx(1.0)

    def test_diagonal(self):
        op = OperatorSpec.constant([[2.0, 0.0], [0.0, 0.5]])
        assert check_ellipticity(op, build_rect_grid(((0, 1), (0, 1)), 3, 3)) == pytest.approx(0.5)

    def test_degenerate(self):
        op = OperatorSpec.constant([[1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(EllipticityError):
            check_ellipticity(op, build_rect_grid(((0, 1), (0, 1)), 3, 3))


# ---------------------------------------------------------------------------
# exhaustion
# ---------------------------------------------------------------------------

class TestExhaustion:
    def test_interval_levels(self):
        chain = exhaustion_chain(build_interval_grid(0, 1, 9), 3)
        assert [g.n_interior for g in chain] == [5, 7, 9]

    def test_square_levels(self):
        chain = exhaustion_chain(build_rect_grid(((0, 1), (0, 1)), 8, 8), 2)
        assert [g.n_interior for g in chain] == [36, 64]

    def test_nesting(self):
        chain = exhaustion_chain(build_disk_grid((0, 0), 1, 21), 4)
        for small, big in zip(chain.levels[:-1], chain.levels[1:]):
            assert small.is_nested_in(big)
            assert set(small.ids) <= set(big.ids)

    def test_too_many_levels(self):
        with pytest.raises(DomainError):
            exhaustion_chain(build_interval_grid(0, 1, 3), 3)

    def test_restrict(self):
        grid = build_interval_grid(0, 1, 9)
        chain = exhaustion_chain(grid, 2)
        values = grid.coords[:, 0]
        np.testing.assert_allclose(chain.restrict(values, 0), chain[0].coords[:, 0])
