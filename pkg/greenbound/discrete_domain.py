"""
Finite-difference stand-ins for a domain D and the operator
L = sum a_ij d_ij + sum b_i d_i.

A Grid lives on a tensor lattice. Its active nodes are ordered interior
first, then boundary; every interior node has all of its 3^d - 1 lattice
neighbours active, so any 9-point (2D) or 3-point (1D) stencil closes.
"""
import itertools
from dataclasses import dataclass, field
from typing import Callable, List

import numpy as np
from scipy import sparse
from scipy.ndimage import distance_transform_cdt

from ._prototype import DomainError, AssemblyError, EllipticityError

CENTERED = "centered"
UPWIND = "upwind"
CORNER = "corner"
SKEWED = "skewed"

M_MATRIX_TOL = 1e-12
MAX_INTERIOR_NODES = 1_000_000


class Grid:

    def __init__(self, dim, spacing, origin, shape, interior_ids, boundary_ids,
                 trace=None, kind="rect", parent_index=None):
        if dim not in (1, 2):
            raise DomainError(f"Grids are 1D or 2D, got dim={dim}")
        if len(spacing) != dim or any(h <= 0 for h in spacing):
            raise DomainError(f"Grid spacing must be positive per axis, got {spacing}")
        interior_ids = np.asarray(interior_ids, dtype=np.int64)
        boundary_ids = np.asarray(boundary_ids, dtype=np.int64)
        if np.intersect1d(interior_ids, boundary_ids).size:
            raise DomainError("Interior and boundary node sets overlap")

        self.dim = dim
        self.spacing = tuple(float(h) for h in spacing)
        self.origin = tuple(float(o) for o in origin)
        self.shape = tuple(int(s) for s in shape)
        self.kind = kind
        self.ids = np.concatenate([interior_ids, boundary_ids])
        self.n_interior = int(interior_ids.size)
        self.n_active = int(self.ids.size)

        self.lookup = np.full(int(np.prod(self.shape)), -1, dtype=np.int64)
        self.lookup[self.ids] = np.arange(self.n_active)

        multi = np.stack(np.unravel_index(self.ids, self.shape), axis=1)
        self.multi_index = multi
        self.coords = np.asarray(self.origin)[None, :] + multi * np.asarray(self.spacing)[None, :]
        self.trace = self.coords.copy() if trace is None else np.asarray(trace, dtype=float)
        self.parent_index = np.arange(self.n_active) if parent_index is None else np.asarray(parent_index)

        self._check_stencil_closure()

    def __repr__(self):
        return f"Grid(kind={self.kind!r}, dim={self.dim}, interior={self.n_interior}, boundary={self.n_active - self.n_interior})"

    @property
    def interior(self):
        return np.arange(self.n_interior)

    @property
    def boundary(self):
        return np.arange(self.n_interior, self.n_active)

    @property
    def weight(self):
        """Quadrature weight of one node: h in 1D, h_x h_y in 2D."""
        return float(np.prod(self.spacing))

    def _check_stencil_closure(self):
        for offset in neighbor_offsets(self.dim):
            idx = self.neighbors(self.interior, offset)
            if np.any(idx < 0):
                bad = int(np.flatnonzero(idx < 0)[0])
                raise DomainError(
                    f"Interior node {bad} at {self.coords[bad].tolist()} has no stencil neighbour at offset {offset}"
                )

    def neighbors(self, active, offset):
        """Active index of the lattice neighbour at `offset`, or -1."""
        multi = self.multi_index[active] + np.asarray(offset)[None, :]
        inside = np.all((multi >= 0) & (multi < np.asarray(self.shape)[None, :]), axis=1)
        out = np.full(len(active), -1, dtype=np.int64)
        if inside.any():
            flat = np.ravel_multi_index(tuple(multi[inside].T), self.shape)
            out[inside] = self.lookup[flat]
        return out

    def same_lattice(self, other):
        return (self.shape == other.shape and self.dim == other.dim
                and np.allclose(self.origin, other.origin) and np.allclose(self.spacing, other.spacing))

    def is_nested_in(self, other):
        """Closed node set of self inside the interior of other, on one lattice."""
        if not self.same_lattice(other):
            return False
        where = other.lookup[self.ids]
        return bool(np.all(where >= 0) and np.all(where < other.n_interior))

    def locate(self, other):
        """Active indices in `other` of this grid's active nodes (-1 when absent)."""
        if not self.same_lattice(other):
            raise DomainError("Grids do not share a lattice")
        return other.lookup[self.ids]

    def nearest_node(self, point, interior_only=True):
        point = np.asarray(point, dtype=float).reshape(1, -1)
        candidates = self.interior if interior_only else np.arange(self.n_active)
        dist = np.linalg.norm(self.coords[candidates] - point, axis=1)
        return int(candidates[int(np.argmin(dist))])

    def depth(self):
        """Chessboard distance (in nodes) from each interior node to the nearest non-interior node."""
        mask = np.zeros(self.shape, dtype=bool)
        mask.flat[self.ids[:self.n_interior]] = True
        padded = np.pad(mask, 1, constant_values=False)
        dist = distance_transform_cdt(padded, metric="chessboard")
        inner = tuple(slice(1, -1) for _ in range(self.dim))
        return dist[inner].ravel()[self.ids[:self.n_interior]].astype(np.int64)

    def sub_grid(self, interior_mask, kind="subgrid"):
        """
        Grid whose interior is the masked subset of this interior and whose
        boundary is the ring of active nodes around it.
        """
        interior_mask = np.asarray(interior_mask, dtype=bool)
        if interior_mask.shape != (self.n_interior,):
            raise DomainError("sub_grid mask must cover the interior nodes")
        new_interior = np.flatnonzero(interior_mask)
        if new_interior.size == 0:
            raise DomainError("sub_grid would have no interior nodes")

        ring = set()
        for offset in neighbor_offsets(self.dim):
            ring.update(self.neighbors(new_interior, offset).tolist())
        ring.discard(-1)
        ring.difference_update(new_interior.tolist())
        new_boundary = np.array(sorted(ring, key=lambda k: self.ids[k]), dtype=np.int64)

        active = np.concatenate([new_interior, new_boundary])
        return Grid(self.dim, self.spacing, self.origin, self.shape,
                    self.ids[new_interior], self.ids[new_boundary],
                    trace=self.trace[active], kind=kind,
                    parent_index=self.parent_index[active])

    def sub_box(self, lower, upper):
        """Sub-grid whose interior holds the interior nodes strictly inside the box."""
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        if lower.size != self.dim or upper.size != self.dim or np.any(lower >= upper):
            raise DomainError(f"Degenerate box {lower.tolist()} - {upper.tolist()}")
        eps = 1e-9 * np.asarray(self.spacing)
        pts = self.coords[:self.n_interior]
        mask = np.all((pts > lower + eps) & (pts < upper - eps), axis=1)
        return self.sub_grid(mask, kind="box")


def neighbor_offsets(dim):
    return [off for off in itertools.product((-1, 0, 1), repeat=dim) if any(off)]


# ---------------------------------------------------------------------------
# Grid builders
# ---------------------------------------------------------------------------

def _check_count(n, name):
    if int(n) != n or n < 3:
        raise DomainError(f"{name} must be an integer >= 3, got {n}")


def build_interval_grid(x_min, x_max, n):
    _check_count(n, "n")
    if not x_min < x_max:
        raise DomainError(f"Interval needs x_min < x_max, got ({x_min}, {x_max})")
    h = (x_max - x_min) / (n + 1)
    return Grid(1, (h,), (x_min,), (n + 2,), np.arange(1, n + 1), np.array([0, n + 1]), kind="interval")


def build_rect_grid(bounds, nx, ny):
    _check_count(nx, "nx")
    _check_count(ny, "ny")
    (x0, x1), (y0, y1) = bounds
    if not (x0 < x1 and y0 < y1):
        raise DomainError(f"Degenerate rectangle bounds {bounds}")
    if nx * ny > MAX_INTERIOR_NODES:
        raise DomainError(f"{nx * ny} interior nodes exceed the limit of {MAX_INTERIOR_NODES}")
    shape = (nx + 2, ny + 2)
    ii, jj = np.meshgrid(np.arange(shape[0]), np.arange(shape[1]), indexing="ij")
    is_inner = (ii > 0) & (ii < nx + 1) & (jj > 0) & (jj < ny + 1)
    flat = np.arange(int(np.prod(shape))).reshape(shape)
    return Grid(2, ((x1 - x0) / (nx + 1), (y1 - y0) / (ny + 1)), (x0, y0), shape,
                flat[is_inner], flat[~is_inner], kind="rect")


def build_disk_grid(center, radius, n_per_axis):
    """
    Masked lattice over the bounding square of the disk. Nodes strictly
    inside the disk are interior; their outside lattice neighbours are
    boundary, carrying the radial projection onto the circle as trace.
    """
    _check_count(n_per_axis, "n_per_axis")
    if not radius > 0:
        raise DomainError(f"Disk radius must be positive, got {radius}")
    cx, cy = center
    n = int(n_per_axis)
    h = 2.0 * radius / (n - 1)
    origin = (cx - radius, cy - radius)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    xs = origin[0] + ii * h
    ys = origin[1] + jj * h
    inside = np.hypot(xs - cx, ys - cy) < radius * (1.0 - 1e-12)
    if not inside.any():
        raise DomainError("Disk grid has no interior nodes")

    flat = np.arange(n * n).reshape(n, n)
    interior_ids = flat[inside]
    ring = np.zeros_like(inside)
    padded = np.pad(inside, 1, constant_values=False)
    for di, dj in neighbor_offsets(2):
        ring |= padded[1 + di:1 + di + n, 1 + dj:1 + dj + n]
    ring &= ~inside
    boundary_ids = flat[ring]

    ids = np.concatenate([interior_ids, boundary_ids])
    pts = np.stack([xs.ravel()[ids], ys.ravel()[ids]], axis=1)
    trace = pts.copy()
    rel = pts[interior_ids.size:] - np.array([cx, cy])
    trace[interior_ids.size:] = np.array([cx, cy]) + radius * rel / np.linalg.norm(rel, axis=1)[:, None]
    return Grid(2, (h, h), origin, (n, n), interior_ids, boundary_ids, trace=trace, kind="disk")


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

def _constant_matrix_field(matrix):
    matrix = np.asarray(matrix, dtype=float)
    return lambda x: np.broadcast_to(matrix, (x.shape[0],) + matrix.shape).copy()


def _constant_vector_field(vector):
    vector = np.asarray(vector, dtype=float)
    return lambda x: np.broadcast_to(vector, (x.shape[0],) + vector.shape).copy()


@dataclass(frozen=True)
class OperatorSpec:
    """
    a(x) -> (n, d, d) symmetric diffusion, b(x) -> (n, d) drift.

    scheme "centered" falls back to first-order upwind at nodes whose mesh
    Peclet number h |b_i| / (2 a_ii) reaches 1; "upwind" upwinds everywhere.
    """
    dim: int
    a: Callable = field(compare=False)
    b: Callable = field(compare=False)
    scheme: str = CENTERED
    cross_stencil: str = CORNER
    name: str = "custom"

    def __post_init__(self):
        if self.scheme not in (CENTERED, UPWIND):
            raise DomainError(f"Unknown scheme {self.scheme}")
        if self.cross_stencil not in (CORNER, SKEWED):
            raise DomainError(f"Unknown cross stencil {self.cross_stencil}")

    @classmethod
    def laplacian(cls, dim, **kwargs):
        return cls(dim, _constant_matrix_field(np.eye(dim)), _constant_vector_field(np.zeros(dim)),
                   name="laplacian", **kwargs)

    @classmethod
    def laplacian_drift(cls, b, **kwargs):
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return cls(b.size, _constant_matrix_field(np.eye(b.size)), _constant_vector_field(b),
                   name="laplacian_drift", **kwargs)

    @classmethod
    def constant(cls, a, b=None, **kwargs):
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.zeros(a.shape[0]) if b is None else np.atleast_1d(np.asarray(b, dtype=float))
        return cls(a.shape[0], _constant_matrix_field(a), _constant_vector_field(b), **kwargs)

    def coefficients(self, coords):
        a = np.asarray(self.a(coords), dtype=float).reshape(coords.shape[0], self.dim, self.dim)
        b = np.asarray(self.b(coords), dtype=float).reshape(coords.shape[0], self.dim)
        return 0.5 * (a + np.transpose(a, (0, 2, 1))), b


def check_ellipticity(op: OperatorSpec, grid: Grid):
    """Smallest eigenvalue of a(x) over the interior nodes (the constant beta)."""
    a, _ = op.coefficients(grid.coords[:grid.n_interior])
    eig = np.linalg.eigvalsh(a)
    beta = float(eig.min())
    if not beta > 0:
        bad = int(np.argmin(eig.min(axis=1)))
        raise EllipticityError(
            f"a(x) is not positive definite at node {bad} {grid.coords[bad].tolist()} (min eigenvalue {beta})"
        )
    return beta


@dataclass
class AssembledOperator:
    """A_h rows over interior nodes, columns over all active nodes."""
    grid: Grid
    op: OperatorSpec
    matrix: sparse.csr_matrix
    upwind: np.ndarray
    beta: float

    @property
    def interior_block(self):
        return self.matrix[:, :self.grid.n_interior]

    @property
    def boundary_coupling(self):
        return self.matrix[:, self.grid.n_interior:]

    def apply(self, values):
        """(A_h u) at the interior nodes for u given on all active nodes."""
        return self.matrix @ np.asarray(values, dtype=float)

    def export_coo(self, path):
        coo = self.matrix.tocoo()
        with open(path, "w", encoding="utf-8") as fh:
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i} {j} {v:.17g}\n")


def assemble_operator(grid: Grid, op: OperatorSpec):
    if op.dim != grid.dim:
        raise AssemblyError(f"Operator is {op.dim}D but grid is {grid.dim}D")
    beta = check_ellipticity(op, grid)

    n = grid.n_interior
    nodes = grid.interior
    a, b = op.coefficients(grid.coords[:n])
    h = grid.spacing
    entries = {}
    center = np.zeros(n)
    upwind = np.zeros((n, grid.dim), dtype=bool)

    def add(offset, coef):
        offset = tuple(offset)
        entries[offset] = entries.get(offset, 0.0) + coef

    for i in range(grid.dim):
        aii, bi, hi = a[:, i, i], b[:, i], h[i]
        peclet = hi * np.abs(bi) / (2.0 * aii)
        up = np.full(n, op.scheme == UPWIND) | (peclet >= 1.0)
        upwind[:, i] = up
        e = np.zeros(grid.dim, dtype=int)
        e[i] = 1

        plus = aii / hi ** 2 + np.where(up, np.maximum(bi, 0.0) / hi, bi / (2.0 * hi))
        minus = aii / hi ** 2 + np.where(up, np.maximum(-bi, 0.0) / hi, -bi / (2.0 * hi))
        center -= 2.0 * aii / hi ** 2 + np.where(up, np.abs(bi) / hi, 0.0)
        add(e, plus)
        add(-e, minus)

    if grid.dim == 2:
        a12 = a[:, 0, 1]
        hxhy = h[0] * h[1]
        if op.cross_stencil == CORNER:
            q = a12 / (2.0 * hxhy)
            add((1, 1), q)
            add((-1, -1), q)
            add((1, -1), -q)
            add((-1, 1), -q)
        else:
            k = np.abs(a12) / hxhy
            for off in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                add(off, -k)
            center += 2.0 * k
            pos = np.where(a12 > 0, k, 0.0)
            neg = np.where(a12 < 0, k, 0.0)
            add((1, 1), pos)
            add((-1, -1), pos)
            add((1, -1), neg)
            add((-1, 1), neg)

    rows = [nodes]
    cols = [nodes]
    vals = [center]
    for offset, coef in entries.items():
        rows.append(nodes)
        cols.append(grid.neighbors(nodes, offset))
        vals.append(np.broadcast_to(coef, (n,)))
    matrix = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, grid.n_active),
    )
    matrix.sum_duplicates()
    matrix.eliminate_zeros()

    _check_m_matrix(grid, matrix)
    return AssembledOperator(grid=grid, op=op, matrix=matrix, upwind=upwind, beta=beta)


def _check_m_matrix(grid, matrix):
    """-A_h: positive diagonal, nonpositive off-diagonal, weak row dominance."""
    m = -matrix.tocoo()
    n = grid.n_interior
    diag = np.zeros(n)
    on_diag = m.row == m.col
    np.add.at(diag, m.row[on_diag], m.data[on_diag])
    scale = max(float(np.max(np.abs(diag))), 1.0) if n else 1.0
    tol = M_MATRIX_TOL * scale

    def fail(node, reason):
        raise AssemblyError(
            f"-A_h is not an M-matrix at interior node {node} {grid.coords[node].tolist()}: {reason}; "
            f"the discrete maximum principle would be lost"
        )

    if np.any(diag <= 0):
        fail(int(np.flatnonzero(diag <= 0)[0]), "nonpositive diagonal")
    off = ~on_diag & (m.data > tol)
    if off.any():
        k = int(np.flatnonzero(off)[0])
        fail(int(m.row[k]), f"positive off-diagonal entry {m.data[k]:.3g} towards node {int(m.col[k])}")
    row_sum = np.asarray((-matrix).sum(axis=1)).ravel()
    if np.any(row_sum < -tol):
        fail(int(np.flatnonzero(row_sum < -tol)[0]), "row is not diagonally dominant")
    block_sum = np.asarray((-matrix[:, :n]).sum(axis=1)).ravel()
    coupled = np.asarray(abs(matrix[:, n:]).sum(axis=1)).ravel() > 0
    if np.any(coupled & (block_sum <= 0)):
        fail(int(np.flatnonzero(coupled & (block_sum <= 0))[0]), "boundary-coupled row lacks strict dominance")


# ---------------------------------------------------------------------------
# Exhaustion
# ---------------------------------------------------------------------------

@dataclass
class DomainChain:
    """Nested grids, smallest first; the last level is the full grid."""
    levels: List[Grid]

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def __getitem__(self, k):
        return self.levels[k]

    @property
    def final(self):
        return self.levels[-1]

    def restrict(self, values, level):
        """Values given on the final grid, restricted to a level's active nodes."""
        return np.asarray(values)[self.levels[level].locate(self.final)]


def exhaustion_chain(grid: Grid, levels):
    if int(levels) != levels or levels < 1:
        raise DomainError(f"levels must be a positive integer, got {levels}")
    depth = grid.depth()
    out = []
    for k in range(1, levels + 1):
        peel = levels - k
        if peel == 0:
            out.append(grid)
            continue
        mask = depth > peel
        if not mask.any():
            raise DomainError(f"Grid too small to peel {peel} layers for a {levels}-level chain")
        out.append(grid.sub_grid(mask, kind="level"))
    for small, big in zip(out[:-1], out[1:]):
        if not small.is_nested_in(big):
            raise DomainError("Exhaustion levels are not strictly nested")
    return DomainChain(out)
