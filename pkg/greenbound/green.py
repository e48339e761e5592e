"""
Discrete Green operator G_D, harmonic extension H_D and the checks that tie
them together.

The interior block of -A_h is factored once per GreenSystem. Green columns
solve -A_h u = e_y / w_y with w_y the node quadrature weight, so that
G_D g equals sum_y G(., y) g(y) w_y.
"""
from dataclasses import dataclass

import numpy as np
from loguru import logger

from ._prototype import (
    BANDED, SPARSE_LU, ITERATIVE, ITERATIVE_THRESHOLD, BACKEND_NAMES,
    DomainError, PreconditionError,
)
from .banded import BandedFactorization
from .sparse import SparseLUFactorization
from .iterative import ConjugateGradientFactorization
from .discrete_domain import Grid, OperatorSpec, assemble_operator, exhaustion_chain

BOUNDARY_DATA = "boundary_data"
SOURCE = "source"
SOLUTION = "solution"
POTENTIAL = "potential"
ROLES = (BOUNDARY_DATA, SOURCE, SOLUTION, POTENTIAL)

RESIDUAL_TOL = 1e-10
SYMMETRY_TOL = 1e-14


@dataclass(frozen=True)
class Field:
    """Values on every active node of a grid (interior first, then boundary)."""
    grid: Grid
    values: np.ndarray
    role: str = SOLUTION

    def __post_init__(self):
        if self.role not in ROLES:
            raise DomainError(f"Unknown field role {self.role}")
        values = np.array(self.values, dtype=float).reshape(-1)
        if values.size != self.grid.n_active:
            raise DomainError(f"Field has {values.size} values, grid has {self.grid.n_active} active nodes")
        if not np.all(np.isfinite(values)):
            raise DomainError(f"{self.role} field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def interior(self):
        return self.values[:self.grid.n_interior]

    @property
    def boundary(self):
        return self.values[self.grid.n_interior:]

    @classmethod
    def constant(cls, grid, value, role=SOLUTION):
        return cls(grid, np.full(grid.n_active, float(value)), role)

    @classmethod
    def from_function(cls, grid, fn, role=SOLUTION):
        """Samples fn(coords) with boundary nodes taken at their trace points."""
        pts = grid.coords.copy()
        pts[grid.n_interior:] = grid.trace[grid.n_interior:]
        return cls(grid, np.broadcast_to(np.asarray(fn(pts), dtype=float), (grid.n_active,)), role)

    def restrict(self, sub_grid):
        where = sub_grid.locate(self.grid)
        if np.any(where < 0):
            raise DomainError("Sub-grid has nodes outside the field's grid")
        return Field(sub_grid, self.values[where], self.role)

    def with_values(self, values, role=None):
        return Field(self.grid, values, self.role if role is None else role)


def field_values(data, grid, part="all"):
    """
    Active-node values for a Field, a scalar or an array covering either
    all active nodes or just the requested part.
    """
    if isinstance(data, Field):
        if data.grid is not grid and not (data.grid.same_lattice(grid) and np.array_equal(data.grid.ids, grid.ids)):
            raise DomainError("Field lives on a different grid")
        values = np.asarray(data.values, dtype=float)
    elif np.ndim(data) == 0:
        values = np.full(grid.n_active, float(data))
    else:
        arr = np.asarray(data, dtype=float).reshape(-1)
        values = np.zeros(grid.n_active)
        if arr.size == grid.n_active:
            values = arr.copy()
        elif part == "interior" and arr.size == grid.n_interior:
            values[:grid.n_interior] = arr
        elif part == "boundary" and arr.size == grid.n_active - grid.n_interior:
            values[grid.n_interior:] = arr
        else:
            raise DomainError(f"Cannot place {arr.size} values on {part} nodes of {grid}")
    if part == "interior":
        return values[:grid.n_interior]
    if part == "boundary":
        return values[grid.n_interior:]
    return values


class GreenSystem:
    """
    A grid, its assembled operator and one factorization of -A_II.

    Solves never modify the factorization; one system can be shared across
    threads.
    """

    def __init__(self, grid: Grid, op: OperatorSpec, backend=None, log=False):
        self.log_print = log
        self.grid = grid
        self.op = op
        self.assembled = assemble_operator(grid, op)
        self.neg_interior = (-self.assembled.interior_block).tocsc()
        self.coupling = self.assembled.boundary_coupling.tocsr()
        self.symmetric = _is_symmetric(self.neg_interior)
        self.backend = self._choose_backend() if backend is None else backend

        if self.backend == BANDED:
            self.factor = BandedFactorization(self.neg_interior)
        elif self.backend == SPARSE_LU:
            self.factor = SparseLUFactorization(self.neg_interior)
        elif self.backend == ITERATIVE:
            self.factor = ConjugateGradientFactorization(self.neg_interior)
        else:
            raise DomainError(f"Unknown backend {backend}")
        self.log(f"GreenSystem {grid} factored with {BACKEND_NAMES[self.backend]} backend")

    def _choose_backend(self):
        if self.grid.dim == 1:
            return BANDED
        if self.grid.n_interior > ITERATIVE_THRESHOLD and self.symmetric:
            return ITERATIVE
        return SPARSE_LU

    def log(self, msg):
        if self.log_print:
            logger.debug(msg)

    @property
    def weight(self):
        return self.grid.weight

    def solve(self, rhs):
        """u_I with -A_II u_I = rhs."""
        return self.factor.solve(rhs)

    def potential(self, g_interior):
        """Interior values of G_D g for g given on interior nodes."""
        return self.solve(g_interior)

    def harmonic(self, f_boundary):
        """Interior values of H_D f for f given on boundary nodes."""
        return self.solve(self.coupling @ np.asarray(f_boundary, dtype=float))


def _is_symmetric(matrix):
    diff = abs(matrix - matrix.T)
    scale = max(float(abs(matrix).max()), 1.0)
    return diff.nnz == 0 or float(diff.max()) <= SYMMETRY_TOL * scale


def _nested(small: Grid, big: Grid):
    if not small.same_lattice(big):
        return False
    where = small.locate(big)
    inner = where[:small.n_interior]
    return bool(np.all(where >= 0) and np.all(inner < big.n_interior))


# ---------------------------------------------------------------------------
# Core operators
# ---------------------------------------------------------------------------

def harmonic_extension(sys: GreenSystem, f):
    """H_D f: A_h h = 0 inside, h = f on the boundary."""
    grid = sys.grid
    fb = field_values(f, grid, "boundary")
    values = np.concatenate([sys.harmonic(fb), fb])
    return Field(grid, values, SOLUTION)


def green_apply(sys: GreenSystem, g):
    """G_D g: -A_h u = g inside, u = 0 on the boundary."""
    grid = sys.grid
    gi = field_values(g, grid, "interior")
    ui = sys.potential(gi)
    scale = float(np.max(np.abs(gi))) if gi.size else 0.0
    residual = float(np.max(np.abs(sys.neg_interior @ ui - gi))) if gi.size else 0.0
    if residual > RESIDUAL_TOL * max(scale, 1e-300):
        logger.warning(f"green_apply residual {residual:.3e} above {RESIDUAL_TOL:g} * {scale:.3e}")
    return Field(grid, np.concatenate([ui, np.zeros(grid.n_active - grid.n_interior)]), POTENTIAL)


def green_matrix_column(sys: GreenSystem, y):
    """G_D(., y) for an interior node y."""
    grid = sys.grid
    y = int(y)
    if not 0 <= y < grid.n_interior:
        raise DomainError(f"Green column needs an interior node, got {y}")
    rhs = np.zeros(grid.n_interior)
    rhs[y] = 1.0 / grid.weight
    ui = sys.solve(rhs)
    return Field(grid, np.concatenate([ui, np.zeros(grid.n_active - grid.n_interior)]), POTENTIAL)


def apply_operator(sys: GreenSystem, u):
    """(A_h u) at the interior nodes."""
    return sys.assembled.apply(field_values(u, sys.grid))


def s_datum(sys: GreenSystem, f, g):
    """S_D(f, g) = H_D f + G_D g for nonnegative data."""
    fb = field_values(f, sys.grid, "boundary")
    gi = field_values(g, sys.grid, "interior")
    if np.any(fb < 0):
        raise PreconditionError(f"Boundary datum f must be nonnegative (min {fb.min():.3g})")
    if np.any(gi < 0):
        raise PreconditionError(f"Source g must be nonnegative (min {gi.min():.3g})")
    h = harmonic_extension(sys, fb)
    p = green_apply(sys, gi)
    return Field(sys.grid, h.values + p.values, POTENTIAL)


# ---------------------------------------------------------------------------
# Identity checks
# ---------------------------------------------------------------------------

def restriction_identity_check(sys_small: GreenSystem, sys_big: GreenSystem, y):
    """
    max |G_D(., y) - (G_O(., y) - H_D G_O(., y))| over the interior of the
    small grid D, with O the big grid and y an interior node of D.
    """
    small, big = sys_small.grid, sys_big.grid
    if not _nested(small, big):
        raise DomainError("restriction_identity_check needs the small grid nested in the big one")
    y = int(y)
    if not 0 <= y < small.n_interior:
        raise DomainError(f"y={y} is not an interior node of the small grid")
    where = small.locate(big)

    g_small = green_matrix_column(sys_small, y).interior
    g_big = green_matrix_column(sys_big, where[y]).values[where]
    corrected = g_big[:small.n_interior] - sys_small.harmonic(g_big[small.n_interior:])
    return float(np.max(np.abs(g_small - corrected)))


def green_limit_check(chain, op: OperatorSpec, y, probe=None, backend=None):
    """
    G_{D_k}(probe, y) along an exhaustion chain. `y` and `probe` are active
    indices of the final grid and must be interior to the smallest level.
    """
    final = chain.final
    probe = y if probe is None else probe
    values = []
    columns = []
    for level in chain:
        sys = GreenSystem(level, op, backend=backend)
        ly = int(level.lookup[final.ids[int(y)]])
        lp = int(level.lookup[final.ids[int(probe)]])
        if not (0 <= ly < level.n_interior and 0 <= lp < level.n_interior):
            raise DomainError("y and probe must be interior to every level of the chain")
        col = green_matrix_column(sys, ly)
        columns.append(col)
        values.append(float(col.values[lp]))

    # nodewise G_small <= G_big at the nodes of the small level
    max_violation = 0.0
    for small, big in zip(columns[:-1], columns[1:]):
        where = small.grid.locate(big.grid)
        gap = small.values - big.values[where]
        max_violation = max(max_violation, float(np.max(gap)))
    return {
        "values": values,
        "monotone": bool(np.all(np.diff(values) >= -1e-12 * max(1.0, max(values)))),
        "max_violation": max(max_violation, 0.0),
    }


def harmonicity_off_support_check(sys: GreenSystem, g):
    """max |A_h G_D g| over interior nodes outside the support of g."""
    gi = field_values(g, sys.grid, "interior")
    u = green_apply(sys, gi)
    off = gi == 0
    if not off.any():
        return 0.0
    return float(np.max(np.abs(apply_operator(sys, u)[off])))


def _gamma(dim, r):
    if dim == 1:
        return np.ones_like(r)
    return np.maximum(1.0, -np.log(r))


def gamma_bound_diagnostic(sys: GreenSystem, samples=65):
    """
    Sampled sup of G_D(x, y) / Gamma(x - y), Gamma = 1 in 1D and
    max(1, -log r) in 2D. Distances are floored at half a mesh width.
    """
    grid = sys.grid
    n = grid.n_interior
    ys = np.unique(np.round(np.linspace(0, n - 1, min(n, samples))).astype(int))
    floor = 0.5 * min(grid.spacing)
    pts = grid.coords[:n]
    best = 0.0
    for y in ys:
        col = green_matrix_column(sys, y).interior
        r = np.maximum(np.linalg.norm(pts - pts[y], axis=1), floor)
        best = max(best, float(np.max(col / _gamma(grid.dim, r))))
    return best


def green_selftest(sys: GreenSystem, seed=0, levels=3):
    """
    Restriction, exhaustion limit, symmetry, positivity and maximum-principle
    checks on one system, as {check_name: {max_error, pass, ...}}.
    """
    rng = np.random.default_rng(seed)
    grid = sys.grid
    report = {}

    depth = grid.depth()
    levels = int(max(1, min(levels, depth.max())))
    chain = exhaustion_chain(grid, levels)
    smallest = chain[0]
    y_small = int(rng.integers(smallest.n_interior))
    y_final = int(smallest.locate(grid)[y_small])

    if levels > 1:
        sys_small = GreenSystem(smallest, sys.op, log=sys.log_print)
        err = restriction_identity_check(sys_small, sys, y_small)
        scale = float(np.max(green_matrix_column(sys, y_final).values))
        report["restriction"] = {"max_error": err, "pass": err <= RESIDUAL_TOL * max(1.0, scale), "y": y_final}
    else:
        report["restriction"] = {"max_error": 0.0, "pass": True, "applicable": False}

    limit = green_limit_check(chain, sys.op, y_final)
    report["limit"] = {"max_error": limit["max_violation"], "pass": limit["monotone"] and limit["max_violation"] <= 1e-12 * max(1.0, max(limit["values"])),
                       "values": limit["values"]}

    y1, y2 = (int(v) for v in rng.integers(grid.n_interior, size=2))
    c1 = green_matrix_column(sys, y1).values
    c2 = green_matrix_column(sys, y2).values
    asym = abs(c1[y2] - c2[y1])
    report["symmetry"] = {
        "max_error": asym,
        "pass": (asym <= 1e-10 * max(1.0, abs(c1[y2]))) if sys.symmetric else True,
        "applicable": sys.symmetric,
    }

    low = float(np.min(c1[:grid.n_interior]))
    report["positivity"] = {"max_error": max(0.0, -low), "pass": low >= 0.0, "min_value": low}

    fb = rng.uniform(0.0, 1.0, grid.n_active - grid.n_interior)
    h = harmonic_extension(sys, fb).interior
    excess = max(0.0, float(np.max(h) - fb.max()), float(fb.min() - np.min(h)))
    report["max_principle"] = {"max_error": excess, "pass": excess <= 1e-12}
    return report
