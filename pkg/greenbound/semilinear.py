"""
Semilinear problem -Lu + xi psi(u) = g in D, u = f on the boundary, solved
through its integral form u + G_D(xi psi(u)) = s with s = S_D(f, g).
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger

from ._prototype import DomainError, PreconditionError, SolverError
from .nonlinearity import PsiSpec, psi_eval
from .discrete_domain import OperatorSpec
from .green import (
    Field, GreenSystem, SOLUTION, POTENTIAL,
    field_values, green_apply, apply_operator, s_datum,
)

INITIAL_S = "s"
INITIAL_ZERO = "zero"
MIN_RELAXATION = 2.0 ** -20

COMPARISON_TOL = 1e-10
MONOTONE_TOL = 1e-10


@dataclass(frozen=True)
class SolveConfig:
    tol: float = 1e-12
    max_iter: int = 10_000
    relaxation: float = 1.0
    clamp: bool = True
    initial: str = INITIAL_S

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise DomainError(f"max_iter must be a positive integer, got {self.max_iter}")
        if not 0 < self.relaxation <= 1:
            raise DomainError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if self.initial not in (INITIAL_S, INITIAL_ZERO):
            raise DomainError(f"initial must be '{INITIAL_S}' or '{INITIAL_ZERO}', got {self.initial}")

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: data[k] for k in ("tol", "max_iter", "relaxation", "clamp", "initial") if k in data})


@dataclass(frozen=True)
class SolveResult:
    u: Field
    iterations: int
    residual: float
    converged: bool
    bracket: Tuple[Field, Field]
    relaxation: float = 1.0
    s: Optional[Field] = field(default=None, repr=False)


def _check_nonnegative(values, name):
    if not np.all(np.isfinite(values)):
        raise PreconditionError(f"{name} contains non-finite values")
    if np.any(values < 0):
        raise PreconditionError(f"{name} must be nonnegative (min {values.min():.3g})")


def solve_integral_equation(sys: GreenSystem, xi, psi: PsiSpec, s, cfg: SolveConfig = None, u0=None):
    """
    Damped Picard iteration u <- (1 - w) u + w (s - G_D(xi psi(u))).
    An explicit u0 overrides cfg.initial.

    A step that fails to lower the sup-norm residual is rejected and w
    halved (down to 2^-20). The returned u carries the smallest residual seen.
    """
    cfg = cfg or SolveConfig()
    grid = sys.grid
    n = grid.n_interior
    s_all = field_values(s, grid)
    xi_i = field_values(xi, grid, "interior")
    _check_nonnegative(s_all, "s")
    _check_nonnegative(xi_i, "xi")
    s_i = s_all[:n]
    s_b = s_all[n:]

    def fixed_point_map(u):
        return s_i - sys.potential(xi_i * psi_eval(psi, u))

    def settle(u):
        if cfg.clamp:
            u = np.clip(u, 0.0, s_i)
        if not np.all(np.isfinite(u)):
            raise SolverError("Picard iterate became non-finite")
        return u

    if u0 is not None:
        u = settle(field_values(u0, grid, "interior").copy())
    else:
        u = s_i.copy() if cfg.initial == INITIAL_S else np.zeros(n)
    tu = fixed_point_map(u)
    res = float(np.max(np.abs(u - tu))) if n else 0.0
    prev = u
    best_u, best_res = u, res
    omega = cfg.relaxation
    iterations = 0
    converged = False

    while iterations < cfg.max_iter:
        iterations += 1
        new = settle((1.0 - omega) * u + omega * tu)
        t_new = fixed_point_map(new)
        r_new = float(np.max(np.abs(new - t_new))) if n else 0.0
        if r_new >= res and r_new > cfg.tol and omega > MIN_RELAXATION:
            omega = max(omega / 2.0, MIN_RELAXATION)
            sys.log(f"residual rose to {r_new:.3e} at iteration {iterations}; relaxation -> {omega:g}")
            continue
        prev, u, tu, res = u, new, t_new, r_new
        if res < best_res:
            best_u, best_res = u, res
        if res <= cfg.tol:
            converged = True
            break

    if converged:
        # one undamped sweep tightens the PDE residual without loosening the certificate
        polished = settle(tu)
        t_pol = fixed_point_map(polished)
        r_pol = float(np.max(np.abs(polished - t_pol))) if n else 0.0
        if r_pol <= res:
            prev, u, res = u, polished, r_pol
        best_u, best_res = u, res
    else:
        logger.warning(f"Picard iteration stopped after {iterations} iterations, residual {best_res:.3e}")

    sys.log(f"solve finished: iterations={iterations} residual={best_res:.3e} converged={converged}")
    lower = np.minimum(prev, u)
    upper = np.maximum(prev, u)
    return SolveResult(
        u=Field(grid, np.concatenate([best_u, s_b]), SOLUTION),
        iterations=iterations,
        residual=best_res,
        converged=converged,
        bracket=(Field(grid, np.concatenate([lower, s_b]), SOLUTION),
                 Field(grid, np.concatenate([upper, s_b]), SOLUTION)),
        relaxation=omega,
        s=Field(grid, s_all, POTENTIAL),
    )


def solve_dirichlet(sys: GreenSystem, xi, psi: PsiSpec, f, g, cfg: SolveConfig = None):
    s = s_datum(sys, f, g)
    return solve_integral_equation(sys, xi, psi, s, cfg)


def pde_residual(sys: GreenSystem, u, xi, psi: PsiSpec, g):
    """max over interior nodes of |-A_h u + xi psi(u) - g|."""
    grid = sys.grid
    u_all = field_values(u, grid)
    xi_i = field_values(xi, grid, "interior")
    g_i = field_values(g, grid, "interior")
    r = -apply_operator(sys, u_all) + xi_i * psi_eval(psi, u_all[:grid.n_interior]) - g_i
    return float(np.max(np.abs(r))) if r.size else 0.0


def fixed_point_residual(sys: GreenSystem, u, xi, psi: PsiSpec, s):
    """||u + G_D(xi psi(u)) - s|| over interior nodes, recomputed from scratch."""
    grid = sys.grid
    u_i = field_values(u, grid, "interior")
    xi_i = field_values(xi, grid, "interior")
    s_i = field_values(s, grid, "interior")
    return float(np.max(np.abs(u_i + sys.potential(xi_i * psi_eval(psi, u_i)) - s_i)))


def comparison_check(sys: GreenSystem, psi: PsiSpec, first, second, cfg: SolveConfig = None):
    """
    Solves the problems for (f1, g1, xi1) and (f2, g2, xi2) with f1 <= f2,
    g1 <= g2 and xi1 >= xi2, and reports max(u1 - u2).
    """
    grid = sys.grid
    f1, g1, xi1 = first
    f2, g2, xi2 = second
    orderings = (
        ("f1 <= f2", field_values(f1, grid, "boundary"), field_values(f2, grid, "boundary")),
        ("g1 <= g2", field_values(g1, grid, "interior"), field_values(g2, grid, "interior")),
        ("xi1 >= xi2", field_values(xi2, grid, "interior"), field_values(xi1, grid, "interior")),
    )
    for name, low, high in orderings:
        if np.any(low > high):
            raise PreconditionError(f"Comparison needs {name} nodewise")

    r1 = solve_dirichlet(sys, xi1, psi, f1, g1, cfg)
    r2 = solve_dirichlet(sys, xi2, psi, f2, g2, cfg)
    violation = float(np.max(r1.u.values - r2.u.values))
    return {
        "max_violation": violation,
        "holds": violation <= COMPARISON_TOL,
        "converged": r1.converged and r2.converged,
        "results": (r1, r2),
    }


def _check_ascending(sequence, name):
    for k, (a, b) in enumerate(zip(sequence[:-1], sequence[1:])):
        if np.any(a > b):
            raise PreconditionError(f"{name} sequence is not ascending at position {k}")


def _limits_report(results, limit, direction, limit_tol):
    """direction=+1: solutions should increase along the sequence, -1: decrease."""
    us = [r.u.values for r in results]
    gaps = [float(np.max(np.abs(u - limit.u.values))) for u in us]
    steps = [direction * (a - b) for a, b in zip(us[:-1], us[1:])]
    worst_step = max([float(np.max(s)) for s in steps], default=0.0)
    side = [direction * (u - limit.u.values) for u in us]
    worst_side = max(float(np.max(s)) for s in side)
    return {
        "monotone": worst_step <= MONOTONE_TOL,
        "max_step_violation": max(worst_step, 0.0),
        "limit_side_violation": max(worst_side, 0.0),
        "limit_gap": gaps[-1],
        "gaps": gaps,
        "gaps_decreasing": all(b <= a + MONOTONE_TOL for a, b in zip(gaps[:-1], gaps[1:])),
        "limit_ok": gaps[-1] <= limit_tol,
        "converged": all(r.converged for r in results) and limit.converged,
        "iterations": [r.iterations for r in results],
        "results": results,
        "limit": limit,
    }


def monotone_limits_check(sys: GreenSystem, psi: PsiSpec, f, g, xi_sequence: List, cfg: SolveConfig = None,
                          *, xi_limit, limit_tol=1e-8):
    """
    For xi_n ascending to xi_limit, U^{xi_n}(f, g) must decrease to U^{xi}(f, g).
    Reports the sup-norm gap to the limit solve for every n.
    """
    grid = sys.grid
    seq = [field_values(x, grid, "interior") for x in xi_sequence]
    if not seq:
        raise PreconditionError("xi sequence is empty")
    if xi_limit is None:
        raise PreconditionError("xi_limit is required")
    limit_xi = field_values(xi_limit, grid, "interior")
    _check_ascending(seq + [limit_xi], "xi")

    s = s_datum(sys, f, g)
    results = [solve_integral_equation(sys, x, psi, s, cfg) for x in seq]
    limit = solve_integral_equation(sys, limit_xi, psi, s, cfg)
    return _limits_report(results, limit, -1, limit_tol)


def monotone_data_limits_check(sys: GreenSystem, psi: PsiSpec, xi, data_sequence: List, cfg: SolveConfig = None,
                               *, data_limit, limit_tol=1e-8):
    """For (f_n, g_n) ascending to data_limit = (f, g), U^xi(f_n, g_n) must increase to U^xi(f, g)."""
    grid = sys.grid
    if not data_sequence:
        raise PreconditionError("data sequence is empty")
    if data_limit is None:
        raise PreconditionError("data_limit is required")
    fs = [field_values(f, grid, "boundary") for f, _ in data_sequence]
    gs = [field_values(g, grid, "interior") for _, g in data_sequence]
    f_lim = field_values(data_limit[0], grid, "boundary")
    g_lim = field_values(data_limit[1], grid, "interior")
    _check_ascending(fs + [f_lim], "f")
    _check_ascending(gs + [g_lim], "g")

    results = [solve_dirichlet(sys, xi, psi, f, g, cfg) for f, g in zip(fs, gs)]
    limit = solve_dirichlet(sys, xi, psi, f_lim, g_lim, cfg)
    return _limits_report(results, limit, +1, limit_tol)


@dataclass
class ExhaustionLevel:
    system: GreenSystem
    potential: Field
    result: SolveResult


def exhaustion_solve(chain, op: OperatorSpec, xi, psi: PsiSpec, g, cfg: SolveConfig = None, log=False):
    """
    v_n = U^xi_{D_n}(0, g) and p_n = G_{D_n} g on every level of the chain.
    xi and g are scalars or fields on the final grid.
    """
    final = chain.final
    xi_all = field_values(xi, final)
    g_all = field_values(g, final)
    levels = []
    for grid in chain:
        where = grid.locate(final)
        sys = GreenSystem(grid, op, log=log)
        p = green_apply(sys, g_all[where][:grid.n_interior])
        result = solve_integral_equation(sys, xi_all[where], psi, p, cfg)
        levels.append(ExhaustionLevel(sys, p, result))

    max_violation = 0.0
    for small, big in zip(levels[:-1], levels[1:]):
        where = small.system.grid.locate(big.system.grid)
        gap = small.potential.values - big.potential.values[where]
        max_violation = max(max_violation, float(np.max(gap)))
    scale = max(1.0, float(np.max(levels[-1].potential.values)))
    return {
        "levels": levels,
        "potential_monotone": max_violation <= 1e-12 * scale,
        "max_violation": max(max_violation, 0.0),
        "converged": all(lv.result.converged for lv in levels),
    }


def uniqueness_probe(sys: GreenSystem, xi, psi: PsiSpec, s, cfg: SolveConfig = None, seed=0):
    """
    Solves from u0 = s and from a random start u0 = r s with r ~ U[0, 1)
    nodewise; reports the sup-norm distance between the two solutions.
    first_step_gap is the distance after one undamped step, so a zero value
    means the two runs shared their trajectory.
    """
    cfg = cfg or SolveConfig()
    grid = sys.grid
    xi_i = field_values(xi, grid, "interior")
    s_i = field_values(s, grid, "interior")
    rng = np.random.default_rng(seed)
    start = rng.uniform(0.0, 1.0, grid.n_interior) * s_i

    def step(u):
        return np.clip(s_i - sys.potential(xi_i * psi_eval(psi, u)), 0.0, s_i)

    base = {k: getattr(cfg, k) for k in ("tol", "max_iter", "relaxation", "clamp")}
    from_s = solve_integral_equation(sys, xi, psi, s, SolveConfig(initial=INITIAL_S, **base))
    from_random = solve_integral_equation(sys, xi, psi, s, SolveConfig(**base), u0=start)
    return {
        "distance": float(np.max(np.abs(from_s.u.values - from_random.u.values))),
        "start_distance": float(np.max(np.abs(s_i - start))) if start.size else 0.0,
        "first_step_gap": float(np.max(np.abs(step(s_i) - step(start)))) if start.size else 0.0,
        "converged": from_s.converged and from_random.converged,
        "results": (from_s, from_random),
    }
