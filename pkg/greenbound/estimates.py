"""
Lower bounds for solutions of -Lu + xi psi(u) = g.

  sandwich:       s phi(G_D(xi psi(s)) / s) <= U(f, g) <= s,  s = S_D(f, g)
  supersolution:  u >= p phi(G_D(xi psi(p)) / p),            p = G_D g
                  for every nonnegative u with -Lu + xi Psi(u) >= g, Psi <= psi
"""
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ._prototype import ConvergenceError, PreconditionError, DomainError
from .nonlinearity import PsiSpec, psi_eval, default_c, CUSTOM
from .phi_transform import PhiTransform, phi_closed_form
from .green import Field, GreenSystem, POTENTIAL, field_values, green_apply, apply_operator, s_datum
from .semilinear import SolveConfig, solve_integral_equation

ESTIMATE_TOL = 1e-6
SUPERSOLUTION_TOL = 1e-8
RATIO_GUARD = 1e-300

SANDWICH = "sandwich"
SUPERSOLUTION = "supersolution"


@dataclass
class EstimateReport:
    """Nodewise comparison of u against [lower, reference] on the interior nodes."""
    kind: str
    grid: object
    u: np.ndarray
    reference: np.ndarray
    lower: np.ndarray
    tol: float = ESTIMATE_TOL
    check_upper: bool = True
    notes: List[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def nodes(self):
        return self.grid.interior

    @property
    def coords(self):
        return self.grid.coords[:self.grid.n_interior]

    @property
    def upper(self):
        return self.reference

    @property
    def slack_lower(self):
        return self.u - self.lower

    @property
    def slack_upper(self):
        return self.reference - self.u

    @property
    def violated(self):
        bad = self.slack_lower < -self.tol
        if self.check_upper:
            bad = bad | (self.slack_upper < -self.tol)
        return bad

    @property
    def violated_node_count(self):
        return int(np.count_nonzero(self.violated))

    @property
    def passed(self):
        return self.violated_node_count == 0

    def summary(self):
        empty = self.u.size == 0
        return {
            "kind": self.kind,
            "min_slack_lower": 0.0 if empty else float(np.min(self.slack_lower)),
            "min_slack_upper": 0.0 if empty else float(np.min(self.slack_upper)),
            "violated_node_count": self.violated_node_count,
            "tolerance": self.tol,
            "nodes": int(self.u.size),
            "notes": list(self.notes),
            **self.extra,
        }

    def records(self):
        for k in range(self.u.size):
            yield {
                "node_index": int(k),
                "coords": self.coords[k].tolist(),
                "u": float(self.u[k]),
                "reference": float(self.reference[k]),
                "lower": float(self.lower[k]),
                "upper": float(self.reference[k]),
                "slack_lower": float(self.slack_lower[k]),
                "slack_upper": float(self.slack_upper[k]),
            }


def _check_transform(psi: PsiSpec, tr: PhiTransform):
    if tr.spec != psi:
        raise PreconditionError(f"PhiTransform was built for {tr.spec.family} (c={tr.c}), not {psi.family} (c={psi.c})")


def _scaled_phi(tr, base, q):
    """base * phi(q / base), zero wherever base underflows."""
    out = np.zeros_like(base)
    ok = base >= RATIO_GUARD
    if ok.any():
        ratio = np.maximum(q[ok] / base[ok], 0.0)
        out[ok] = base[ok] * tr.phi(ratio)
    return out


def lower_bound_field(sys: GreenSystem, xi, psi: PsiSpec, tr: PhiTransform, s):
    """s phi(G_D(xi psi(s)) / s) nodewise; boundary nodes carry s itself."""
    _check_transform(psi, tr)
    grid = sys.grid
    s_all = field_values(s, grid)
    xi_i = field_values(xi, grid, "interior")
    if np.any(s_all < 0):
        raise PreconditionError("lower_bound_field needs s >= 0")
    s_i = s_all[:grid.n_interior]
    q = sys.potential(xi_i * psi_eval(psi, s_i))
    bound = _scaled_phi(tr, s_i, q)
    return Field(grid, np.concatenate([bound, s_all[grid.n_interior:]]), POTENTIAL)


def supersolution_bound_field(sys: GreenSystem, xi, psi: PsiSpec, tr: PhiTransform, g):
    """p phi(G_D(xi psi(p)) / p) with p = G_D g strictly positive inside."""
    _check_transform(psi, tr)
    grid = sys.grid
    gi = field_values(g, grid, "interior")
    if np.any(gi < 0):
        raise PreconditionError("supersolution bound needs g >= 0")
    p = green_apply(sys, gi).interior
    if np.any(p <= 0):
        k = int(np.flatnonzero(p <= 0)[0])
        raise PreconditionError(f"G_D g vanishes at interior node {k} {grid.coords[k].tolist()}")
    xi_i = field_values(xi, grid, "interior")
    q = sys.potential(xi_i * psi_eval(psi, p))
    bound = _scaled_phi(tr, p, q)
    return Field(grid, np.concatenate([bound, np.zeros(grid.n_active - grid.n_interior)]), POTENTIAL)


def closed_form_bound(family, params, p, q, c=None):
    """p phi(q / p) with the analytic phi of a catalog family (default c unless given)."""
    if family == CUSTOM:
        raise DomainError("custom psi has no closed-form bound")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p <= 0):
        raise PreconditionError("closed_form_bound needs p > 0")
    c = default_c(family, params) if c is None else c
    return p * phi_closed_form(family, params, c, np.maximum(q / p, 0.0))


def _certified_solve(sys, xi, psi, s, cfg):
    result = solve_integral_equation(sys, xi, psi, s, cfg)
    if not result.converged:
        raise ConvergenceError(
            f"Solver did not converge (residual {result.residual:.3e} after {result.iterations} iterations); "
            f"no estimate is reported for an uncertified solution"
        )
    return result


def verify_sandwich(sys: GreenSystem, xi, psi: PsiSpec, tr: PhiTransform, f, g, cfg: SolveConfig = None,
                    tol=ESTIMATE_TOL):
    s = s_datum(sys, f, g)
    if np.any(s.interior <= 0):
        raise PreconditionError("S_D(f, g) must be positive at every interior node")
    result = _certified_solve(sys, xi, psi, s, cfg)
    lower = lower_bound_field(sys, xi, psi, tr, s)
    return EstimateReport(
        kind=SANDWICH,
        grid=sys.grid,
        u=np.array(result.u.interior),
        reference=np.array(s.interior),
        lower=np.array(lower.interior),
        tol=tol,
        extra={"iterations": result.iterations, "residual": result.residual, "c": psi.c,
               "family": psi.family, "ell": tr.ell},
    )


def verify_supersolution(sys: GreenSystem, xi, psi: PsiSpec, tr: PhiTransform, g, u_super,
                         cfg: SolveConfig = None, tol=ESTIMATE_TOL, Psi: Optional[Callable] = None):
    """
    Checks u_super >= p phi(G_D(xi psi(p)) / p). u_super must satisfy the
    discrete inequality -A_h u + xi Psi(u) >= g (Psi defaults to psi).
    """
    grid = sys.grid
    u_all = field_values(u_super, grid)
    if np.any(u_all < 0):
        raise PreconditionError("supersolution must be nonnegative")
    xi_i = field_values(xi, grid, "interior")
    gi = field_values(g, grid, "interior")
    u_i = u_all[:grid.n_interior]

    notes = ["supersolution class checked through the discrete residual -A_h u + xi Psi(u) - g"]
    if Psi is None:
        nonlinear = psi_eval(psi, u_i)
    else:
        nonlinear = np.asarray(Psi(u_i), dtype=float)
        excess = float(np.max(nonlinear - psi_eval(psi, u_i))) if u_i.size else 0.0
        if excess > SUPERSOLUTION_TOL:
            raise PreconditionError(f"Psi exceeds psi by {excess:.3g} on the range of u")
        notes.append("custom Psi <= psi checked on the values of u")

    residual = -apply_operator(sys, u_all) + xi_i * nonlinear - gi
    worst = float(np.min(residual)) if residual.size else 0.0
    if worst < -SUPERSOLUTION_TOL:
        k = int(np.argmin(residual))
        raise PreconditionError(
            f"u is not a discrete supersolution: residual {worst:.3e} at node {k} {grid.coords[k].tolist()}"
        )

    lower = supersolution_bound_field(sys, xi, psi, tr, gi)
    p = green_apply(sys, gi)
    return EstimateReport(
        kind=SUPERSOLUTION,
        grid=grid,
        u=np.array(u_i),
        reference=np.array(p.interior),
        lower=np.array(lower.interior),
        tol=tol,
        check_upper=False,
        notes=notes,
        extra={"min_supersolution_residual": worst, "c": psi.c, "family": psi.family, "ell": tr.ell},
    )


def closed_form_cross_check(sys: GreenSystem, xi, psi: PsiSpec, g, tr: PhiTransform = None):
    """sup |numeric supersolution bound - closed-form bound| for a family at its default c."""
    if psi.family == CUSTOM:
        raise DomainError("custom psi has no closed form")
    spec = PsiSpec(psi.family, psi.params) if not psi.has_default_c else psi
    tr = tr if tr is not None and tr.spec == spec else PhiTransform(spec)
    numeric = supersolution_bound_field(sys, xi, spec, tr, g).interior

    gi = field_values(g, sys.grid, "interior")
    p = green_apply(sys, gi).interior
    q = sys.potential(field_values(xi, sys.grid, "interior") * psi_eval(spec, p))
    analytic = closed_form_bound(spec.family, spec.params, p, q)
    return float(np.max(np.abs(numeric - analytic)))
