"""
Theta(t) = int_t^1 ds / (c psi(s)), its limit ell = Theta(0+), and the
inverse phi of Theta extended by zero on [ell, inf).

Numeric mode tabulates Theta on the dyadic knots 2^-k (plus the knots of a
sampled psi) and inverts by bracketed Newton steps; closed-form mode uses
the analytic expressions of the catalog families.
"""
import math
import warnings

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad, IntegrationWarning

from ._prototype import DomainError
from .nonlinearity import PsiSpec, psi_eval, POWER, AFFINE_POWER, SINH, LOG_GROWTH, CUSTOM

NUMERIC = "numeric"
CLOSED_FORM = "closed_form"

THETA_TOL = 1e-12
PANEL_TOL = 1e-13
DETECTION_PANELS = 60
MAX_PANELS = 1020
CONTRACTION_WINDOW = 10
CONTRACTION_LIMIT = 1.0 - 1e-3
THETA_CEILING = 1e300
ALPHA_SINH = math.tanh(0.5)

_GL_NODES, _GL_WEIGHTS = leggauss(16)


# ---------------------------------------------------------------------------
# Closed forms (c = 1); general c follows from Theta_c = Theta_1 / c
# ---------------------------------------------------------------------------

def _closed_theta_unit(family, params, t):
    if family == POWER:
        g = params["gamma"]
        if g == 1.0:
            return -np.log(t)
        return (1.0 - np.power(t, 1.0 - g)) / (1.0 - g)
    if family == AFFINE_POWER:
        a, b, g = params["a"], params["b"], params["gamma"]
        if g == 1.0:
            return -np.log(t) / (a + b)
        return np.log((a + b) / (a * np.power(t, 1.0 - g) + b)) / (a * (1.0 - g))
    if family == SINH:
        return np.log(ALPHA_SINH / np.tanh(0.5 * t))
    if family == LOG_GROWTH:
        a, b = params["a"], params["b"]
        return (np.log(np.log1p(b)) - np.log(np.log1p(b * t))) / (a * b)
    raise DomainError(f"No closed form for psi family {family}")


def _closed_ell_unit(family, params):
    if family == POWER:
        g = params["gamma"]
        return 1.0 / (1.0 - g) if g < 1 else math.inf
    if family == AFFINE_POWER:
        a, b, g = params["a"], params["b"], params["gamma"]
        return math.log((a + b) / b) / (a * (1.0 - g)) if g < 1 else math.inf
    if family in (SINH, LOG_GROWTH):
        return math.inf
    raise DomainError(f"No closed form for psi family {family}")


def _closed_phi_unit(family, params, x):
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if family == POWER:
            g = params["gamma"]
            if g < 1:
                return np.power(np.maximum(1.0 - (1.0 - g) * x, 0.0), 1.0 / (1.0 - g))
            if g == 1.0:
                return np.exp(-x)
            return np.power(1.0 + (g - 1.0) * x, 1.0 / (1.0 - g))
        if family == AFFINE_POWER:
            a, b, g = params["a"], params["b"], params["gamma"]
            if g == 1.0:
                return np.exp(-(a + b) * x)
            base = (a + b) / a * np.exp(a * (g - 1.0) * x) - b / a
            if g < 1:
                base = np.maximum(base, 0.0)
            return np.power(base, 1.0 / (1.0 - g))
        if family == SINH:
            return 2.0 * np.arctanh(ALPHA_SINH * np.exp(-x))
        if family == LOG_GROWTH:
            a, b = params["a"], params["b"]
            return np.expm1(np.log1p(b) * np.exp(-a * b * x)) / b
    raise DomainError(f"No closed form for psi family {family}")


def phi_closed_form(family, params, c, t):
    """Analytic phi of a catalog family with constant c, evaluated at t >= 0."""
    if family == CUSTOM or family not in (POWER, AFFINE_POWER, SINH, LOG_GROWTH):
        raise DomainError(f"No closed form for psi family {family}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("phi is defined for t >= 0")
    out = _closed_phi_unit(family, {k: float(v) for k, v in params.items()}, c * t_arr)
    out = np.clip(out, 0.0, 1.0)
    if np.ndim(t) == 0:
        return float(out)
    return out


def has_closed_form(spec: PsiSpec):
    return spec.family in (POWER, AFFINE_POWER, SINH, LOG_GROWTH)


# ---------------------------------------------------------------------------
# PhiTransform
# ---------------------------------------------------------------------------

class PhiTransform:

    def __init__(self, spec: PsiSpec, mode=NUMERIC):
        if mode not in (NUMERIC, CLOSED_FORM):
            raise DomainError(f"Unknown phi transform mode: {mode}")
        if mode == CLOSED_FORM and not has_closed_form(spec):
            raise DomainError(f"psi family {spec.family} has no closed form")
        self.spec = spec
        self.mode = mode
        self.c = spec.c
        self.t_knots = None
        self.theta_knots = None
        self.finite_ell_detected = None

        if mode == CLOSED_FORM:
            self.ell = _closed_ell_unit(spec.family, spec.params) / spec.c
        else:
            self._build_table()

    def __repr__(self):
        return f"PhiTransform(family={self.spec.family!r}, c={self.c!r}, mode={self.mode!r}, ell={self.ell!r})"

    def _integrand(self, s):
        with np.errstate(divide="ignore", over="ignore"):
            value = np.float64(1.0) / (self.c * np.asarray(psi_eval(self.spec, s)))
        if np.ndim(value) == 0:
            return float(value)
        return value

    def _panel_integral(self, lo, hi):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            value, _ = quad(self._integrand, lo, hi, epsabs=PANEL_TOL, epsrel=PANEL_TOL, limit=200)
        return value

    def _build_table(self):
        """
        Tabulate Theta from t = 1 downwards. The first DETECTION_PANELS dyadic
        panels decide whether ell is finite; an infinite ell extends the table
        with Gauss-Legendre panels until psi underflows or Theta overflows.
        """
        dyadic = [2.0 ** -k for k in range(DETECTION_PANELS + 1)]
        extra = []
        if self.spec.family == CUSTOM:
            extra = [k for k in self.spec.params["knots"] if dyadic[-1] < k < 1.0]
        knots_desc = sorted(set(dyadic) | set(extra), reverse=True)

        theta = [0.0]
        for hi, lo in zip(knots_desc[:-1], knots_desc[1:]):
            theta.append(theta[-1] + self._panel_integral(lo, hi))
            if not (math.isfinite(theta[-1]) and theta[-1] < THETA_CEILING):
                # psi underflowed; keep the table above this knot
                theta.pop()
                knots_desc = knots_desc[:len(theta)]
                self.finite_ell_detected = False
                self.ell = math.inf
                self.t_knots = np.array(knots_desc[::-1])
                self.theta_knots = np.array(theta[::-1])
                return
        theta_at = dict(zip(knots_desc, theta))
        dyadic_theta = np.array([theta_at[t] for t in dyadic])
        increments = np.diff(dyadic_theta)

        known = self._known_ell()
        if known is not None:
            finite = math.isfinite(known)
        else:
            tail = increments[-CONTRACTION_WINDOW:]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = tail[1:] / tail[:-1]
            finite = bool(np.all(np.isfinite(dyadic_theta)) and np.all(ratios < CONTRACTION_LIMIT))
        self.finite_ell_detected = finite

        t_knots = list(knots_desc)
        if finite and known is not None:
            self.ell = known
        elif finite:
            r = ratios[-1]
            self.ell = float(dyadic_theta[-1] + increments[-1] * r / (1.0 - r))
        else:
            self.ell = math.inf
            k = np.arange(DETECTION_PANELS, MAX_PANELS)
            hi = np.power(2.0, -k.astype(float))
            lo = 0.5 * hi
            nodes = lo[:, None] + (hi - lo)[:, None] * (_GL_NODES[None, :] + 1.0) / 2.0
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                panel = (self._integrand(nodes) * _GL_WEIGHTS[None, :]).sum(axis=1) * (hi - lo) / 2.0
            cumulative = theta[-1] + np.cumsum(panel)
            usable = np.isfinite(cumulative) & (cumulative < THETA_CEILING)
            stop = int(np.argmin(usable)) if not usable.all() else usable.size
            t_knots.extend(lo[:stop].tolist())
            theta.extend(cumulative[:stop].tolist())

        # ascending in t, hence descending in Theta
        self.t_knots = np.array(t_knots[::-1])
        self.theta_knots = np.array(theta[::-1])

    def _known_ell(self):
        """Analytic ell for the power families; None where it has to be detected."""
        if self.spec.family in (POWER, AFFINE_POWER):
            return _closed_ell_unit(self.spec.family, self.spec.params) / self.c
        return None

    # -----------------------------------------------------------------------

    def _remainder(self, s, upper):
        """int_s^upper ds / (c psi) by 16-point Gauss-Legendre, vectorized."""
        half = (upper - s) / 2.0
        nodes = s[:, None] + half[:, None] * (_GL_NODES[None, :] + 1.0)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            vals = self._integrand(nodes)
        return (vals * _GL_WEIGHTS[None, :]).sum(axis=1) * half

    def theta(self, t):
        if not (0.0 < t <= 1.0):
            raise DomainError(f"Theta is defined on (0, 1], got {t}")
        if self.mode == CLOSED_FORM:
            return float(_closed_theta_unit(self.spec.family, self.spec.params, t)) / self.c
        if t == 1.0:
            return 0.0
        j = int(np.searchsorted(self.t_knots, t, side="left"))
        if j >= self.t_knots.size:
            j = self.t_knots.size - 1
        upper = self.t_knots[j]
        if upper == t:
            return float(self.theta_knots[j])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            rest, _ = quad(self._integrand, t, upper, epsabs=THETA_TOL, epsrel=THETA_TOL, limit=200)
        return float(self.theta_knots[j] + rest)

    def phi(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
            raise DomainError("phi is defined for t >= 0")
        out = np.zeros_like(t_arr)
        out[t_arr == 0] = 1.0
        inner = (t_arr > 0) & (t_arr < self.ell)
        if inner.any():
            if self.mode == CLOSED_FORM:
                out[inner] = phi_closed_form(self.spec.family, self.spec.params, self.c, t_arr[inner])
            else:
                out[inner] = self._invert(t_arr[inner])
        if np.ndim(t) == 0:
            return float(out[0])
        return out

    def _invert(self, target):
        t_knots, theta_knots = self.t_knots, self.theta_knots
        # first knot (ascending t) whose Theta is <= target
        j = np.searchsorted(-theta_knots, -target, side="left")
        out = np.zeros_like(target)

        below_floor = j == 0
        if below_floor.any():
            if math.isfinite(self.ell):
                # below 2^-60 the answer is within tolerance of a linear fill to zero at ell
                frac = (self.ell - target[below_floor]) / (self.ell - theta_knots[0])
                out[below_floor] = t_knots[0] * np.clip(frac, 0.0, 1.0)
            # an infinite ell past the table floor means phi underflows

        todo = ~below_floor
        if not todo.any():
            return out
        jj = j[todo]
        tgt = target[todo]
        upper = t_knots[jj]
        theta_upper = theta_knots[jj]
        lo = t_knots[jj - 1].copy()
        hi = upper.copy()
        theta_lo = theta_knots[jj - 1]

        w = np.clip((tgt - theta_upper) / (theta_lo - theta_upper), 0.0, 1.0)
        s = hi - w * (hi - lo)
        active = np.ones_like(s, dtype=bool)

        for _ in range(100):
            if not active.any():
                break
            sa = s[active]
            f = theta_upper[active] + self._remainder(sa, upper[active]) - tgt[active]
            lo_a, hi_a = lo[active], hi[active]
            lo_a = np.where(f > 0, sa, lo_a)
            hi_a = np.where(f <= 0, sa, hi_a)
            with np.errstate(over="ignore", invalid="ignore"):
                step = sa + f * self.c * psi_eval(self.spec, sa)
            bad = ~np.isfinite(step) | (step <= lo_a) | (step >= hi_a)
            step = np.where(bad, 0.5 * (lo_a + hi_a), step)
            done = np.abs(step - sa) <= 4e-16 * np.abs(sa) + 1e-300
            done |= (hi_a - lo_a) <= 4e-16 * hi_a

            s[active] = step
            lo[active] = lo_a
            hi[active] = hi_a
            idx = np.flatnonzero(active)
            active[idx[done]] = False

        out[todo] = s
        return out


def theta(tr: PhiTransform, t):
    return tr.theta(t)


def ell(tr: PhiTransform):
    return tr.ell


def phi(tr: PhiTransform, t):
    return tr.phi(t)
