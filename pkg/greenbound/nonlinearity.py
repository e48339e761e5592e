"""
Catalog of admissible nonlinearities psi.

Every psi is nondecreasing and continuous on [0, inf), vanishes at 0, is
positive for t > 0 and is extended by zero to t <= 0. Its constant c
bounds psi(r t) <= c psi(r) psi(t) for r in [0, 1].
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._prototype import DomainError, OutOfRangeError

POWER = "power"
AFFINE_POWER = "affine_power"
SINH = "sinh"
LOG_GROWTH = "log_growth"
CUSTOM = "custom"

FAMILIES = (POWER, AFFINE_POWER, SINH, LOG_GROWTH, CUSTOM)

REQUIRED_PARAMS = {
    POWER: ("gamma",),
    AFFINE_POWER: ("a", "b", "gamma"),
    SINH: (),
    LOG_GROWTH: ("a", "b"),
    CUSTOM: ("knots", "values"),
}

SUBMULTIPLICATIVE_SLACK = 1e-12


def default_c(family, params):
    """
    Constant c that makes the closed-form phi of the family exact.

    CustomSampled has no default: the caller must supply c.
    """
    if family == POWER or family == SINH:
        return 1.0
    if family == AFFINE_POWER:
        a, b, gamma = params["a"], params["b"], params["gamma"]
        return 1.0 / a if gamma > 1 else 1.0 / (a + b)
    if family == LOG_GROWTH:
        return 1.0 / (params["a"] * params["b"])
    raise DomainError(f"No default c for family {family}; pass c explicitly")


@dataclass(frozen=True)
class PsiSpec:
    family: str
    params: dict = field(default_factory=dict, hash=False)
    c: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"Unknown psi family: {self.family}")
        params = dict(self.params)
        for name in REQUIRED_PARAMS[self.family]:
            if name not in params:
                raise DomainError(f"psi family {self.family} requires parameter {name}")

        if self.family == CUSTOM:
            knots = np.asarray(params["knots"], dtype=float)
            values = np.asarray(params["values"], dtype=float)
            if knots.ndim != 1 or knots.shape != values.shape or knots.size < 1:
                raise DomainError("custom psi needs matching 1D knots and values")
            if knots[0] <= 0 or np.any(np.diff(knots) <= 0):
                raise DomainError("custom psi knots must be positive and strictly increasing")
            if values[0] <= 0 or np.any(np.diff(values) < 0):
                raise DomainError("custom psi values must be positive and nondecreasing")
            params["knots"] = tuple(float(k) for k in knots)
            params["values"] = tuple(float(v) for v in values)
            if self.c is None:
                raise DomainError("custom psi needs an explicit submultiplicativity constant c")
        else:
            for name in REQUIRED_PARAMS[self.family]:
                params[name] = float(params[name])
                if not params[name] > 0:
                    raise DomainError(f"psi parameter {name} must be positive, got {params[name]}")

        c = default_c(self.family, params) if self.c is None else float(self.c)
        if not c > 0:
            raise DomainError(f"psi constant c must be positive, got {c}")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "c", c)

    @classmethod
    def power(cls, gamma, c=None):
        return cls(POWER, {"gamma": gamma}, c)

    @classmethod
    def affine_power(cls, a, b, gamma, c=None):
        return cls(AFFINE_POWER, {"a": a, "b": b, "gamma": gamma}, c)

    @classmethod
    def sinh(cls, c=None):
        return cls(SINH, {}, c)

    @classmethod
    def log_growth(cls, a, b, c=None):
        return cls(LOG_GROWTH, {"a": a, "b": b}, c)

    @classmethod
    def custom(cls, knots, values, c):
        return cls(CUSTOM, {"knots": knots, "values": values}, c)

    @property
    def has_default_c(self):
        if self.family == CUSTOM:
            return False
        return math.isclose(self.c, default_c(self.family, self.params), rel_tol=1e-15)

    def __call__(self, t):
        return psi_eval(self, t)

    def to_dict(self):
        return {"family": self.family, "params": {k: (list(v) if isinstance(v, tuple) else v)
                                                  for k, v in self.params.items()}, "c": self.c}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        if "family" not in data:
            raise DomainError("psi JSON object needs a family")
        return cls(data["family"], dict(data.get("params", {})), data.get("c", None))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _positive_part(t):
    return np.where(t > 0, t, 0.0)


def psi_eval(spec: PsiSpec, t):
    """psi(t) for a scalar or array argument; zero for t <= 0."""
    t_arr = np.asarray(t, dtype=float)
    tp = _positive_part(t_arr)
    p = spec.params

    if spec.family == POWER:
        out = np.power(tp, p["gamma"])
    elif spec.family == AFFINE_POWER:
        out = p["a"] * tp + p["b"] * np.power(tp, p["gamma"])
    elif spec.family == SINH:
        out = np.sinh(tp)
    elif spec.family == LOG_GROWTH:
        bt = p["b"] * tp
        out = p["a"] * (1.0 + bt) * np.log1p(bt)
    else:
        knots = np.asarray(p["knots"])
        if np.any(t_arr > knots[-1]):
            raise OutOfRangeError(
                f"custom psi evaluated at {float(np.max(t_arr))}, beyond last knot {knots[-1]}"
            )
        out = np.interp(tp, np.concatenate(([0.0], knots)), np.concatenate(([0.0], p["values"])))

    out = np.where(t_arr > 0, out, 0.0)
    if np.ndim(t) == 0:
        return float(out)
    return out


def psi_derivative(spec: PsiSpec, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("psi_derivative needs t > 0")
    p = spec.params

    if spec.family == POWER:
        out = p["gamma"] * np.power(t_arr, p["gamma"] - 1.0)
    elif spec.family == AFFINE_POWER:
        out = p["a"] + p["b"] * p["gamma"] * np.power(t_arr, p["gamma"] - 1.0)
    elif spec.family == SINH:
        out = np.cosh(t_arr)
    elif spec.family == LOG_GROWTH:
        out = p["a"] * p["b"] * (np.log1p(p["b"] * t_arr) + 1.0)
    else:
        h = np.maximum(1e-6, 1e-6 * t_arr)
        out = (psi_eval(spec, t_arr + h) - psi_eval(spec, t_arr - h)) / (2.0 * h)

    if np.ndim(t) == 0:
        return float(out)
    return out


def _sample_range(spec, t_max):
    """Largest (r, t) ranges psi can be evaluated on; custom psi stops at its last knot."""
    if spec.family != CUSTOM:
        return 1.0, t_max
    last = spec.params["knots"][-1]
    return min(1.0, last), min(t_max, last)


def _ratio_grid(spec, r_samples, t_max):
    if r_samples < 2:
        raise DomainError("r_samples must be at least 2")
    if not t_max > 0:
        raise DomainError("t_max must be positive")
    r_top, t_top = _sample_range(spec, t_max)
    r = np.arange(1, r_samples + 1) / r_samples * r_top
    t = np.geomspace(t_top * 1e-6, t_top, r_samples)
    rr, tt = np.meshgrid(r, t, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = psi_eval(spec, rr * tt) / (psi_eval(spec, rr) * psi_eval(spec, tt))
    ratio = np.where(np.isfinite(ratio), ratio, -np.inf)
    return r, t, ratio


def verify_submultiplicative(spec: PsiSpec, r_samples=200, t_max=10.0):
    """
    Sampled check of psi(r t) <= c psi(r) psi(t) with r in (0, 1], t in (0, t_max].
    For custom psi both ranges are cut at the last knot; "clipped" flags it.
    """
    r, t, ratio = _ratio_grid(spec, r_samples, t_max)
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    max_ratio = float(ratio[i, j])
    return {
        "max_ratio": max_ratio,
        "witness": (float(r[i]), float(t[j])),
        "holds": max_ratio <= spec.c * (1.0 + SUBMULTIPLICATIVE_SLACK),
        "c": spec.c,
        "r_max": float(r[-1]),
        "t_max": float(t[-1]),
        "clipped": bool(r[-1] < 1.0 or t[-1] < t_max),
    }


def minimal_c_estimate(spec: PsiSpec, r_samples=200, t_max=10.0):
    """Sampled sup of psi(r t) / (psi(r) psi(t)); a lower bound on any valid c."""
    _, _, ratio = _ratio_grid(spec, r_samples, t_max)
    return float(np.max(ratio))
