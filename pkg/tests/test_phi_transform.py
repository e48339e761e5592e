"""
Theta / phi transform: numeric tables against the closed forms of the catalog.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from greenbound._prototype import DomainError
from greenbound.nonlinearity import PsiSpec, psi_eval, POWER, CUSTOM
from greenbound.phi_transform import (
    PhiTransform, phi_closed_form, has_closed_form, theta, ell, phi,
    NUMERIC, CLOSED_FORM, ALPHA_SINH,
)

CATALOG = [
    PsiSpec.power(0.5),
    PsiSpec.power(1),
    PsiSpec.power(2),
    PsiSpec.affine_power(1, 1, 2),
    PsiSpec.sinh(),
    PsiSpec.log_growth(1, 1),
]


@pytest.fixture(scope="module")
def transforms():
    return {spec.to_json(): PhiTransform(spec) for spec in CATALOG}


# ---------------------------------------------------------------------------
# ell
# ---------------------------------------------------------------------------

class TestEll:
    def test_power_half_is_two(self, transforms):
        tr = transforms[PsiSpec.power(0.5).to_json()]
        assert abs(ell(tr) - 2.0) <= 1e-10
        assert tr.finite_ell_detected

    @pytest.mark.parametrize("spec", [PsiSpec.power(1), PsiSpec.power(2), PsiSpec.sinh(), PsiSpec.log_growth(1, 1)])
    def test_infinite(self, transforms, spec):
        assert ell(transforms[spec.to_json()]) == math.inf

    def test_scales_with_c(self):
        assert abs(PhiTransform(PsiSpec.power(0.5, c=2.0)).ell - 1.0) <= 1e-10

    def test_affine_below_one(self):
        spec = PsiSpec.affine_power(1, 1, 0.5)
        expected = (1 + 1) / (1 * 0.5) * math.log(2.0)
        assert PhiTransform(spec, mode=CLOSED_FORM).ell == pytest.approx(expected, rel=1e-14)
        assert PhiTransform(spec).ell == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("gamma", [0.999, 0.9995])
    def test_power_near_one(self, gamma):
        tr = PhiTransform(PsiSpec.power(gamma))
        assert tr.finite_ell_detected
        assert tr.ell == pytest.approx(1.0 / (1.0 - gamma), rel=1e-12)
        t = np.linspace(0.0, 5.0, 21)
        np.testing.assert_allclose(tr.phi(t), phi_closed_form(POWER, {"gamma": gamma}, 1.0, t), rtol=0, atol=1e-8)

    def test_affine_near_one(self):
        spec = PsiSpec.affine_power(1, 1, 0.999)
        assert PhiTransform(spec).ell == pytest.approx(PhiTransform(spec, mode=CLOSED_FORM).ell, rel=1e-12)


# ---------------------------------------------------------------------------
# theta
# ---------------------------------------------------------------------------

class TestTheta:
    def test_vanishes_at_one(self, transforms):
        for tr in transforms.values():
            assert theta(tr, 1.0) == 0.0

    def test_power_one_is_minus_log(self, transforms):
        tr = transforms[PsiSpec.power(1).to_json()]
        for t in (0.9, 0.3, 1e-3, 1e-9):
            assert theta(tr, t) == pytest.approx(-math.log(t), rel=1e-11)

    def test_sinh_closed_form(self, transforms):
        tr = transforms[PsiSpec.sinh().to_json()]
        t = 0.2
        assert theta(tr, t) == pytest.approx(math.log(ALPHA_SINH / math.tanh(t / 2)), rel=1e-11)

    def test_outside_unit_interval(self, transforms):
        tr = transforms[PsiSpec.power(2).to_json()]
        with pytest.raises(DomainError):
            theta(tr, 0.0)
        with pytest.raises(DomainError):
            theta(tr, 1.5)


# ---------------------------------------------------------------------------
# phi
# ---------------------------------------------------------------------------

class TestPhi:
    @pytest.mark.parametrize("spec", CATALOG, ids=lambda s: s.family + str(s.params.get("gamma", "")))
    def test_matches_closed_form(self, transforms, spec):
        tr = transforms[spec.to_json()]
        t = np.linspace(0.0, min(tr.ell - 1e-3, 10.0), 1000)
        numeric = phi(tr, t)
        exact = phi_closed_form(spec.family, spec.params, spec.c, t)
        assert np.max(np.abs(numeric - exact)) <= 1e-8

    def test_exponential_for_linear_psi(self, transforms):
        tr = transforms[PsiSpec.power(1).to_json()]
        t = np.linspace(0, 10, 101)
        np.testing.assert_allclose(tr.phi(t), np.exp(-t), rtol=0, atol=1e-10)

    def test_zero_past_ell(self, transforms):
        tr = transforms[PsiSpec.power(0.5).to_json()]
        assert phi(tr, 2.0) <= 1e-15
        assert phi(tr, 3.0) == 0.0
        assert phi(tr, 0.0) == 1.0

    def test_negative_argument(self, transforms):
        with pytest.raises(DomainError):
            phi(transforms[PsiSpec.power(2).to_json()], -0.1)

    def test_scalar_in_scalar_out(self, transforms):
        assert isinstance(phi(transforms[PsiSpec.power(2).to_json()], 1.0), float)

    @given(st.floats(min_value=0, max_value=20, allow_nan=False, allow_infinity=False),
           st.floats(min_value=0, max_value=20, allow_nan=False, allow_infinity=False))
    @settings(max_examples=100, deadline=None)
    def test_nonincreasing(self, a, b):
        tr = PhiTransform(PsiSpec.power(2), mode=CLOSED_FORM)
        lo, hi = min(a, b), max(a, b)
        assert phi(tr, hi) <= phi(tr, lo)

    def test_inverse_of_theta(self, transforms):
        tr = transforms[PsiSpec.log_growth(1, 1).to_json()]
        for t in (0.7, 0.1, 1e-4):
            assert phi(tr, theta(tr, t)) == pytest.approx(t, rel=1e-10)

    def test_custom_linear_psi(self):
        spec = PsiSpec.custom([0.5, 1.0, 2.0], [0.5, 1.0, 2.0], c=1.0)
        tr = PhiTransform(spec)
        t = np.linspace(0, 10, 51)
        assert tr.ell == math.inf
        np.testing.assert_allclose(tr.phi(t), np.exp(-t), rtol=0, atol=1e-8)

    @pytest.mark.parametrize("spec", CATALOG, ids=lambda s: s.family + str(s.params.get("gamma", "")))
    def test_solves_ode(self, transforms, spec):
        tr = transforms[spec.to_json()]
        t = np.linspace(0.05, min(tr.ell - 0.1, 5.0), 60)
        h = 1e-4
        slope = (tr.phi(t + h) - tr.phi(t - h)) / (2 * h)
        np.testing.assert_allclose(slope, -tr.c * psi_eval(spec, tr.phi(t)), rtol=1e-5, atol=1e-6)

    @pytest.mark.parametrize("spec", CATALOG, ids=lambda s: s.family + str(s.params.get("gamma", "")))
    def test_decreasing_and_convex(self, transforms, spec):
        tr = transforms[spec.to_json()]
        values = tr.phi(np.linspace(0.0, 10.0, 401))
        assert np.all(np.diff(values) <= 0.0)
        assert np.all(np.diff(values, 2) >= -1e-10)
        assert values[0] == 1.0


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

class TestClosedForm:
    def test_examples(self):
        assert phi_closed_form(POWER, {"gamma": 2.0}, 1.0, 1.0) == pytest.approx(0.5)
        assert phi_closed_form(POWER, {"gamma": 0.5}, 1.0, 1.0) == pytest.approx(0.25)
        assert phi_closed_form("log_growth", {"a": 1.0, "b": 1.0}, 1.0, 0.0) == pytest.approx(1.0)
        t = 0.7
        assert phi_closed_form("sinh", {}, 1.0, t) == pytest.approx(2 * math.atanh(ALPHA_SINH * math.exp(-t)))

    def test_custom_has_none(self):
        assert not has_closed_form(PsiSpec.custom([1.0], [1.0], c=1.0))
        with pytest.raises(DomainError):
            phi_closed_form(CUSTOM, {}, 1.0, 0.5)
        with pytest.raises(DomainError):
            PhiTransform(PsiSpec.custom([1.0], [1.0], c=1.0), mode=CLOSED_FORM)

    def test_modes_agree(self):
        spec = PsiSpec.affine_power(1, 1, 2)
        t = np.linspace(0, 5, 41)
        numeric = PhiTransform(spec, mode=NUMERIC).phi(t)
        closed = PhiTransform(spec, mode=CLOSED_FORM).phi(t)
        np.testing.assert_allclose(numeric, closed, rtol=0, atol=1e-10)
