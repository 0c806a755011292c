import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from finitedecoy import photon_source as ps
from finitedecoy.photon_source import Fixed, Gaussian, Moments, SourceMoments
from oracles import quad_moment


# --- moments ---------------------------------------------------------------


def test_gaussian_t0_is_fixed():
    m = ps.moments(Gaussian(0.5, 0.0))
    e = math.exp(-0.5)
    assert (m.m0, m.m1, m.m2) == pytest.approx((e, 0.5 * e, 0.25 * e), rel=1e-15)


def test_gaussian_m0_closed_form():
    assert ps.moments(Gaussian(0.5, 0.1)).m0 == pytest.approx(math.exp(-0.49875), rel=1e-15)


def test_fixed_poisson_ratio():
    m = ps.moments(Fixed(0.1))
    assert m.m1 / m.m0 == pytest.approx(0.1, rel=1e-15)


@pytest.mark.parametrize("mean, t", [(0.05, 0.2), (0.5, 0.1), (0.9, 0.3)])
def test_gaussian_moments_quadrature(mean, t):
    m = ps.moments(Gaussian(mean, t))
    for k, v in enumerate((m.m0, m.m1, m.m2)):
        assert v == pytest.approx(quad_moment(mean, t, k), rel=1e-10)


def test_moment_negative():
    with pytest.raises(ps.MomentNegativeError):
        ps.moments(Gaussian(0.5, 2.0))


def test_moments_passthrough():
    sm = SourceMoments(0.9, 0.09, 0.0045, "custom")
    assert ps.moments(Moments(sm)) is sm


@given(st.floats(1e-6, 5.0))
def test_fixed_expansion_sums_to_one(mu):
    m = ps.moments(Fixed(mu))
    assert m.m0 + m.m1 + ps.omega2(Fixed(mu)) * m.m2 == pytest.approx(1.0, rel=1e-14)


@given(st.floats(0.01, 1.0), st.floats(0.0, 0.3))
def test_gaussian_continuity_in_t(mean, t):
    a = ps.moments(Gaussian(mean, t))
    b = ps.moments(Gaussian(mean, t * (1 + 1e-9)))
    assert abs(a.m0 - b.m0) <= 1e-8 * a.m0


# --- omega2 ------------------------------------------------------------------


def test_omega2_fixed():
    assert ps.omega2(Fixed(0.1)) == pytest.approx(0.5170918075647624, rel=1e-13)


def test_omega2_small_intensity_limit():
    assert ps.omega2(Fixed(1e-9)) == pytest.approx(0.5, rel=1e-8)


def test_omega2_moments_matches_law():
    assert ps.omega2(ps.moments(Fixed(0.3))) == pytest.approx(ps.omega2(Fixed(0.3)), rel=1e-12)


def test_omega2_gaussian_quadrature():
    mean, t = 0.5, 0.1
    q = [quad_moment(mean, t, k) for k in range(3)]
    want = (1 - q[0] - q[1]) / q[2]
    assert ps.omega2(Gaussian(mean, t)) == pytest.approx(want, rel=1e-9)


def test_omega2_degenerate():
    with pytest.raises(ps.DegenerateSourceError):
        ps.omega2(SourceMoments(1.0, 0.0, 0.0))


@given(st.floats(0.01, 1.0), st.floats(0.0, 0.3))
def test_omega2_positive(mean, t):
    assert ps.omega2(Gaussian(mean, t)) > 0.0


# --- omega3 --------------------------------------------------------------------


def test_omega3_fixed_value():
    # (e^0.5 - 1.625)/0.25 - (e^0.1 - 1.105)/0.01 = 0.0948851 - 0.0170918
    want = (math.exp(0.5) - 1.625) / 0.25 - (math.exp(0.1) - 1.105) / 0.01
    assert ps.omega3_fixed(0.1, 0.5) == pytest.approx(want, rel=1e-9)
    assert ps.omega3_fixed(0.1, 0.5) == pytest.approx(0.0777933, abs=1e-7)


def test_omega3_continuity():
    assert ps.omega3_fixed(0.3, 0.3 + 1e-9) < 1e-8


@pytest.mark.parametrize("mu1", np.linspace(0.05, 0.95, 10))
def test_omega3_positive_grid(mu1):
    for mu2 in np.linspace(mu1 + 0.01, 1.0, 10):
        assert ps.omega3_fixed(mu1, mu2) > 0.0


def test_omega3_order_violation():
    with pytest.raises(ValueError):
        ps.omega3_fixed(0.5, 0.1)


def test_omega3_moments_fixed_reduces():
    mu1, mu2 = 0.1, 0.5
    w = ps.omega3_moments(Fixed(mu1), Fixed(mu2), 60)
    want = math.exp(-mu2) * mu2**2 * ps.omega3_fixed(mu1, mu2)
    assert w.value == pytest.approx(want, abs=1e-10)


def test_omega3_expansion_sums_to_one():
    mu1, mu2 = 0.1, 0.5
    w = ps.omega3_moments(Fixed(mu1), Fixed(mu2), 60).value
    total = math.exp(-mu2) * (1 + mu2 + mu2**2 * ps.omega2(Fixed(mu1))) + w
    assert total == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("laws", [(Fixed(0.1), Fixed(0.5)), (Gaussian(0.1, 0.1), Gaussian(0.5, 0.1))])
def test_omega3_remainder_contract(laws):
    short = ps.omega3_moments(*laws, n_max=3)
    full = ps.omega3_moments(*laws, n_max=60)
    assert abs(full.value - short.value) <= short.remainder


def test_omega3_gaussian_finite_positive():
    w = ps.omega3_moments(Gaussian(0.1, 0.1), Gaussian(0.5, 0.1))
    assert math.isfinite(w.value) and w.value > 0.0
    assert w.remainder < 1e-40


# --- raw moments and dominance ------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 2, 3, 5, 8])
def test_raw_moment_quadrature(n):
    assert ps.raw_moment(Gaussian(0.5, 0.3), n) == pytest.approx(quad_moment(0.5, 0.3, n), rel=1e-10)


def test_dominance_fixed_pass():
    d = ps.decoy_dominance_check(Fixed(0.1), Fixed(0.5), 50)
    assert d.passed and d.first_failure is None


def test_dominance_identical_pass():
    assert ps.decoy_dominance_check(Gaussian(0.3, 0.2), Gaussian(0.3, 0.2), 50).passed


def test_dominance_gaussian_recorded():
    d = ps.decoy_dominance_check(Gaussian(0.1, 0.3), Gaussian(0.5, 0.3), 50)
    assert d.n_max == 50 and isinstance(d.passed, bool)


def test_dominance_reversed_fails():
    d = ps.decoy_dominance_check(Fixed(0.5), Fixed(0.1), 10)
    assert not d.passed and d.first_failure == 3


def test_omega3_moments_assumption_violated():
    with pytest.raises(ps.AssumptionViolatedError):
        ps.omega3_moments(Fixed(0.5), Fixed(0.1))


@pytest.mark.parametrize("bad", [lambda: Fixed(0.0), lambda: Gaussian(-1.0, 0.1), lambda: Gaussian(0.5, -0.1)])
def test_law_invariants(bad):
    with pytest.raises(ValueError):
        bad()
