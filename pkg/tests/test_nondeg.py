from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinreg import coeffs, nondeg
from kinreg.errors import DomainError, InputValidationError


def brute_measure(model, xi, delta, n=10 ** 6):
    lo, hi = model.interval
    lam = lo + (hi - lo) * (np.arange(n) + 0.5) / n
    vals = coeffs.eval_symbol(model, xi, lam)
    return np.count_nonzero(vals <= delta) * (hi - lo) / n


def test_burgers_measure():
    m = coeffs.burgers()
    got = nondeg.measure_degenerate_set(m, [0, 1], 0.25)
    assert got == pytest.approx(1.0, abs=2 * m.length / 4096)


def test_heat_measure_zero():
    assert nondeg.measure_degenerate_set(coeffs.heat(1.0), [0, 1], 0.5) == 0.0


def test_powerlaw_measure_against_brute_force():
    m = coeffs.powerlaw(1, 1)
    xi = np.array([1, -1, 0]) / np.sqrt(2)
    got = nondeg.measure_degenerate_set(m, xi, 0.01)
    analytic = 2 * np.sqrt(0.02)  # (1 - lam)^2 / 2 <= 0.01, clipped to [-1, 1]
    assert brute_measure(m, xi, 0.01) == pytest.approx(analytic / 2, abs=1e-5)
    assert got == pytest.approx(brute_measure(m, xi, 0.01), abs=2 * m.length / 4096)


def test_measure_validation():
    m = coeffs.burgers()
    with pytest.raises(InputValidationError):
        nondeg.measure_degenerate_set(m, [0, 1], 0.0)
    with pytest.raises(InputValidationError):
        nondeg.measure_degenerate_set(m, [0, 1], 0.1, lambda_grid=100)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(1e-4, 0.5), st.floats(0, 2 * np.pi))
def test_measure_monotone_and_bounded(d1, d2, theta):
    m = coeffs.powerlaw(1, 2)
    xi = np.array([np.cos(theta), np.sin(theta) * 0.6, np.sin(theta) * 0.8])
    lo, hi = sorted((d1, d2))
    a = nondeg.measure_degenerate_set(m, xi, lo, lambda_grid=1024)
    b = nondeg.measure_degenerate_set(m, xi, hi, lambda_grid=1024)
    assert 0 <= a <= b <= m.length


def test_refinement_consistency():
    m = coeffs.powerlaw(1, 1)
    xi = np.array([0.3, 0.9, np.sqrt(1 - 0.9)])
    xi = xi / np.linalg.norm(xi)
    for delta in (1e-3, 1e-2, 1e-1):
        a = nondeg.measure_degenerate_set(m, xi, delta, lambda_grid=2048)
        b = nondeg.measure_degenerate_set(m, xi, delta, lambda_grid=4096)
        assert abs(a - b) <= 2 * m.length / 2048


def test_sphere_points_unit():
    for dim in (2, 3, 4):
        pts = nondeg.sphere_points(dim, 100, seed=1)
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-12)
        assert len(pts) == 100 + 2 * dim


def test_estimate_alpha_burgers():
    fit = nondeg.estimate_alpha(coeffs.burgers())
    assert fit.alpha == pytest.approx(0.5, abs=0.08)
    assert fit.reliable
    assert np.all(np.diff(fit.sup_measures) >= 0)


def test_estimate_alpha_heat_degenerate_flag():
    fit = nondeg.estimate_alpha(coeffs.heat(1.0), delta_range=(1e-4, 0.5))
    assert fit.degenerate_flag and fit.alpha is None
    assert "flag=true" in fit.summary()


def test_case_split_bounds():
    # directions with xi2^2 >= 1/4 are governed by the diffusion, the rest by the flux
    m = coeffs.powerlaw(1, 2)
    pts = nondeg.sphere_points(3, 512)
    deltas = np.geomspace(1e-4, 1e-1, 8)
    para = pts[np.abs(pts[:, 2]) >= 0.5]
    hyper = pts[np.abs(pts[:, 2]) < 0.5]
    sup_para = nondeg.sup_measures(m, para, deltas, 4096)
    sup_hyper = nondeg.sup_measures(m, hyper, deltas, 4096)
    for sup, expo in ((sup_para, 0.5), (sup_hyper, 0.5)):
        ratio = sup / deltas ** expo
        assert ratio.max() <= 20 * ratio.min() + 1e-12
    assert np.all(sup_para <= 2 * (4 * deltas) ** 0.5 + 2 / 4096 * 2)


def test_estimate_alpha_validation():
    m = coeffs.burgers()
    with pytest.raises(InputValidationError):
        nondeg.estimate_alpha(m, delta_range=(0.1, 0.01))
    with pytest.raises(InputValidationError):
        nondeg.estimate_alpha(m, sphere_samples=10)


def rational_oracle(alpha, d):
    # independent evaluation with D = d + 4 written out
    num_q = alpha + 2 * d + 8
    den_q = alpha + d + 4
    s = alpha / (6 * alpha + 12 * d + 48)
    return num_q / den_q, s


@pytest.mark.parametrize("alpha,q,two_s", [
    (Fraction(1, 2), Fraction(25, 13), Fraction(1, 75)),
    (Fraction(1), Fraction(13, 7), Fraction(1, 39)),
    (Fraction(1, 4), Fraction(49, 25), Fraction(1, 147)),
])
def test_exponents_exact(alpha, q, two_s):
    pair = nondeg.exponents(alpha, 2, deterministic=True)
    assert pair.q_star == q and pair.two_s_star == two_s
    oq, os_ = rational_oracle(alpha, 2)
    assert (pair.q_star, pair.s_star) == (oq, os_)
    assert pair.s_limit == two_s


def test_exponents_float_input_is_exact():
    assert nondeg.exponents(0.5, 2, True).q_star == Fraction(25, 13)
    assert nondeg.exponents(0.25, 2, True).two_s_star == Fraction(1, 147)


def test_exponents_limit():
    pair = nondeg.exponents(1e-12, 2)
    assert float(pair.q_star) == pytest.approx(2.0, abs=1e-12)
    assert float(pair.s_star) == pytest.approx(0.0, abs=1e-12)


def test_exponents_errors():
    with pytest.raises(DomainError):
        nondeg.exponents(0, 2)
    with pytest.raises(DomainError):
        nondeg.exponents(-1, 2)


@settings(max_examples=80, deadline=None)
@given(st.floats(1e-6, 50), st.floats(1e-6, 50), st.integers(1, 5))
def test_exponent_monotone_and_bounded(a, b, d):
    lo, hi = sorted((a, b))
    p, r = nondeg.exponents(lo, d), nondeg.exponents(hi, d)
    assert 1 < float(p.q_star) < 2 and 0 < float(p.s_star) < 1
    if hi > lo * (1 + 1e-9):
        # q* = 1 + (d+4)/(alpha+d+4) decreases with alpha; s* increases
        assert float(r.q_star) < float(p.q_star)
        assert float(r.s_star) > float(p.s_star)
    q_id = (lo + 2 * (d + 4)) / (lo + d + 4)
    assert float(p.q_star) == pytest.approx(q_id, abs=1e-14)


def test_format_line():
    line = nondeg.exponents(0.5, 2, True).format()
    assert line == "q_star=25/13 (≈1.923077) s_star=1/150 two_s_star=1/75"


def test_theory_alpha():
    assert nondeg.theory_alpha_powerlaw(1, 1) == Fraction(1, 2)
    assert nondeg.theory_alpha_powerlaw(1, 2) == Fraction(1, 2)
    assert nondeg.theory_alpha_powerlaw(2, 1) == Fraction(1, 4)
    assert nondeg.theory_alpha_powerlaw(1, 3, "mixed") == Fraction(1, 3)
