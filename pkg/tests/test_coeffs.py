import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kinreg import coeffs
from kinreg.errors import DomainError, InputValidationError


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_powerlaw_fields():
    m = coeffs.powerlaw(2, 3)
    lam = np.linspace(-1, 1, 11)
    assert m.d == 2
    np.testing.assert_allclose(m.flux(lam)[:, 0], lam ** 2)
    np.testing.assert_allclose(m.flux(lam)[:, 1], 0.0)
    np.testing.assert_allclose(m.diffusion(lam)[:, 1, 1], np.abs(lam) ** 3)
    np.testing.assert_allclose(m.diffusion_primitive(lam)[:, 1, 1], np.abs(lam) ** 3 * lam / 4)
    np.testing.assert_allclose(m.flux_primitive(lam)[:, 0], lam ** 3 / 3)
    # odd n: |lam|^(n/2) at zero is exactly zero
    assert m.sqrt_diffusion(np.array(0.0))[1, 1] == 0.0


def test_symbol_examples():
    m = coeffs.powerlaw(1, 1)
    assert coeffs.eval_symbol(m, [0, 1, 0], 0.5) == pytest.approx(0.25, abs=1e-15)
    assert coeffs.eval_symbol(m, [0, 0, 1], 0.5) == pytest.approx(0.5, abs=1e-15)
    for model in (m, coeffs.burgers(), coeffs.heat(2.0, 2)):
        xi = np.zeros(model.d + 1)
        xi[0] = 1.0
        assert coeffs.eval_symbol(model, xi, 0.3) == pytest.approx(1.0)


def test_symbol_errors():
    m = coeffs.powerlaw(1, 1)
    with pytest.raises(InputValidationError):
        coeffs.eval_symbol(m, [0, 2, 0], 0.5)
    with pytest.raises(DomainError):
        coeffs.eval_symbol(m, [0, 1, 0], 1.5)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3), st.floats(-1, 1))
def test_symbol_even_in_xi(v, lam):
    if np.linalg.norm(v) < 1e-3:
        return
    m = coeffs.powerlaw(2, 1)
    xi = unit(v)
    assert coeffs.eval_symbol(m, xi, lam) == pytest.approx(coeffs.eval_symbol(m, -xi, lam), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(0.1, 3), st.integers(1, 3))
def test_powerlaw_degenerate_direction(lam, t, l):
    m = coeffs.powerlaw(l, 2)
    xi = unit([-(lam ** l) * t, t, 0.0])
    assert coeffs.eval_symbol(m, xi, lam) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("model", [coeffs.powerlaw(2, 3), coeffs.powerlaw(1, 1), coeffs.burgers(),
                                   coeffs.heat(1.0, 2)])
def test_validation_passes(model):
    rep = coeffs.validate_model(model)
    assert rep.passed, rep.lines()
    assert rep.max_sqrt_residual <= 1e-8


def test_validation_catches_indefinite_diffusion():
    lam = np.linspace(-1, 1, 41)
    a = np.zeros((lam.size, 2, 2))
    a[:, 0, 0], a[:, 1, 1] = lam, lam ** 3
    m = coeffs.tabulated(lam, np.zeros((lam.size, 2)), a)
    rep = coeffs.validate_model(m)
    assert not rep.passed
    assert rep.max_psd_violation >= 0.5 - 1e-12
    assert rep.worst_lambda["psd"] < 0


def test_tabulated_matches_builtin():
    lam = np.linspace(-1, 1, 201)
    ref = coeffs.powerlaw(1, 2)
    tab = coeffs.tabulated(lam, ref.flux(lam), ref.diffusion(lam))
    assert coeffs.validate_model(tab).passed
    x = np.linspace(-0.9, 0.9, 7)
    np.testing.assert_allclose(tab.diffusion_primitive(x), ref.diffusion_primitive(x), atol=1e-4)
    np.testing.assert_allclose(tab.sigma_primitive(x), ref.sigma_primitive(x), atol=1e-3)


def test_load_table(tmp_path):
    lam = np.linspace(-1, 1, 21)
    rows = np.column_stack([lam, lam, np.ones_like(lam) * 0.5])
    path = tmp_path / "model.csv"
    np.savetxt(path, rows, delimiter=",", header="lambda,f_1,a_11", comments="")
    m = coeffs.load_table(path)
    assert m.d == 1
    assert m.interval == (-1.0, 1.0)
    np.testing.assert_allclose(m.flux_primitive(np.array([0.5]))[..., 0], 0.125, atol=1e-12)


def test_weight_function_integrable():
    w = coeffs.WeightFunction(N=1.5, d=2)
    assert w.integrable
    vals = [w.box_integral(h, 401) for h in (10, 20, 40)]
    exact = np.pi / (1.5 - 1)  # int (1+r^2)^-N over R^2 = pi/(N-1)
    assert abs(vals[2] - exact) < abs(vals[0] - exact)
    assert vals[2] == pytest.approx(exact, rel=0.05)
    assert not coeffs.WeightFunction(N=1.0, d=2).integrable


@pytest.mark.parametrize("N", [1.0, 1.5, 2.0])
def test_weight_derivative_bounds(N):
    w = coeffs.WeightFunction(N=N, d=2)
    first, second = w.derivative_ratios()
    assert first <= 2 * N + 1
    assert second <= 2 * N + 1


def test_weight_gradient_matches_differences():
    w = coeffs.WeightFunction(N=2.0, d=2)
    x = np.array([0.3, -1.2])
    h = 1e-6
    fd = [(w(x + e) - w(x - e)) / (2 * h) for e in np.eye(2) * h]
    np.testing.assert_allclose(w.gradient(x), fd, rtol=1e-6)
