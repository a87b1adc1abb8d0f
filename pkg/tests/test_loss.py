import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpdspline import (Bernoulli, Exponential, Gaussian, Poisson, assemble, build_knots,
                       irls_step_data, loss, penalized_gradient, penalized_objective)
from dpdspline.loss import loss_value

FAMS = [Gaussian(), Gaussian(0.4), Bernoulli(), Poisson(), Exponential()]


def _draw(fam, rng):
    if isinstance(fam, Exponential):
        theta = -math.exp(rng.uniform(-1, 1))
    else:
        theta = rng.uniform(-2, 2)
    y = float(fam.sample(np.array(theta), rng))
    if isinstance(fam, Gaussian):
        y += rng.normal() * 2
    return y, theta


def test_gaussian_loss_closed_form_and_minimizer():
    a, y = 0.5, 0.8
    thetas = np.linspace(-2, 3, 5001)
    val = loss(Gaussian(), a, y, thetas).value
    expected = ((2 * math.pi) ** (-a / 2) * (1 + a) ** -0.5
                - (1 + 1 / a) * (2 * math.pi) ** (-a / 2) * np.exp(-a * (y - thetas) ** 2 / 2))
    np.testing.assert_allclose(val, expected, rtol=1e-14, atol=1e-15)
    assert thetas[np.argmin(val)] == pytest.approx(y, abs=1e-3)
    assert float(loss(Gaussian(), a, y, y).grad) == 0.0


def test_likelihood_branch_poisson_score_zero():
    ev = loss(Poisson(), 0.0, 2.0, math.log(2.0))
    assert abs(float(ev.grad)) < 1e-15
    assert float(ev.hess) == pytest.approx(2.0)


def test_likelihood_branch_is_nll():
    rng = np.random.default_rng(0)
    for fam in FAMS:
        y, th = _draw(fam, rng)
        assert float(loss(fam, 0.0, y, th).value) == pytest.approx(-float(fam.logpdf(y, th)))


def test_negative_alpha_rejected():
    with pytest.raises(ValueError):
        loss(Gaussian(), -0.1, 0.0, 0.0)


@pytest.mark.parametrize("fam", FAMS, ids=lambda f: f"{f.name}-{f.dispersion}")
@pytest.mark.parametrize("alpha", [0.0, 0.1, 0.5, 1.0])
def test_derivatives_match_finite_differences(fam, alpha):
    rng = np.random.default_rng(int(alpha * 10) + 7)
    h = 1e-6
    for _ in range(15):
        y, th = _draw(fam, rng)
        ev = loss(fam, alpha, y, th)
        fd_g = (float(loss(fam, alpha, y, th + h).value) - float(loss(fam, alpha, y, th - h).value)) / (2 * h)
        fd_h = (float(loss(fam, alpha, y, th + h).grad) - float(loss(fam, alpha, y, th - h).grad)) / (2 * h)
        scale_g = max(abs(float(ev.grad)), 1e-3)
        scale_h = max(abs(float(ev.hess)), 1e-3)
        assert abs(fd_g - float(ev.grad)) / scale_g < 1e-6
        assert abs(fd_h - float(ev.hess)) / scale_h < 1e-6


def test_loss_value_matches_full_evaluation():
    rng = np.random.default_rng(2)
    for fam in FAMS:
        for alpha in (0.0, 0.3):
            y, th = _draw(fam, rng)
            assert float(loss_value(fam, alpha, y, th)) == pytest.approx(
                float(loss(fam, alpha, y, th).value), rel=1e-14)


@given(y=st.floats(-1e6, 1e6), theta=st.floats(-5, 5), alpha=st.floats(0.05, 1.0))
@settings(max_examples=100, deadline=None)
def test_gaussian_lower_bound_and_finite(y, theta, alpha):
    ev = loss(Gaussian(), alpha, y, theta)
    assert all(np.isfinite(float(x)) for x in ev)
    sup_f = (2 * math.pi) ** -0.5
    assert float(ev.value) >= -(1 + 1 / alpha) * sup_f**alpha - 1e-15


@given(y=st.integers(0, 10_000), theta=st.floats(-5, 5), alpha=st.floats(0.05, 1.0))
@settings(max_examples=100, deadline=None)
def test_poisson_lower_bound(y, theta, alpha):
    fam = Poisson()
    mode = max(0.0, math.floor(math.exp(theta)))
    sup_f = max(float(fam.density(mode, theta)), float(fam.density(mode + 1, theta)))
    assert float(loss(fam, alpha, y, theta).value) >= -(1 + 1 / alpha) * sup_f**alpha - 1e-15


@pytest.mark.parametrize("alpha", [0.2, 1.0])
def test_gradient_bounded_gaussian(alpha):
    ys = np.linspace(-1e3, 1e3, 200_001)
    g = np.abs(loss(Gaussian(), alpha, ys, 0.0).grad)
    k = np.argmax(g)
    assert np.isfinite(g).all()
    assert abs(ys[k]) < 5
    assert g[-1] < 1e-10 and g[0] < 1e-10


@pytest.mark.parametrize("alpha", [0.2, 1.0])
def test_gradient_bounded_poisson(alpha):
    ys = np.arange(0.0, 2000.0)
    th = math.log(4.0)
    g = np.abs(loss(Poisson(), alpha, ys, th).grad)
    assert np.isfinite(g).all()
    assert ys[np.argmax(g)] < 20
    # the data-dependent part decays; what remains is the constant (1 + a) i1
    limit = (1 + alpha) * float(Poisson().dpd_terms(th, alpha).i1)
    assert abs(g[-1] - abs(limit)) < 1e-10


# --- IRWLS data ----------------------------------------------------------------------

def test_irls_likelihood_reduction():
    rng = np.random.default_rng(1)
    for fam in FAMS:
        g = np.array([_draw(fam, rng)[1] for _ in range(8)])
        y = np.asarray(fam.sample(g, rng), dtype=float)
        d = irls_step_data(fam, 0.0, y, g)
        np.testing.assert_allclose(d.w, fam.info(g) * np.ones_like(g), rtol=1e-14)
        np.testing.assert_allclose(d.z, g + fam.score(y, g) / fam.info(g), rtol=1e-12)


@pytest.mark.parametrize("mode", ["newton", "fisher"])
def test_irls_working_response_identity(mode):
    rng = np.random.default_rng(4)
    for fam in FAMS:
        for alpha in (0.0, 0.4, 1.0):
            g = np.array([_draw(fam, rng)[1] for _ in range(10)])
            y = np.asarray(fam.sample(g, rng), dtype=float)
            d = irls_step_data(fam, alpha, y, g, mode)
            grad = loss(fam, alpha, y, g).grad
            np.testing.assert_allclose(d.w * (d.z - g), -grad, rtol=1e-10, atol=1e-14)


def test_irls_gaussian_perfect_fit():
    g = np.array([-1.0, 0.3, 2.0])
    d = irls_step_data(Gaussian(), 0.6, g.copy(), g)
    assert np.array_equal(d.z, g)


def test_fisher_weights_positive():
    th = np.linspace(-6, 6, 41)
    for fam in (Gaussian(), Bernoulli(), Poisson()):
        d = irls_step_data(fam, 0.7, fam.mean(th), th, "fisher")
        assert np.all(d.w > 0)


def test_newton_weights_can_be_negative():
    d = irls_step_data(Gaussian(), 1.0, np.array([3.0]), np.array([0.0]))
    assert d.w[0] < 0


def test_degenerate_newton_weight_falls_back():
    # Gaussian, phi=1: (1+a) i2 = i0, so hess = (1+a) f^a (1 - a u^2), which is 0 at u^2 = 1/a
    a = 1.0
    fam = Gaussian()
    d = irls_step_data(fam, a, np.array([1.0]), np.array([0.0]))
    assert d.degenerate[0]
    assert d.w[0] == pytest.approx(2 * float(fam.dpd_terms(0.0, a).i2))


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
@pytest.mark.parametrize("theta", [-1.0, 0.5, 2.5])
def test_expected_newton_weight_is_fisher_weight(alpha, theta):
    for fam, ys in ((Bernoulli(), np.array([0.0, 1.0])),
                    (Poisson(), np.arange(0.0, 200.0))):
        f = fam.density(ys, theta)
        g = np.full_like(ys, theta)
        w_newton = loss(fam, alpha, ys, g).hess
        w_fisher = irls_step_data(fam, alpha, ys[:1], g[:1], "fisher").w[0]
        assert float(np.sum(f * w_newton)) == pytest.approx(w_fisher, rel=1e-10, abs=1e-14)


def test_irls_bad_mode():
    with pytest.raises(ValueError):
        irls_step_data(Poisson(), 0.5, np.array([1.0]), np.array([0.0]), mode="exact")


# --- penalized objective ----------------------------------------------------------------

@pytest.fixture(scope="module")
def small_basis():
    t = np.arange(1, 61) / 61
    return assemble(build_knots(t, p=4, m=2, strategy="explicit-K", K=6), t, 2)


def test_penalized_objective_reduces_to_nll(small_basis):
    rng = np.random.default_rng(5)
    coefs = rng.normal(size=small_basis.dim) * 0.5
    theta = small_basis.B @ coefs
    y = Poisson().sample(theta, rng)
    nll = -np.sum(Poisson().logpdf(y, theta))
    assert penalized_objective(coefs, small_basis, Poisson(), 0.0, 0.0, y) == pytest.approx(nll, rel=1e-14)


def test_penalty_vanishes_on_linear_function(small_basis):
    t = small_basis.t
    q, *_ = np.linalg.lstsq(small_basis.B, 0.3 - 1.2 * t, rcond=None)
    y = np.round(np.exp(0.3 - 1.2 * t))
    a = penalized_objective(q, small_basis, Poisson(), 0.5, 0.0, y)
    b = penalized_objective(q, small_basis, Poisson(), 0.5, 1e6, y)
    assert abs(a - b) < 1e-6 * abs(a)


def test_penalized_objective_inadmissible_is_inf(small_basis):
    coefs = np.full(small_basis.dim, 0.5)
    assert penalized_objective(coefs, small_basis, Exponential(), 0.5, 1.0, np.ones(60)) == np.inf


@pytest.mark.parametrize("fam", [Gaussian(), Bernoulli(), Poisson()], ids=lambda f: f.name)
@pytest.mark.parametrize("alpha", [0.0, 0.5])
def test_penalized_gradient_finite_differences(small_basis, fam, alpha):
    rng = np.random.default_rng(6)
    coefs = rng.normal(size=small_basis.dim) * 0.4
    y = np.asarray(fam.sample(small_basis.B @ coefs, rng), dtype=float)
    lam = 0.01
    grad = penalized_gradient(coefs, small_basis, fam, alpha, lam, y)
    h = 1e-6
    fd = np.empty_like(grad)
    for j in range(grad.size):
        e = np.zeros_like(coefs)
        e[j] = h
        fd[j] = (penalized_objective(coefs + e, small_basis, fam, alpha, lam, y)
                 - penalized_objective(coefs - e, small_basis, fam, alpha, lam, y)) / (2 * h)
    assert np.linalg.norm(fd - grad) / np.linalg.norm(grad) < 1e-6
