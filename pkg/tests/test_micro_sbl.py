import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gssbl.errors import ConfigurationError, DegenerateColumnError
from gssbl.micro_sbl import SblPriors, run_micro_sbl, score_candidate, score_candidates

ONE_ITER = SblPriors(alpha_init=0.0, max_iters=1)
FLAT = SblPriors(a=1e-12, b=1e-12, max_iters=50)


def ls_coef(phi, y):
    return float(np.dot(phi, y) / np.dot(phi, phi))


def test_defaults():
    p = SblPriors()
    assert (p.a, p.b, p.beta_init, p.alpha_init, p.max_iters, p.tol) == (0.05, 0.05, 1e3, 0.0, 10, 1e-8)


@pytest.mark.parametrize("kw", [dict(a=-1), dict(beta_init=0), dict(max_iters=0), dict(alpha_init=-1)])
def test_invalid_priors(kw):
    with pytest.raises(ConfigurationError):
        SblPriors(**kw)


def test_first_iteration_is_least_squares():
    rng = np.random.default_rng(0)
    for _ in range(20):
        phi, y = rng.random(12), rng.normal(size=12)
        for beta in (1e-3, 1.0, 1e3):
            st_ = run_micro_sbl(phi, y, SblPriors(beta_init=beta, max_iters=1))
            assert st_.mu == pytest.approx(ls_coef(phi, y), rel=1e-12)
            assert st_.iters_run == 1


def test_zero_target_gives_zero_mean():
    phi = np.linspace(1, 2, 8)
    for iters in (1, 5, 50):
        assert run_micro_sbl(phi, np.zeros(8), SblPriors(max_iters=iters)).mu == 0.0


def test_self_consistent_data_converges_to_coefficient():
    phi = np.random.default_rng(1).random(30) + 0.1
    for c in (0.5, 3.0, 40.0):
        assert run_micro_sbl(phi, c * phi, FLAT).mu == pytest.approx(c, rel=1e-6)


def test_zero_column_rejected():
    with pytest.raises(DegenerateColumnError):
        run_micro_sbl(np.zeros(4), np.ones(4))


def test_posterior_identities_hold_at_return():
    rng = np.random.default_rng(2)
    for _ in range(50):
        phi, y = rng.random(15), rng.random(15)
        s = run_micro_sbl(phi, y)
        pp = float(np.dot(phi, phi))
        assert s.sigma == pytest.approx(1.0 / (s.beta * pp + s.alpha), rel=1e-12)
        assert s.mu == pytest.approx(s.beta * s.sigma * float(np.dot(phi, y)), rel=1e-12)
        assert s.sigma > 0 and s.alpha >= 0 and s.beta > 0


def test_early_exit_on_convergence():
    phi = np.ones(200)
    s = run_micro_sbl(phi, 2.0 * phi, SblPriors(a=0, b=0, max_iters=100))
    assert s.iters_run < 100


def test_exact_target_scores_zero_error():
    phi = np.random.default_rng(3).random(25) + 0.5
    y = 1.7 * phi
    mu, err = score_candidate(phi, y, SblPriors(a=1e-12, b=1e-12))
    assert err <= 1e-10 * float(np.dot(y, y))


def test_orthogonal_column_is_no_improvement():
    phi = np.array([1.0, 0.0, 1.0, 0.0])
    y = np.array([0.0, 2.0, 0.0, 3.0])
    mu, err = score_candidate(phi, y, ONE_ITER)
    assert mu == 0.0
    assert err == float(np.dot(y, y))


def test_negative_mean_is_no_improvement():
    phi = np.ones(5)
    y = -np.arange(1.0, 6.0)
    mu, err = score_candidate(phi, y)
    assert mu < 0
    assert err == float(np.dot(y, y))


def test_error_matches_direct_reevaluation():
    rng = np.random.default_rng(4)
    phi, y = rng.random(10), rng.random(10)
    mu, err = score_candidate(phi, y)
    direct = sum((y[i] - mu * phi[i]) ** 2 for i in range(10))
    assert err == pytest.approx(direct, rel=1e-12)


def test_batch_matches_scalar():
    rng = np.random.default_rng(5)
    cols = rng.random((40, 17))
    y = rng.random(40)
    for priors in (SblPriors(), FLAT, ONE_ITER):
        mu, err, iters = score_candidates(cols, y, priors)
        for j in range(cols.shape[1]):
            m, e = score_candidate(cols[:, j], y, priors)
            assert mu[j] == pytest.approx(m, rel=1e-12)
            assert err[j] == pytest.approx(e, rel=1e-12)
            assert iters[j] == run_micro_sbl(cols[:, j], y, priors).iters_run


vec = arrays(np.float64, 8, elements=st.floats(0.01, 10.0))


@settings(max_examples=100, deadline=None)
@given(phi=vec, y=vec, s=st.floats(0.01, 100.0))
def test_first_iteration_scale_equivariance(phi, y, s):
    base = run_micro_sbl(phi, y, ONE_ITER).mu
    assert run_micro_sbl(phi, s * y, ONE_ITER).mu == pytest.approx(s * base, rel=1e-12)
    assert run_micro_sbl(s * phi, y, ONE_ITER).mu == pytest.approx(base / s, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(phi=vec, y=vec)
def test_regularised_fit_between_ls_and_no_op(phi, y):
    mu, err = score_candidate(phi, y)
    c = ls_coef(phi, y)
    ls_err = float(np.sum((y - c * phi) ** 2))
    assert err >= ls_err * (1 - 1e-12)
    if mu > 0:
        assert err <= float(np.dot(y, y)) * (1 + 1e-12)
