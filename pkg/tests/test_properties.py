"""Property-based checks of the estimator invariants."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cureinv import (
    CureLink,
    KernelSpec,
    SurvivalDataset,
    censoring_survival,
    design,
    estimate_subdistributions,
    fit,
    latency_survival,
    score,
    simulate,
)
from cureinv.resampling import McCell, McCellResult, McReport

SETTINGS = settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def datasets(draw, min_n=1, max_n=20):
    n = draw(st.integers(min_n, max_n))
    distinct = draw(st.integers(1, 6))
    time = draw(st.lists(st.integers(1, distinct), min_size=n, max_size=n))
    status = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    if not any(status):
        status[0] = 1
    x = draw(st.lists(st.floats(-1, 1, allow_nan=False), min_size=n, max_size=n))
    return SurvivalDataset(np.asarray(time, float) * 0.5, status, x)


bandwidths = st.floats(0.3, 3.0)
phis = st.floats(0.01, 1.0)


def _at(data, draw_index):
    return float(data.x[draw_index % data.n])


@SETTINGS
@given(datasets(), bandwidths, phis, st.integers(0, 100))
def test_survivals_are_monotone_and_in_range(data, h, phi, k):
    H0, H1 = estimate_subdistributions(data, _at(data, k), KernelSpec(h))
    grid = np.linspace(-0.5, 4.0, 46)
    for f in (latency_survival(H0, H1, phi, grid), censoring_survival(H0, H1, grid)):
        assert np.all((f >= 0) & (f <= 1))
        assert np.all(np.diff(f) <= 1e-15)


@SETTINGS
@given(datasets(), bandwidths, st.integers(0, 100))
def test_subdistributions_are_normalized(data, h, k):
    H0, H1 = estimate_subdistributions(data, _at(data, k), KernelSpec(h))
    assert H0.tail(-np.inf) + H1.tail(-np.inf) == pytest.approx(1.0, abs=1e-12)
    assert np.all(H0.masses >= 0) and np.all(H1.masses >= 0)


@SETTINGS
@given(datasets(), bandwidths, st.lists(phis, min_size=2, max_size=2), st.integers(0, 100))
def test_latency_survival_ordered_in_phi(data, h, pair, k):
    lo, hi = sorted(pair)
    H0, H1 = estimate_subdistributions(data, _at(data, k), KernelSpec(h))
    grid = np.linspace(0, 4, 17)
    assert np.all(latency_survival(H0, H1, lo, grid) <= latency_survival(H0, H1, hi, grid) + 1e-12)


@SETTINGS
@given(datasets(), bandwidths, st.floats(0.05, 1.0), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_constant_link_score_is_zero(data, h, c, beta):
    assert np.array_equal(score(data, KernelSpec(h), CureLink("constant", c), beta), np.zeros(2))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 60))
def test_fit_is_duplication_invariant(seed, n):
    data = simulate(design(n=n, seed=seed))
    spec = KernelSpec(3 * n ** (-2 / 7))
    a = fit(data, spec)
    b = fit(data.repeat(2), spec)
    # the two runs stop within the simplex tolerance of each other
    assert b.loglik == pytest.approx(2 * a.loglik, rel=1e-8)
    # on the box edge phi is numerically 1 and the criterion is flat in the
    # slope, so the maximiser is only unique for interior optima
    if not a.at_boundary:
        assert np.allclose(a.beta_hat, b.beta_hat, atol=1e-6)


@SETTINGS
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40), st.floats(-10, 10))
def test_mse_is_bias_squared_plus_variance(draws, truth):
    res = McCellResult(McCell(), {"beta1": truth}, {"beta1": np.array(draws)})
    bias, mse, var = res.summary("beta1")
    assert mse == pytest.approx(bias * bias + var, rel=1e-12, abs=1e-12)
    assert mse >= bias * bias - 1e-12


def test_report_records_satisfy_identity():
    res = McCellResult(McCell(), {p: 0.1 for p in McReport.PARAMS},
                       {p: np.linspace(-1, 2, 7) for p in McReport.PARAMS})
    for r in McReport([res], 7, 0).records():
        assert r["mse"] == pytest.approx(r["bias"] ** 2 + r["variance"], abs=1e-12)
