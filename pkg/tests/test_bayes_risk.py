"""Compare the strong-simulator filter with the exact Bayes risk.

For a uniform prior and a binomial click count, the posterior mean minimises
expected squared error. Its risk can be computed by one-dimensional
quadrature, which gives an oracle for the engine that does not depend on the
asymptotic bound.
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import binom

from lfpe.models import PhotodetectorModel, asymptotic_mse_bound, click_probability


def exact_bayes_risk(model, n_trials, grid=4001):
    p = np.linspace(0.0, 1.0, grid)
    q = click_probability(model, p)
    k = np.arange(n_trials + 1)[:, None]
    like = binom.pmf(k, n_trials, q[None, :])
    evidence = trapezoid(like, p, axis=1)
    first = trapezoid(like * p, p, axis=1)
    # Counts far outside [N*alpha, N*(1-beta)] have evidence that underflows to zero.
    seen = evidence > 0
    return 1.0 / 3.0 - float(np.sum(first[seen] ** 2 / evidence[seen]))


def test_noise_free_risk_matches_laplace_rule():
    # With no detector noise the posterior is Beta(k+1, N-k+1) and the risk is 1/(6(N+2)).
    assert exact_bayes_risk(PhotodetectorModel(0.0, 0.0), 50) == pytest.approx(1 / (6 * 52), rel=1e-5)


def test_figure_setting_risk_is_below_asymptotic_bound():
    model = PhotodetectorModel(0.9, 0.05)
    risk = exact_bayes_risk(model, 1000)
    assert risk == pytest.approx(0.01924, abs=2e-4)
    assert risk < 0.9 * asymptotic_mse_bound(model, 1000)


@pytest.mark.slow
def test_strong_filter_reaches_bayes_risk(sweep):
    row = sweep("left-strong").row("1000")
    risk = exact_bayes_risk(PhotodetectorModel(0.9, 0.05), 1000)
    assert abs(row.mean_mse - risk) < 3 * row.stderr
