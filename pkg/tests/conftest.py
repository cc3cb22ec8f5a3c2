import warnings

import numpy as np
import pytest

from pbcox.survival import StudyDesignWarning, SurvivalDataset


def make_dataset(times, status, covariates):
    """Dataset constructor that silences the soft design warnings."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StudyDesignWarning)
        return SurvivalDataset(times, status, covariates)


def random_dataset(rng, n, n_cov=1, beta=None, tau=0.0, censor_scale=1.0):
    """Small Cox-Weibull dataset; tau > 0 groups the times to create ties."""
    if beta is None:
        beta = np.full(n_cov, 0.7)
    x = rng.normal(0.0, 1.0, (n, n_cov))
    t = (rng.exponential(1.0, n) / np.exp(x @ beta)) ** (1.0 / 1.4)
    c = rng.uniform(0.2, 1.5 * censor_scale, n)
    if tau > 0.0:
        t = tau * np.ceil(t / tau)
        c = tau * np.ceil(c / tau)
    obs = np.minimum(t, c)
    status = (t <= c).astype(int)
    if status.sum() < 2:  # keep fits well posed
        status[:2] = 1
    return make_dataset(obs, status, x)


def fd_gradient(fun, x, h=None):
    h = h or float(np.finfo(float).eps) ** (1 / 3)
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h * max(1.0, abs(x[i]))
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * e[i])
    return g


def fd_hessian(fun, x, h=None):
    h = h or float(np.finfo(float).eps) ** (1 / 4)
    p = x.size
    out = np.empty((p, p))
    steps = [h * max(1.0, abs(x[i])) for i in range(p)]
    f0 = fun(x)
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = steps[i]
        out[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / steps[i] ** 2
        for j in range(i + 1, p):
            ej = np.zeros(p)
            ej[j] = steps[j]
            out[i, j] = out[j, i] = (
                fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
    return out


def grid_maximize(fun, lo, hi, coarse=2001, refine=2001):
    """Two-stage dense grid maximization of a 1-d function."""
    xs = np.linspace(lo, hi, coarse)
    vals = np.array([fun(x) for x in xs])
    best = xs[int(np.argmax(vals))]
    width = (hi - lo) / (coarse - 1)
    xs = np.linspace(best - 2 * width, best + 2 * width, refine)
    vals = np.array([fun(x) for x in xs])
    return float(xs[int(np.argmax(vals))])


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)
