import functools
import math
import pathlib

import numpy as np
import pytest
from scipy import stats

from snbands.intervals import ScalarTarget
from snbands.likelihood import SNDataset, fit_ml, read_csv
from snbands.models import CurveFamily, CurveKind, ModelSpec

DATA_DIR = pathlib.Path(__file__).parent / "data"
FIXTURE_CSV = DATA_DIR / "fixture.csv"
FIXTURE_CONFIG = DATA_DIR / "fixture_config.json"

# one "PASS/FAIL <criterion>" line per acceptance criterion, repeated in
# the terminal summary so that it survives output capture
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


STRESS_DOMAIN = (45.0, 80.0)
CYCLES_DOMAIN = (2.0e3, 2.0e6)

ORIENTATIONS = ("life-specified", "strength-specified")
FAMILIES = ("normal", "sev")
KINDS = ("loglinear", "logquadratic")
MATRIX = [(o, f, k) for f in FAMILIES for k in KINDS for o in ORIENTATIONS]


# interval targets inside the fixture domains, indexed by two numbers in [0, 1]
TARGETS = {
    "life-quantile": lambda a, b: ScalarTarget.life_quantile(a, 45.0 + 35.0 * b),
    "life-cdf": lambda a, b: ScalarTarget.life_cdf(3e4 * 10 ** (1.3 * a), 50.0 + 20.0 * b),
    "strength-quantile": lambda a, b: ScalarTarget.strength_quantile(a, 2e4 * 10 ** b),
    "strength-cdf": lambda a, b: ScalarTarget.strength_cdf(50.0 + 15.0 * a, 2e4 * 10 ** b),
}


def fixture_spec(orientation="life-specified", family="normal", kind="loglinear"):
    return ModelSpec(orientation, family, CurveFamily(CurveKind(kind)),
                     stress_domain=STRESS_DOMAIN, cycles_domain=CYCLES_DOMAIN)


@functools.lru_cache(maxsize=None)
def fixture_data():
    return read_csv(FIXTURE_CSV)


@functools.lru_cache(maxsize=None)
def fixture_fit(orientation="life-specified", family="normal", kind="loglinear"):
    return fit_ml(fixture_spec(orientation, family, kind), fixture_data())


def synthetic_loglinear(n=30, seed=11, theta=(10.0, -2.0, 0.5), levels=(2.0, 3.0, 4.5),
                        censor=None):
    """Lognormal life-specified loglinear data over ``levels``."""
    rng = np.random.default_rng(seed)
    stress = np.resize(np.asarray(levels, dtype=float), n)
    stress.sort()
    log_n = theta[0] + theta[1] * np.log(stress) + theta[2] * rng.standard_normal(n)
    life = np.exp(log_n)
    if censor is None:
        return SNDataset(stress, life, np.ones(n, dtype=bool), label="synthetic")
    return SNDataset(stress, np.minimum(life, censor), life <= censor, label="synthetic")


def one_parameter_problem(n=20, seed=5, sigma=0.5):
    """Intercept-only lognormal lives at a single stress with known sigma and slope."""
    rng = np.random.default_rng(seed)
    log_n = 8.0 + sigma * rng.standard_normal(n)
    data = SNDataset(np.full(n, math.e), np.exp(log_n), np.ones(n, dtype=bool))
    fit = fit_ml(ModelSpec(stress_domain=(1.0, 10.0)), data, fixed={1: -2.0, 2: sigma})
    return fit, data, log_n


def dense_grid_interval(log_n, sigma, alpha, step=1e-4):
    """Level set ``{mu : l(mu) >= k}`` of a normal mean by brute force."""
    mu_hat = log_n.mean()
    grid = np.arange(mu_hat - 1.0, mu_hat + 1.0, step)
    ll = stats.norm.logpdf(log_n[None, :], loc=grid[:, None], scale=sigma).sum(axis=1)
    k = ll.max() - 0.5 * stats.chi2.ppf(1 - alpha, 1)
    inside = grid[ll >= k]
    return inside.min(), inside.max()


def grid_oracle_3d(data, theta_hat, cov, xi, alpha, n_coarse=41, n_fine=15, rounds=8):
    """Extremes of ``xi`` over ``{theta : l(theta) >= k}`` by nested grid search.

    The log-likelihood is evaluated directly with scipy.stats on a grid over
    ``(beta0, beta1, log sigma)``.  The box is laid out along the Wald
    covariance axes (an affine change of grid coordinates only), then each
    extreme is refined by re-gridding a shrinking box around the current best
    point.
    """
    ls, lt, fail = np.log(data.stress), np.log(data.cycles), data.failed

    def ll(eta):
        b0, b1, sig = eta[:, :1], eta[:, 1:2], np.exp(eta[:, 2:3])
        z = (lt[None, :] - b0 - b1 * ls[None, :]) / sig
        terms = np.where(fail[None, :], stats.norm.logpdf(z) - np.log(sig) - lt[None, :],
                         stats.norm.logsf(z))
        return terms.sum(axis=1)

    eta_hat = np.array([theta_hat[0], theta_hat[1], math.log(theta_hat[2])])
    J = np.diag([1.0, 1.0, 1.0 / theta_hat[2]])
    L = np.linalg.cholesky(J @ cov @ J.T)
    k = ll(eta_hat[None, :])[0] - 0.5 * stats.chi2.ppf(1 - alpha, 1)

    def box(center, half, m):
        ax = np.linspace(-half, half, m)
        g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3)
        return center + g @ L.T

    pts = box(eta_hat, 3.0, n_coarse)
    keep = pts[ll(pts) >= k]
    vals = xi(keep)
    out = []
    for pick in (np.argmin, np.argmax):
        best = keep[pick(vals)]
        best_val = vals[pick(vals)]
        half = 2 * 3.0 / (n_coarse - 1)
        for _ in range(rounds):
            pts = box(best, half, n_fine)
            inside = pts[ll(pts) >= k]
            if inside.size:
                v = xi(inside)
                j = pick(v)
                if (v[j] < best_val) if pick is np.argmin else (v[j] > best_val):
                    best, best_val = inside[j], v[j]
            half /= 3.0
        out.append(best_val)
    return tuple(out)


@pytest.fixture(scope="session")
def data():
    return fixture_data()


@pytest.fixture(scope="session")
def fit_life():
    return fixture_fit()
