import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, optimize

from snbands import dist
from snbands.dist import ErrorFamily
from snbands.errors import DomainError

ALL = list(ErrorFamily)


def gauss_pdf(z):
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def gauss_cdf_by_quadrature(z):
    # symmetric split keeps quad accurate for either sign of z
    return 0.5 + math.copysign(integrate.quad(gauss_pdf, 0.0, abs(z), epsabs=1e-14)[0], z)


class TestExamples:
    def test_cdf_values(self):
        assert dist.std_cdf("normal", 0.0) == 0.5
        assert_allclose(dist.std_cdf("sev", 0.0), 1.0 - math.exp(-1.0), atol=1e-7)
        assert_allclose(dist.std_cdf("logistic", 0.0), 0.5)

    def test_normal_cdf_against_quadrature(self):
        oracle = gauss_cdf_by_quadrature(1.644854)
        assert_allclose(oracle, 0.95, atol=1e-6)
        assert_allclose(dist.std_cdf("normal", 1.644854), oracle, atol=1e-12)

    def test_quantile_values(self):
        assert dist.std_quantile("normal", 0.5) == 0.0
        assert_allclose(dist.std_quantile("sev", 0.6321206), 0.0, atol=1e-6)
        assert_allclose(dist.std_quantile("logistic", 0.75), math.log(3.0), atol=1e-9)

    def test_pdf_values(self):
        assert_allclose(dist.std_pdf("normal", 0.0), 0.3989423, atol=1e-7)
        assert_allclose(dist.std_pdf("sev", 0.0), math.exp(-1.0), atol=1e-7)
        assert_allclose(dist.std_pdf("logistic", 0.0), 0.25, atol=1e-15)

    def test_chisq1_quantile(self):
        assert dist.chisq1_quantile(0.0) == 0.0
        for p in (0.90, 0.95):
            # Gaussian quantile by numeric inversion of the quadrature cdf
            q = optimize.brentq(lambda z: gauss_cdf_by_quadrature(z) - 0.5 * (1 + p), 0, 5,
                                xtol=1e-14)
            assert_allclose(dist.chisq1_quantile(p), q * q, atol=1e-9)
        assert_allclose(dist.chisq1_quantile(0.90), 2.705543, atol=1e-5)
        assert_allclose(dist.chisq1_quantile(0.95), 3.841459, atol=1e-5)

    def test_vectorized(self):
        z = np.array([-1.0, 0.0, 2.0])
        assert_allclose(dist.std_cdf("normal", z),
                        [gauss_cdf_by_quadrature(v) for v in z], atol=1e-12)


class TestErrors:
    @pytest.mark.parametrize("fn", [dist.std_cdf, dist.std_pdf, dist.std_logcdf,
                                    dist.std_logsf])
    @pytest.mark.parametrize("z", [math.inf, -math.inf, math.nan])
    def test_non_finite_argument(self, fn, z):
        with pytest.raises(DomainError):
            fn("normal", z)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
    def test_quantile_outside_unit_interval(self, p):
        with pytest.raises(DomainError):
            dist.std_quantile("sev", p)

    @pytest.mark.parametrize("p", [1.0, -1e-9, 2.0])
    def test_chisq1_domain(self, p):
        with pytest.raises(DomainError):
            dist.chisq1_quantile(p)

    def test_unknown_family(self):
        with pytest.raises(DomainError):
            ErrorFamily.parse("cauchy")


def test_aliases():
    assert ErrorFamily.parse("Weibull") is ErrorFamily.SEV
    assert ErrorFamily.parse("smallest-extreme-value") is ErrorFamily.SEV
    assert ErrorFamily.parse("lognormal") is ErrorFamily.NORMAL
    assert ErrorFamily.parse("loglogistic") is ErrorFamily.LOGISTIC
    assert ErrorFamily.SEV.life_distribution == "weibull"


@pytest.mark.parametrize("family", ALL)
def test_deep_tails_stay_finite(family):
    z = np.array([-60.0, -40.0, 40.0, 60.0])
    assert np.all(np.isfinite(dist.std_logcdf(family, z)))
    assert np.all(np.isfinite(dist.std_logsf(family, z)))
    # log-space tails agree with direct evaluation where that is representable
    zz = np.array([-8.0, -3.0, 0.5, 3.0])
    # (absolute floor: log of a probability next to 1 is only good to ~1e-16)
    assert_allclose(dist.std_logcdf(family, zz), np.log(dist.std_cdf(family, zz)),
                    rtol=1e-12, atol=1e-15)
    assert_allclose(dist.std_logsf(family, zz), np.log(dist.std_sf(family, zz)),
                    rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("family", ALL)
def test_kernels_match_public_functions(family):
    z = np.linspace(-7, 4, 23)
    logpdf, logsf = dist.KERNELS[family]
    assert_allclose(logpdf(z), dist.std_logpdf(family, z), rtol=1e-14)
    assert_allclose(logsf(z), dist.std_logsf(family, z), rtol=1e-14)


@pytest.mark.parametrize("family", ALL)
def test_pdf_integrates_to_cdf(family):
    got = integrate.quad(lambda z: dist.std_pdf(family, z), -40.0, 1.3, epsabs=1e-13)[0]
    assert_allclose(got, dist.std_cdf(family, 1.3), atol=1e-10)


# property suites

families = st.sampled_from(ALL)
probs = st.floats(min_value=1e-12, max_value=1 - 1e-12)


@settings(max_examples=300, deadline=None)
@given(families, probs)
def test_round_trip(family, p):
    assert_allclose(dist.std_cdf(family, dist.std_quantile(family, p)), p, atol=1e-9)


@settings(max_examples=300, deadline=None)
@given(families, st.floats(min_value=-8.0, max_value=8.0))
def test_pdf_is_derivative_of_cdf(family, z):
    h = 1e-5
    fd = (dist.std_cdf(family, z + h) - dist.std_cdf(family, z - h)) / (2 * h)
    pdf = dist.std_pdf(family, z)
    assert pdf >= 0.0
    assert abs(pdf - fd) <= 1e-6


@settings(max_examples=200, deadline=None)
@given(families, probs, probs)
def test_quantile_increasing(family, p1, p2):
    lo, hi = sorted((p1, p2))
    q_lo, q_hi = dist.std_quantile(family, lo), dist.std_quantile(family, hi)
    assert q_lo <= q_hi
    if hi - lo > 1e-12:
        assert q_lo < q_hi


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.999999),
       st.floats(min_value=0.0, max_value=0.999999))
def test_chisq1_increasing(p1, p2):
    lo, hi = sorted((p1, p2))
    q_lo, q_hi = dist.chisq1_quantile(lo), dist.chisq1_quantile(hi)
    assert q_lo <= q_hi
    # strict where the squared value (about p**2) is representable
    if hi - lo > 1e-12 and hi > 1e-150:
        assert q_lo < q_hi
