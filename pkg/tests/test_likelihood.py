import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import stats

from conftest import fixture_data, fixture_fit, fixture_spec, synthetic_loglinear
from snbands.errors import DegenerateDataError, DomainError
from snbands.likelihood import (
    DataFormatError,
    FitOptions,
    LogLikelihood,
    SNDataset,
    SNObservation,
    Status,
    fit_ml,
    loglik,
    read_csv,
    wald_covariance,
)
from snbands.models import CurveFamily, ModelSpec, map_to_strength

SCIPY = {"normal": stats.norm, "sev": stats.gumbel_l, "logistic": stats.logistic}


def naive_loglik(spec, theta, data):
    """Term-by-term censored log-likelihood built on scipy.stats densities."""
    law = SCIPY[spec.error_family.value]
    beta, sigma = np.asarray(theta[:-1]), theta[-1]
    total = 0.0
    for s, t, failed in zip(data.stress, data.cycles, data.failed):
        if spec.orientation.value == "life-specified":
            mu = sum(b * math.log(s) ** j for j, b in enumerate(beta))
            z = (math.log(t) - mu) / sigma
            jac = 1.0 / (sigma * t)
        else:
            mu = sum(b * math.log(t) ** j for j, b in enumerate(beta))
            z = (math.log(s) - mu) / sigma
            dmu = sum(j * b * math.log(t) ** (j - 1) for j, b in enumerate(beta) if j)
            jac = abs(dmu) / (sigma * t)
        total += math.log(law.pdf(z) * jac) if failed else law.logsf(z)
    return total


FIVE = SNDataset([50.0, 50.0, 60.0, 70.0, 70.0], [3.1e5, 2e5, 8.2e4, 2.6e4, 4.4e4],
                 [True, False, True, True, False])


class TestLoglik:
    def test_single_failure_at_median(self):
        spec = ModelSpec(stress_domain=(0.5, 50.0))
        theta = [10.0, -2.0, 0.5]
        t = math.exp(8.0)
        data = SNDataset([math.e], [t], [True])
        expected = math.log(0.3989423) - math.log(0.5) - math.log(t)
        assert_allclose(loglik(spec, theta, data), expected, atol=1e-7)

    def test_single_runout_at_median(self):
        spec = ModelSpec(stress_domain=(0.5, 50.0))
        data = SNDataset([math.e], [math.exp(8.0)], [False])
        assert_allclose(loglik(spec, [10.0, -2.0, 0.5], data), math.log(0.5), atol=1e-15)

    @pytest.mark.parametrize("orientation", ["life-specified", "strength-specified"])
    @pytest.mark.parametrize("family", ["normal", "sev", "logistic"])
    @pytest.mark.parametrize("kind", ["loglinear", "logquadratic"])
    def test_five_observations_against_naive_sum(self, orientation, family, kind):
        spec = fixture_spec(orientation, family, kind)
        if orientation == "life-specified":
            theta = [40.0, -7.0, 0.4] if kind == "loglinear" else [40.0, -7.0, -0.01, 0.4]
        else:
            theta = [5.7, -0.14, 0.06] if kind == "loglinear" else [5.7, -0.13, -0.0005, 0.06]
        assert_allclose(loglik(spec, theta, FIVE), naive_loglik(spec, theta, FIVE),
                        rtol=1e-12, atol=1e-10)

    def test_sigma_must_be_positive(self):
        with pytest.raises(DomainError):
            loglik(fixture_spec(), [40.0, -7.0, 0.0], FIVE)

    def test_observation_outside_domain_names_row(self):
        data = SNDataset([50.0, 60.0, 95.0], [1e5, 1e5, 1e4], [True, True, True])
        with pytest.raises(DomainError, match="observation 3"):
            loglik(fixture_spec(), [40.0, -7.0, 0.4], data)

    def test_non_monotone_curve_is_minus_infinity(self):
        spec = fixture_spec(kind="logquadratic")
        # slope -7 + 2 * 2 * log S is positive across the domain
        assert loglik(spec, [40.0, -7.0, 2.0, 0.4], FIVE) == -np.inf

    def test_runout_near_zero_cycles_carries_no_information(self):
        for family in ("normal", "sev", "logistic"):
            spec = ModelSpec("life", family, stress_domain=(45.0, 80.0))
            theta = [40.0, -7.0, 0.4]
            base = loglik(spec, theta, FIVE)
            tiny = 1e-9 * FIVE.cycles.min()
            more = SNDataset(np.append(FIVE.stress, 60.0), np.append(FIVE.cycles, tiny),
                             np.append(FIVE.failed, False))
            assert abs(loglik(spec, theta, more) - base) <= 1e-6

    def test_orientation_map_preserves_loglik(self):
        spec = fixture_spec()
        theta = np.array([40.0, -7.0, 0.4])
        sspec, h = map_to_strength(spec, theta)
        assert_allclose(loglik(sspec, h, FIVE), loglik(spec, theta, FIVE), rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.permutations(range(30)), st.sampled_from(["normal", "sev"]))
def test_loglik_permutation_invariant(perm, family):
    data = fixture_data()
    idx = np.array(perm)
    shuffled = SNDataset(data.stress[idx], data.cycles[idx], data.failed[idx])
    spec = fixture_spec(family=family)
    theta = [40.0, -7.0, 0.4]
    assert_allclose(loglik(spec, theta, shuffled), loglik(spec, theta, data), rtol=1e-13)


class TestFit:
    def test_wald_covariance_matches_linear_model_information(self):
        data = synthetic_loglinear(n=30, seed=11)
        spec = ModelSpec(stress_domain=(1.0, 10.0))
        fit = fit_ml(spec, data)
        X = np.column_stack([np.ones(data.n), np.log(data.stress)])
        s2 = fit.theta[-1] ** 2
        expected = np.zeros((3, 3))
        expected[:2, :2] = s2 * np.linalg.inv(X.T @ X)
        expected[2, 2] = s2 / (2 * data.n)
        scale = np.sqrt(np.outer(np.diag(expected), np.diag(expected)))
        # 2% per entry; the exactly-zero beta/sigma covariances are judged
        # relative to the corresponding standard errors
        assert np.all(np.abs(fit.wald_cov - expected) <= 0.02 * np.maximum(np.abs(expected),
                                                                           1e-3 * scale))
        assert np.all(np.diag(fit.wald_cov) > 0)

    def test_variance_scales_with_sample_size(self):
        spec = ModelSpec(stress_domain=(1.0, 10.0))
        small = fit_ml(spec, synthetic_loglinear(n=400, seed=1))
        large = fit_ml(spec, synthetic_loglinear(n=1600, seed=2))
        ratio = np.diag(small.wald_cov) / np.diag(large.wald_cov)
        assert np.all(np.abs(ratio / 4.0 - 1.0) <= 0.2)

    def test_all_runouts_is_degenerate(self):
        data = SNDataset([50.0, 60.0], [1e5, 1e5], [False, False])
        with pytest.raises(DegenerateDataError):
            fit_ml(fixture_spec(), data)

    @pytest.mark.parametrize("orientation", ["life-specified", "strength-specified"])
    @pytest.mark.parametrize("family", ["normal", "sev"])
    @pytest.mark.parametrize("kind", ["loglinear", "logquadratic"])
    def test_fixture_fit_is_local_maximum(self, orientation, family, kind):
        fit = fixture_fit(orientation, family, kind)
        spec, data = fit.spec, fixture_data()
        assert fit.converged
        assert_allclose(fit.loglik_hat, loglik(spec, fit.theta, data), atol=1e-9)
        for j in range(spec.n_params):
            for sgn in (1.0, -1.0):
                th = fit.theta.copy()
                th[j] += sgn * 1e-4 * abs(th[j])
                assert loglik(spec, th, data) <= fit.loglik_hat + 1e-6
        assert len([d for d in fit.diagnostics if "start" in d]) == FitOptions().starts
        cov = fit.wald_cov
        assert cov is not None
        assert_allclose(cov, cov.T)
        assert np.all(np.linalg.eigvalsh(cov) > 0)

    def test_known_parameters(self):
        rng = np.random.default_rng(5)
        log_n = 8.0 + 0.5 * rng.standard_normal(20)
        data = SNDataset(np.full(20, math.e), np.exp(log_n), np.ones(20, bool))
        spec = ModelSpec(stress_domain=(1.0, 10.0))
        fit = fit_ml(spec, data, fixed={1: -2.0, 2: 0.5})
        # intercept-only normal mean with an offset of +2 log e
        assert_allclose(fit.theta, [log_n.mean() + 2.0, -2.0, 0.5], rtol=1e-7)
        expected = np.zeros((3, 3))
        expected[0, 0] = 0.25 / 20
        assert_allclose(fit.wald_cov, expected, rtol=1e-4, atol=1e-12)
        assert fit.fixed == (1, 2)

    @pytest.mark.parametrize("fixed", [{5: 1.0}, {2: 0.0}, {0: 1.0, 1: -1.0, 2: 1.0}])
    def test_invalid_fixed(self, fixed):
        with pytest.raises(DomainError):
            fit_ml(fixture_spec(), FIVE, fixed=fixed)

    def test_wald_covariance_function(self, fit_life):
        cov = wald_covariance(fit_life.spec, fit_life.theta, fixture_data())
        assert_allclose(cov, fit_life.wald_cov, rtol=1e-10)


class TestCsv:
    def test_fixture(self):
        data = fixture_data()
        assert data.n == 30
        assert data.n - data.n_failures == 6
        assert data.label == "fixture.csv"

    def test_round_trip(self):
        data = fixture_data()
        back = read_csv(data.to_csv())
        assert_allclose(back.stress, data.stress, rtol=0)
        assert_allclose(back.cycles, data.cycles, rtol=0)
        assert np.array_equal(back.failed, data.failed)

    def test_comments_and_blank_lines(self):
        text = "# a comment\nstress,cycles,status\n\n50,1e5,1\n  # another\n60,2e4,0\n"
        data = read_csv(text)
        assert data.n == 2 and data.n_failures == 1

    def test_bad_status_names_row(self):
        rows = ["stress,cycles,status"] + [f"50,{1000 * (i + 1)},1" for i in range(6)]
        rows.append("50,9000,2")
        with pytest.raises(DataFormatError, match="row 7") as exc:
            read_csv("\n".join(rows) + "\n")
        assert exc.value.row == 7

    @pytest.mark.parametrize("text,row", [
        ("stress,cycles,status\n50,abc,1\n", 1),
        ("stress,cycles,status\n50,1e5\n", 1),
        ("stress,cycles,status\n50,1e5,1\n-3,1e5,1\n", 2),
        ("stress,cycles,status\n50,1e5,1\n50,0,1\n", 2),
    ])
    def test_malformed_rows(self, text, row):
        with pytest.raises(DataFormatError) as exc:
            read_csv(text)
        assert exc.value.row == row

    def test_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataFormatError):
            read_csv(path)

    def test_header_only(self):
        with pytest.raises(DataFormatError):
            read_csv("stress,cycles,status\n")

    def test_wrong_header(self):
        with pytest.raises(DataFormatError):
            read_csv("s,n,d\n50,1e5,1\n")

    def test_observations(self):
        obs = [SNObservation(50.0, 1e5, 1), SNObservation(60.0, 2e4, 0)]
        data = SNDataset.from_observations(obs)
        assert data.observations == obs
        assert obs[1].status is Status.RUNOUT
        with pytest.raises(DomainError):
            SNObservation(-1.0, 1e5, 1)
        with pytest.raises(DegenerateDataError):
            SNDataset.from_observations([])


def test_loglikelihood_object_matches_function(fit_life):
    ll = LogLikelihood(fit_life.spec, fixture_data())
    assert ll(fit_life.theta) == loglik(fit_life.spec, fit_life.theta, fixture_data())
    assert_allclose(ll.eta(fit_life.eta), fit_life.loglik_hat, rtol=1e-14)
    # the centred Hessian is a change of coordinates, not a different function
    H = ll.hessian(fit_life.theta)
    assert_allclose(np.linalg.inv(-H), fit_life.wald_cov, rtol=1e-8)


def test_custom_curve_family_string():
    spec = ModelSpec("life", "normal", "logquadratic", stress_domain=(45.0, 80.0))
    assert spec.curve == CurveFamily("logquadratic")
    assert spec.n_params == 4
