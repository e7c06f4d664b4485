import math

import pytest

import bctcure as bc


def test_true_parameters_and_cure_rate():
    b0, b1 = bc.true_params_binary(0.40, 0.20, 0.5)
    assert b0 == pytest.approx(0.905, abs=5e-4)
    assert b1 == pytest.approx(-0.755, abs=5e-4)
    theta = bc.ParameterVector([b0, b1], 0.316, 0.179, 0.5)
    assert bc.cure_rate([1.0], theta) == pytest.approx(0.40, abs=1e-12)
    assert bc.population_survival(0.0, [0.0], theta) == 1.0


def test_weibull_round_trip():
    p = bc.WeibullParams(0.316, 0.179)
    assert bc.weibull_cdf(bc.weibull_quantile(0.3, p), p) == pytest.approx(0.3, rel=1e-12)
    m = bc.weibull_moment_match(bc.weibull_mean(p), bc.weibull_variance(p))
    assert m.gamma1 == pytest.approx(0.316, abs=1e-6)


def test_sqh_with_python_objective():
    def objective(t):
        return -((t[0] - 1.0) ** 2 + (t[1] + 2.0) ** 2)

    config = bc.SqhConfig()
    config.epsilon0 = 1.0
    config.rho = 1.0
    result = bc.sqh_maximize(objective, [0.0, 0.0], [-5.0, -5.0], [5.0, 5.0], config)
    assert result["converged"]
    assert result["theta_hat"][0] == pytest.approx(1.0, abs=0.05)
    assert result["theta_hat"][1] == pytest.approx(-2.0, abs=0.05)
    values = [row["objective"] for row in result["trace"]]
    assert values == sorted(values)


def test_generate_fit_and_diagnostics(tmp_path):
    scenario = bc.BinaryScenario()
    data = bc.generate_binary(scenario, 42)
    assert len(data) == 200
    path = tmp_path / "data.csv"
    bc.write_csv(path, data)
    back = bc.read_csv(path)
    assert back.y == data.y

    init = bc.initial_values(data)
    fit = bc.fit(data, init["theta"])
    assert fit["log_likelihood"] >= init["log_likelihood"]
    assert math.isfinite(fit["log_likelihood"])

    times, survival = bc.kaplan_meier(data)
    assert all(a >= b for a, b in zip(survival, survival[1:]))

    resid = bc.quantile_residuals(data, scenario.true_theta(), 5, 1)
    statistic, p_value = bc.ks_normality(resid)
    assert 0.0 <= statistic <= 1.0
    assert 0.0 <= p_value <= 1.0


def test_monte_carlo_oracle_mode_is_exact():
    report = bc.monte_carlo_study(bc.BinaryScenario(), replications=3, init="oracle")
    assert report["completed"] == 3
    assert all(row["rmse"] == 0.0 for row in report["parameters"].values())


def test_bootstrap_degenerate_rows():
    data = bc.Dataset([1.5], [1], [[1.0]])
    start = bc.ParameterVector([0.905, -0.755], 0.316, 0.179, 0.5)
    out = bc.bootstrap_se(data, resamples=2, start=start)
    assert out["standard_errors"] == [0.0] * 5


def test_errors_are_python_exceptions():
    with pytest.raises(ValueError):
        bc.ParameterVector([0.0], 1.0, 1.0, 1.5)
    with pytest.raises(ValueError):
        bc.Dataset([1.0], [2], [[0.0]])
    with pytest.raises(bc.DegenerateDataError):
        bc.initial_values(bc.Dataset([1.0], [1], [[0.0]]))
