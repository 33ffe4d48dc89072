import numpy as np
import pytest

from macrosup.scaling import baseline_power_fit, fit_power_law, loglog_ols, parse_grid

GRID = [4, 6, 8, 10, 12]


def test_pure_power_law_exact():
    for s in (1.0, 1.5, 2.0):
        vals = [3.0 * n ** s for n in GRID]
        slope, intercept, resid = loglog_ols(GRID, vals)
        assert slope == pytest.approx(s)
        assert intercept == pytest.approx(np.log(3.0))
        assert resid < 1e-12
        assert baseline_power_fit(GRID, vals)[0] == pytest.approx(s, abs=1e-3)


def test_baseline_plus_quadratic_recovers_two():
    vals = [n + n * n / 2 for n in GRID]
    assert loglog_ols(GRID, vals)[0] < 1.8
    s, b, a = baseline_power_fit(GRID, vals)
    assert s == pytest.approx(2.0)
    assert b == pytest.approx(1.0, rel=1e-6)
    assert a == pytest.approx(0.5, rel=1e-6)


def test_sublinear_data_pins_to_one():
    vals = [n ** 0.5 for n in GRID]
    assert baseline_power_fit(GRID, vals)[0] == 1.0


def test_fit_json_fields():
    fit = fit_power_law("ghz", GRID, [n * n for n in GRID], measure="q")
    doc = fit.to_json()
    for key in ("family", "n_grid", "values", "slope", "intercept", "residual", "q_hat"):
        assert key in doc
    with pytest.raises(ValueError):
        fit_power_law("ghz", [4, 6], [1, 2])


def test_parse_grid():
    assert parse_grid("4:12:2") == [4, 6, 8, 10, 12]
    assert parse_grid("4:6") == [4, 5, 6]
    assert parse_grid("4, 8,12") == [4, 8, 12]
    with pytest.raises(ValueError):
        parse_grid("4:12:0")
