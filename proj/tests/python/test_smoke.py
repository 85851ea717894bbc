import math

import pytest

import cdfi


def test_presets_and_rates():
    assert "kingman" in cdfi.presets()
    k = cdfi.RateModel.preset("kingman")
    assert k.death(4) == pytest.approx(6.0)
    assert k.absorbing_level == 1
    m = cdfi.RateModel.preset("pure-death-power", {"rho": 3})
    assert m.pure_death
    assert m.death(2) == pytest.approx(8.0)
    with pytest.raises(cdfi.ModelError):
        cdfi.RateModel.preset("no-such-preset")


def test_exact_quantities():
    k = cdfi.RateModel.preset("kingman")
    assert cdfi.hitting_mean_from_infinity(k, 10) == pytest.approx(0.2, rel=1e-9)
    t = cdfi.analysis_table(k, 1, 50)
    assert t["E_inf_T"][9] == pytest.approx(2 / 10, rel=1e-9)
    n2 = cdfi.RateModel.preset("pure-death-power", {"rho": 2})
    s = math.pi * math.sqrt(2.0)
    assert cdfi.laplace_T0(n2, 2.0) == pytest.approx(s / math.sinh(s), rel=1e-8)
    assert cdfi.limit_law_G(0.0, 0.5, 1.0) == pytest.approx(0.5)
    assert cdfi.regime(cdfi.RateModel.preset("exponential"), 1, 200)["regime"] == "II"


def test_divergent_series_raises():
    super_critical = cdfi.RateModel.preset("custom", {"birth_coef": 2, "birth_exp": 1, "death_exp": 1})
    with pytest.raises(cdfi.ConvergenceError):
        cdfi.tau_mean(super_critical, 5)


def test_simulation_matches_exact_law():
    n2 = cdfi.RateModel.preset("pure-death-power", {"rho": 2})
    tau = cdfi.simulate_tau(n2, 0, 4000, seed=3)
    mean = sum(tau) / len(tau)
    assert mean == pytest.approx(1.0, abs=4 / math.sqrt(len(tau)))
    assert cdfi.ks_statistic(tau, lambda t: 1 - math.exp(-t) if t > 0 else 0.0) < 0.03

    grid = [0.5, 1.0, 2.0]
    exact = cdfi.hypoexp_cdf(cdfi.pure_death_rates(n2, 50), grid)
    for (t, est, lo, hi), p in zip(cdfi.extinction_cdf(n2, 50, grid, 2000, seed=4), exact):
        assert lo <= p <= hi


def test_determinism_across_workers():
    m = cdfi.RateModel.preset("power")
    a = cdfi.hitting_times(m, 200, 10, 300, seed=5, workers=1)
    b = cdfi.hitting_times(m, 200, 10, 300, seed=5, workers=3)
    assert a == b


def test_survival_counts_decrease():
    harsh = cdfi.RateModel.preset("pure-death-power", {"rho": 2})
    s = cdfi.survival(harsh, 100.0, 1.0, 0.5, 20, 100, 200, seed=6)
    assert s[0] == 200
    assert all(x >= y for x, y in zip(s, s[1:]))
