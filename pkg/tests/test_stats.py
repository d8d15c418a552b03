import numpy as np
import pandas as pd
import pytest

from work_fluctuations.models.hilbert import PopulationVector, gibbs_populations, peV_to_hz
from work_fluctuations.models.tpm import CrooksPoints
from work_fluctuations.pipeline import crooks_for, oracle_matrices, work_distributions
from work_fluctuations.stats import propagation
from work_fluctuations.stats.fluctuation import (
    RatioPoint,
    fit_fluctuation,
    fit_plot_frame,
    ratio_points,
    w_key,
)
from work_fluctuations.stats.propagation import (
    UNCERTAINTY_COLUMNS,
    _chunks,
    failure_rate,
    ln_ratio_sigmas,
    propagate_errors,
)
from work_fluctuations.stats.temperature import kT_from_populations
from work_fluctuations.utils.errors import ConvergenceError, FitDegenerateError, ValidationError


def _line(w, kT=20.0, sigma=0.0):
    return [RatioPoint(W=float(x), ln_ratio=float(x) / kT, sigma=sigma) for x in w]


# --- fluctuation-relation fit ---

def test_exact_line_ols():
    fit = fit_fluctuation(_line(np.linspace(-25, 25, 9)))
    assert not fit.weighted
    assert fit.slope == pytest.approx(0.05, rel=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)
    assert fit.kT_peV == pytest.approx(20.0, rel=1e-10)
    assert fit.excluded == []
    assert fit.n_used == 9


def test_outlier_is_excluded_then_refit():
    w = np.linspace(-30, 30, 13)
    points = _line(w, sigma=0.1)
    points[6] = RatioPoint(W=points[6].W, ln_ratio=points[6].ln_ratio + 0.6, sigma=0.1)

    fit = fit_fluctuation(points, confidence=0.99)
    assert fit.weighted
    assert fit.excluded == [0.0]
    assert fit.n_used == 12
    assert fit.kT_peV == pytest.approx(20.0, rel=1e-9)
    assert fit.kT_stderr > 0
    assert fit.upper[6] - fit.lower[6] > 0
    assert fit.residuals[6] == pytest.approx(0.6, abs=1e-9)


def test_noisy_weighted_fit_recovers_temperature():
    rng = np.random.default_rng(1)
    w = np.linspace(-20, 20, 11)
    points = [RatioPoint(W=x, ln_ratio=x / 12.0 + rng.normal(0, 0.02), sigma=0.02) for x in w]
    fit = fit_fluctuation(points)
    assert abs(fit.kT_peV - 12.0) < 4 * fit.kT_stderr


def test_fit_degenerate_cases():
    with pytest.raises(FitDegenerateError):
        fit_fluctuation(_line([1.0, 2.0]))
    with pytest.raises(FitDegenerateError):
        fit_fluctuation([RatioPoint(W=1.0, ln_ratio=v) for v in (0.1, 0.2, 0.3)])
    with pytest.raises(ValidationError):
        fit_fluctuation(_line([1.0, 2.0, 3.0]), confidence=1.0)
    with pytest.raises(ValidationError):
        RatioPoint(W=float("nan"), ln_ratio=0.0)


def test_non_positive_slope_has_no_temperature():
    points = [RatioPoint(W=x, ln_ratio=-x / 10.0) for x in (-5.0, 0.0, 5.0, 10.0)]
    fit = fit_fluctuation(points)
    assert fit.slope < 0
    assert np.isnan(fit.kT_peV)


def test_ratio_points_convert_units():
    work_hz = peV_to_hz(np.array([-10.0, 0.0, 10.0]))
    crooks = CrooksPoints(work=work_hz, p_forward=np.ones(3), p_backward=np.ones(3),
                          ln_ratio=np.array([-0.5, 0.0, 0.5]))
    points = ratio_points(crooks, {w_key(10.0): 0.2})
    assert [p.W for p in points] == pytest.approx([-10.0, 0.0, 10.0])
    assert [p.sigma for p in points] == [0.0, 0.0, 0.2]


def test_fit_plot_frame():
    w = np.linspace(-30, 30, 13)
    points = _line(w, sigma=0.1)
    points[0] = RatioPoint(W=points[0].W, ln_ratio=points[0].ln_ratio - 0.8, sigma=0.1)
    fit = fit_fluctuation(points)

    frame = fit_plot_frame(fit, points)
    assert list(frame.columns) == ["W_peV", "ln_ratio", "sigma", "fitted", "lower", "upper", "excluded"]
    assert frame["excluded"].tolist() == [w_key(x) in {w_key(v) for v in fit.excluded} for x in w]
    assert frame["excluded"].iloc[0]
    assert (frame["lower"] <= frame["upper"]).all()


# --- temperature from populations ---

@pytest.mark.parametrize("kT", [1.0, 9.0, 12.0, 20.0, 100.0])
def test_kT_round_trip(default_table, kT):
    est = kT_from_populations(gibbs_populations(default_table, kT), default_table)
    assert est.is_finite
    assert est.kT_peV == pytest.approx(kT, rel=1e-9)


def test_kT_special_cases(default_table):
    assert kT_from_populations(gibbs_populations(default_table, np.inf), default_table).status == "infinite"

    inverted = PopulationVector(gibbs_populations(default_table, 12.0).probs[::-1].copy())
    est = kT_from_populations(inverted, default_table)
    assert est.status == "negative"
    assert est.kT_peV < 0

    with pytest.raises(ValidationError):
        kT_from_populations(PopulationVector(np.array([0.5, 0.5, 0.0, 0.0])), default_table)


# --- Monte Carlo propagation ---

def test_noise_free_propagation_has_zero_spread(noiseless_cfg):
    table = propagate_errors(noiseless_cfg, sigma=0.0, trials=3)
    assert list(table.columns) == UNCERTAINTY_COLUMNS
    assert set(table["quantity"]) >= {"p", "P_W", "ln_ratio"}
    assert (table["count"] == 3).all()
    assert (table["std"] <= 1e-12).all()
    assert failure_rate(table) == 0.0

    p = table[(table["quantity"] == "p") & (table["direction"] == "forward")]
    assert len(p) == 16

    kT = table[table["quantity"] == "kT_fit"].set_index("temperature")["mean"]
    for i, expected in enumerate(noiseless_cfg.temperatures_peV):
        if i in kT.index:
            assert kT[i] == pytest.approx(expected, rel=1e-4)


def test_failed_trials_are_counted(noiseless_cfg, monkeypatch):
    real = propagation._trial_rows

    def every_other(trial, *args):
        if trial % 2:
            raise ConvergenceError("projection did not converge")
        return real(trial, *args)

    monkeypatch.setattr(propagation, "_trial_rows", every_other)
    table = propagate_errors(noiseless_cfg, sigma=0.0, trials=4)

    failed = table[table["quantity"] == "failed"]
    assert failed["count"].tolist() == [4]
    assert failure_rate(table) == pytest.approx(0.5)
    assert (table[table["quantity"] == "p"]["count"] == 2).all()


def test_propagation_is_deterministic(noiseless_cfg):
    a = propagate_errors(noiseless_cfg, sigma=0.01, trials=4, master_seed=9)
    b = propagate_errors(noiseless_cfg, sigma=0.01, trials=4, master_seed=9)
    pd.testing.assert_frame_equal(a, b)


def test_propagation_needs_two_trials(noiseless_cfg):
    with pytest.raises(ValidationError):
        propagate_errors(noiseless_cfg, sigma=0.01, trials=1)
    with pytest.raises(ValidationError):
        propagate_errors(noiseless_cfg, sigma=-0.01, trials=3)


def test_ln_ratio_sigmas():
    frame = pd.DataFrame({
        "quantity": ["ln_ratio", "ln_ratio", "kT_fit"],
        "direction": ["pair"] * 3,
        "temperature": [0, 1, 0],
        "key": ["1.000000", "1.000000", "kT"],
        "W_peV": [1.0, 1.0, np.nan],
        "mean": [0.1, 0.2, 20.0],
        "std": [0.01, 0.02, 1.0],
        "count": [10, 10, 10],
    })
    assert ln_ratio_sigmas(frame, 1) == {1.0: 0.02}


def test_trial_chunks():
    assert _chunks(5, 2) == [[0, 2, 4], [1, 3]]
    assert _chunks(1, 3) == [[0]]


def test_oracle_ratio_points_fit_exactly(default_table, default_drive, noiseless_dataset):
    dists = work_distributions(oracle_matrices(default_table, default_drive, ["forward", "backward"]),
                               noiseless_dataset, default_table)
    for i, kT in enumerate([20.0, 12.0, 9.0]):
        fit = fit_fluctuation(ratio_points(crooks_for(dists, i, 1e-6)))
        assert fit.excluded == []
        assert fit.kT_peV == pytest.approx(kT, rel=1e-6)
