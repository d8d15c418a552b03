import numpy as np
import pandas as pd
import pytest

from work_fluctuations.data.measure import (
    BUILTIN_OPERATORS,
    OBSERVABLES,
    Dataset,
    ObservableRecord,
    add_noise,
    combine_datasets,
    observable_diagonals,
    readout_observable,
    simulate_observables,
)
from work_fluctuations.models.hilbert import (
    IDENTITY2,
    SIGMA_X,
    SIGMA_Z,
    expectation,
    gibbs_populations,
    tensor,
    thermal_state,
)
from work_fluctuations.models.pulses import ProtocolAngles, build_forward
from work_fluctuations.utils.errors import ValidationError

J = 215.1


def test_means_match_trace_form(default_table):
    rng = np.random.default_rng(11)
    for _ in range(100):
        u = build_forward(ProtocolAngles.random(rng), J)
        pops = gibbs_populations(default_table, float(rng.uniform(5.0, 40.0)))
        ds = simulate_observables(u, [pops], default_table)

        rho_final = u @ thermal_state(default_table, pops) @ u.conj().T
        for row in ds.records.itertuples(index=False):
            assert row.mean == pytest.approx(expectation(BUILTIN_OPERATORS[row.observable], rho_final), abs=1e-12)


def test_observable_diagonals_in_energy_order(default_table):
    diags = observable_diagonals(default_table)
    np.testing.assert_allclose(diags["sigma_z_H"], [1, -1, 1, -1])
    np.testing.assert_allclose(diags["sigma_z_C"], [1, 1, -1, -1])
    np.testing.assert_allclose(diags["sigma_zz"], [1, -1, -1, 1])


def test_readout_observable():
    np.testing.assert_allclose(readout_observable(0, "C"), tensor(IDENTITY2, SIGMA_Z), atol=1e-12)
    np.testing.assert_allclose(readout_observable(1, "H", J), tensor(SIGMA_Z, SIGMA_Z), atol=1e-9)


def test_non_diagonal_observable_rejected(default_table):
    pops = gibbs_populations(default_table, 20.0)
    with pytest.raises(ValidationError):
        simulate_observables(np.eye(4), [pops], default_table, observables={"sx": tensor(SIGMA_X, IDENTITY2)})


def test_dataset_layout(noiseless_dataset):
    ds = noiseless_dataset
    assert ds.directions() == ["forward", "backward"]
    assert ds.temperatures("forward") == [20.0, 12.0, 9.0]
    assert len(ds.records) == 2 * 3 * len(OBSERVABLES)
    assert (ds.records["stderr"] == 0).all()
    assert ds.population("backward", 12.0).kT_peV == 12.0

    with pytest.raises(ValidationError):
        ds.population("forward", 13.0)


def test_noise_is_seeded(noiseless_dataset):
    a = add_noise(noiseless_dataset, 0.05, seed=7)
    b = add_noise(noiseless_dataset, 0.05, seed=7)
    c = add_noise(noiseless_dataset, 0.05, seed=8)
    pd.testing.assert_frame_equal(a.records, b.records)
    assert not np.allclose(a.records["mean"], c.records["mean"])
    assert (a.records["stderr"] == 0.05).all()
    assert a.seed == 7

    flat = add_noise(noiseless_dataset, 0.0, seed=7)
    np.testing.assert_array_equal(flat.records["mean"], noiseless_dataset.records["mean"])

    with pytest.raises(ValidationError):
        add_noise(noiseless_dataset, -0.1, seed=7)


def test_noise_follows_gaussian_law(noiseless_dataset):
    sigma = 0.05
    base = noiseless_dataset.records["mean"].to_numpy()
    shifts = np.array([add_noise(noiseless_dataset, sigma, seed=k).records["mean"].to_numpy() - base
                       for k in range(10_000)])
    np.testing.assert_allclose(shifts.std(axis=0, ddof=1), sigma, rtol=0.05)
    assert np.abs(shifts.mean(axis=0)).max() < 5 * sigma / 100


def test_combine_rejects_duplicates(noiseless_dataset):
    with pytest.raises(ValidationError):
        combine_datasets(noiseless_dataset, noiseless_dataset)


def test_combine_rejects_conflicting_populations(default_table):
    pops = gibbs_populations(default_table, 20.0)
    other = gibbs_populations(default_table, 20.0)
    other.probs = other.probs[::-1].copy()
    a = simulate_observables(np.eye(4), [pops], default_table)
    b = simulate_observables(np.eye(4), [other], default_table, observables={"zz": BUILTIN_OPERATORS["sigma_zz"]})
    with pytest.raises(ValidationError):
        combine_datasets(a, b)


def test_record_validation():
    ObservableRecord("sigma_z_H", "forward", 20.0, 1.1, stderr=0.05)
    with pytest.raises(ValidationError):
        ObservableRecord("sigma_z_H", "forward", 20.0, 1.2, stderr=0.05)
    with pytest.raises(ValidationError):
        ObservableRecord("sigma_z_H", "sideways", 20.0, 0.0)
    with pytest.raises(ValidationError):
        ObservableRecord("sigma_z_H", "forward", 20.0, 0.0, stderr=-1.0)


def test_dataset_requires_columns():
    with pytest.raises(ValidationError):
        Dataset(pd.DataFrame({"observable": ["sigma_z_H"]}), {})


def test_iter_records(noiseless_dataset):
    records = list(noiseless_dataset.iter_records())
    assert len(records) == len(noiseless_dataset.records)
    assert all(isinstance(r, ObservableRecord) for r in records)
