import numpy as np
import pandas as pd
import pytest
import yaml

from work_fluctuations.data.io import (
    read_dataset,
    read_fit,
    read_inversion,
    read_table,
    read_uncertainty,
    read_workdist,
    write_dataset,
    write_fit,
    write_inversion,
    write_uncertainty,
    write_workdist,
)
from work_fluctuations.pipeline import invert_dataset, oracle_matrices, work_distributions
from work_fluctuations.stats.fluctuation import RatioPoint, fit_fluctuation
from work_fluctuations.utils.errors import DatasetFormatError

HEADER = "# work-fluctuations dataset v1\n# provenance=measured\nrecord,observable,direction,kT_peV,index,value,stderr\n"


def _population_rows(direction, kT, probs):
    return "".join(f"population,,{direction},{kT},{k},{p},\n" for k, p in enumerate(probs))


def test_dataset_round_trip(tmp_path, noiseless_dataset):
    noiseless_dataset.seed = 42
    path = write_dataset(noiseless_dataset, tmp_path / "dataset.csv")
    loaded = read_dataset(path)

    pd.testing.assert_frame_equal(loaded.records, noiseless_dataset.records)
    assert loaded.seed == 42
    assert loaded.provenance == "simulated"
    for key, pops in noiseless_dataset.populations.items():
        np.testing.assert_array_equal(loaded.populations[key].probs, pops.probs)


def test_measured_dataset_is_normalized(tmp_path):
    path = tmp_path / "measured.csv"
    path.write_text(
        HEADER
        + "observable,sigma_z_H,forward,20,,0.15,0.01\n"
        + _population_rows("forward", 20, [0.5, 0.3, 0.15, 0.0503])
    )
    ds = read_dataset(path)
    assert ds.provenance == "measured"
    assert ds.seed is None
    assert ds.population("forward", 20.0).probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert ds.records["stderr"].iloc[0] == 0.01


@pytest.mark.parametrize("row, field", [
    ("observable,sigma_z_H,forward,20,,abc,0.01\n", "value"),
    ("observable,sigma_z_H,sideways,20,,0.1,0.01\n", "direction"),
    ("observable,sigma_z_H,forward,-3,,0.1,0.01\n", "kT_peV"),
    ("observable,sigma_z_H,forward,20,,1.5,0.01\n", "value"),
    ("observable,,forward,20,,0.1,0.01\n", "observable"),
    ("population,,forward,20,x,0.1,\n", "index"),
    ("spin,sigma_z_H,forward,20,,0.1,0.01\n", "record"),
])
def test_malformed_record_names_line_and_field(tmp_path, row, field):
    path = tmp_path / "bad.csv"
    path.write_text(
        HEADER
        + "observable,sigma_zz,forward,20,,0.2,0.01\n"
        + row
        + _population_rows("forward", 20, [0.4, 0.3, 0.2, 0.1])
    )
    with pytest.raises(DatasetFormatError) as exc:
        read_dataset(path)
    assert exc.value.line == 5
    assert exc.value.field == field


def test_bad_header_and_missing_populations(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# something else v1\nrecord,observable\n")
    with pytest.raises(DatasetFormatError) as exc:
        read_dataset(path)
    assert exc.value.line == 1

    path.write_text(HEADER + "observable,sigma_z_H,forward,12,,0.1,0.01\n")
    with pytest.raises(DatasetFormatError) as exc:
        read_dataset(path)
    assert exc.value.line == 4

    with pytest.raises(FileNotFoundError):
        read_dataset(tmp_path / "missing.csv")


def test_table_metadata(tmp_path):
    frame = pd.DataFrame({"a": [1, 2]})
    path = tmp_path / "t.csv"
    write_uncertainty(frame, path, {"trials": 5, "sigma": 0.05})
    raw, meta, n_comments = read_table(path, "uncertainty")
    assert meta == {"trials": "5", "sigma": "0.05"}
    assert n_comments == 3
    assert raw["a"].tolist() == ["1", "2"]


def test_uncertainty_columns_are_typed(tmp_path):
    frame = pd.DataFrame({
        "quantity": ["ln_ratio", "kT_fit"],
        "direction": ["pair", "pair"],
        "temperature": [0, 0],
        "key": ["1.000000", "kT"],
        "W_peV": [1.0, np.nan],
        "mean": [0.05, 20.1],
        "std": [0.01, 0.4],
        "count": [100, 98],
    })
    loaded = read_uncertainty(write_uncertainty(frame, tmp_path / "u.csv"))
    assert loaded["count"].tolist() == [100, 98]
    assert np.isnan(loaded["W_peV"].iloc[1])
    assert loaded["mean"].iloc[1] == pytest.approx(20.1)


# --- YAML reports ---

def test_inversion_report_file(tmp_path, noiseless_cfg, default_table, noiseless_dataset):
    reports = invert_dataset(noiseless_dataset, default_table, noiseless_cfg, verbose=False)
    path = write_inversion(reports, default_table, tmp_path / "inversion.yaml")
    loaded = read_inversion(path)

    assert set(loaded) == {"forward", "backward"}
    for direction, report in reports.items():
        np.testing.assert_allclose(loaded[direction]["projected"], report.projected.p, rtol=0, atol=0)
        assert loaded[direction]["rank"] == 9
        assert loaded[direction]["converged"] is True
        assert loaded[direction]["raw_solution"].shape == (9,)

    doc = yaml.safe_load(path.read_text())
    assert doc["spectrum"]["labels"] == ["↑↑", "↓↑", "↑↓", "↓↓"]

    doc["version"] = 2
    path.write_text(yaml.safe_dump(doc))
    with pytest.raises(DatasetFormatError):
        read_inversion(path)


def test_fit_file(tmp_path):
    fit = fit_fluctuation([RatioPoint(W=w, ln_ratio=w / 12.0) for w in (-10.0, -5.0, 0.0, 5.0, 10.0)])
    path = write_fit(fit, 1, tmp_path / "fit_T1.yaml", {"kT_mismatch": False})
    doc = read_fit(path)
    assert doc["temperature"] == 1
    assert doc["kT_peV"] == pytest.approx(12.0)
    assert doc["excluded_W_peV"] == []
    assert doc["kT_mismatch"] is False

    with pytest.raises(DatasetFormatError):
        read_inversion(path)


def test_workdist_file(tmp_path, default_table, default_drive, noiseless_dataset):
    matrices = oracle_matrices(default_table, default_drive, ["backward"])
    dist = work_distributions(matrices, noiseless_dataset, default_table)[("backward", 2)]
    loaded = read_workdist(write_workdist(dist, tmp_path / "backward_T2.csv"))

    np.testing.assert_array_equal(loaded.work, dist.work)
    np.testing.assert_array_equal(loaded.prob, dist.prob)
    assert loaded.direction == "backward"
    assert loaded.kT_peV == 9.0
    assert loaded.kT_hz == pytest.approx(dist.kT_hz, rel=1e-14)
