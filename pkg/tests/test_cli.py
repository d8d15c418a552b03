import pytest

from work_fluctuations import cli
from work_fluctuations.cli import build_parser, config_from_args, main
from work_fluctuations.data.io import read_dataset, read_fit, read_inversion
from work_fluctuations.utils.errors import EXIT_IO, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION

NOISELESS = ["--sigma", "0", "--trials", "0"]


def test_full_noiseless_run(tmp_path):
    out = tmp_path / "run"
    assert main(["run", *NOISELESS, "--output-dir", str(out)]) == EXIT_OK

    for name in ("dataset.csv", "inversion.yaml", "summary.md"):
        assert (out / name).exists()
    for direction in ("forward", "backward"):
        for i in range(3):
            assert (out / "workdist" / f"{direction}_T{i}.csv").exists()

    inversion = read_inversion(out / "inversion.yaml")
    assert all(entry["converged"] for entry in inversion.values())

    for i, kT in enumerate([20.0, 12.0, 9.0]):
        fit = read_fit(out / "crooks" / f"fit_T{i}.yaml")
        assert fit["kT_peV"] == pytest.approx(kT, rel=1e-4)
        assert fit["kT_mismatch"] is False
        assert isinstance(fit["below_floor_W_peV"], list)
        assert (out / "crooks" / f"points_T{i}.csv").exists()

    summary = (out / "summary.md").read_text()
    assert "Micro-reversibility" in summary
    assert summary.count("<exp(-W/kT)>") == 6


def test_default_noisy_run(tmp_path):
    out = tmp_path / "noisy"
    assert main(["run", "--trials", "0", "--output-dir", str(out)]) == EXIT_OK

    inversion = read_inversion(out / "inversion.yaml")
    assert set(inversion) == {"forward", "backward"}
    for entry in inversion.values():
        assert entry["converged"]
        assert "not_converged" not in entry["flags"]
    assert read_dataset(out / "dataset.csv").seed == 1
    assert (out / "summary.md").exists()


def test_forward_only_run(tmp_path):
    out = tmp_path / "fwd"
    assert main(["run", *NOISELESS, "--directions", "forward", "--output-dir", str(out)]) == EXIT_OK
    assert not (out / "crooks").exists()
    summary = (out / "summary.md").read_text()
    assert "### backward\n\nabsent" in summary


def test_non_interacting_run(tmp_path):
    out = tmp_path / "j0"
    assert main(["run", *NOISELESS, "--non-interacting", "--output-dir", str(out)]) == EXIT_OK
    summary = (out / "summary.md").read_text()
    assert "Non-interacting contrast" in summary
    assert "(differs)" in summary


def test_simulate_is_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["simulate", "--sigma", "0.05", "--seed", "7", "--out", str(tmp_path / f"{name}.csv")]) == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert read_dataset(tmp_path / "a.csv").seed == 7


def test_simulate_accepts_two_temperatures(tmp_path):
    path = tmp_path / "two.csv"
    assert main(["simulate", "--temperatures", "20", "12", "--out", str(path)]) == EXIT_OK
    assert read_dataset(path).temperatures("forward") == [20.0, 12.0]


# --- exit codes ---

def test_invert_needs_three_temperatures(tmp_path, capsys):
    code = main(["invert", "--temperatures", "20", "12", "--output-dir", str(tmp_path)])
    assert code == EXIT_VALIDATION
    assert "[cli] error" in capsys.readouterr().err


def test_malformed_dataset_is_a_validation_error(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text(
        "# work-fluctuations dataset v1\n"
        "record,observable,direction,kT_peV,index,value,stderr\n"
        "observable,sigma_z_H,forward,twenty,,0.1,0.05\n"
    )
    code = main(["invert", "--dataset", str(path), "--output-dir", str(tmp_path)])
    assert code == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "line 3" in err
    assert "kT_peV" in err


def test_missing_inputs_are_io_errors(tmp_path):
    assert main(["invert", "--dataset", str(tmp_path / "nope.csv"), "--output-dir", str(tmp_path)]) == EXIT_IO
    assert main(["report", "--output-dir", str(tmp_path / "empty")]) == EXIT_IO
    assert main(["crooks", "--output-dir", str(tmp_path / "empty")]) == EXIT_IO


def test_config_file_overrides_flags():
    args = build_parser().parse_args(["simulate", "--config", "default.yaml", "--sigma", "0.3", "--seed", "5"])
    cfg = config_from_args(args, inversion=False)
    assert cfg.sigma == 0.05
    assert cfg.seed == 1

    args = build_parser().parse_args(["simulate", "--sigma", "0.3", "--j-coupling", "100"])
    cfg = config_from_args(args, inversion=False)
    assert cfg.sigma == 0.3
    assert cfg.j_coupling == 100.0


def test_non_converged_projection_is_a_numerical_error(tmp_path, monkeypatch, capsys):
    real = cli.invert_dataset

    def stuck_forward(*args, **kwargs):
        reports = real(*args, **kwargs)
        reports["forward"].converged = False
        reports["forward"].flags.append("not_converged")
        return reports

    monkeypatch.setattr(cli, "invert_dataset", stuck_forward)
    out = tmp_path / "stuck"
    assert main(["run", *NOISELESS, "--output-dir", str(out)]) == EXIT_NUMERICAL
    assert "did not converge" in capsys.readouterr().err

    # the report is kept for diagnosis, nothing downstream is built from it
    assert read_inversion(out / "inversion.yaml")["forward"]["converged"] is False
    assert not (out / "workdist").exists()

    monkeypatch.undo()
    assert main(["workdist", *NOISELESS, "--output-dir", str(out)]) == EXIT_NUMERICAL
