# src/work_fluctuations/cli.py

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from work_fluctuations.data.io import (
    read_dataset,
    read_inversion,
    read_uncertainty,
    read_workdist,
    write_dataset,
    write_fit,
    write_inversion,
    write_table,
    write_uncertainty,
    write_workdist,
)
from work_fluctuations.models.hilbert import hz_to_peV
from work_fluctuations.models.tpm import TransitionMatrix
from work_fluctuations.pipeline import (
    build_spectrum,
    crooks_for,
    invert_dataset,
    kT_mismatch,
    simulate_dataset,
    temperature_pairs,
    work_distributions,
)
from work_fluctuations.report import load_workdists, write_summary
from work_fluctuations.stats.fluctuation import fit_fluctuation, fit_plot_frame, ratio_points
from work_fluctuations.stats.propagation import ln_ratio_sigmas, propagate_errors
from work_fluctuations.utils.config import RunConfig, load_run_config
from work_fluctuations.utils.errors import EXIT_IO, EXIT_OK, ConvergenceError, WorkStatsError

# (flag dest, nested config path)
FLAG_PATHS = [
    ("dnu_h", ("hamiltonian", "dnu_h")),
    ("dnu_c", ("hamiltonian", "dnu_c")),
    ("j_coupling", ("hamiltonian", "j_coupling")),
    ("steps_file", ("protocol", "steps_file")),
    ("temperatures", ("temperatures_peV",)),
    ("backward_temperatures", ("backward_temperatures_peV",)),
    ("sigma", ("noise", "sigma")),
    ("seed", ("seed",)),
    ("trials", ("propagation", "trials")),
    ("confidence", ("propagation", "confidence")),
    ("ratio_floor", ("propagation", "ratio_floor")),
    ("n_jobs", ("propagation", "n_jobs")),
    ("mle_tol", ("mle", "tol")),
    ("mle_max_iter", ("mle", "max_iter")),
    ("directions", ("directions",)),
    ("energy_scale", ("energy_scale_peV",)),
    ("output_dir", ("output_dir",)),
]


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run configuration (a --config file overrides these)")
    g.add_argument("--config", default=None, help="YAML config, a path or a name under configs/")
    g.add_argument("--dnu-h", dest="dnu_h", type=float, default=None, help="H frequency offset (Hz)")
    g.add_argument("--dnu-c", dest="dnu_c", type=float, default=None, help="C frequency offset (Hz)")
    g.add_argument("--j-coupling", dest="j_coupling", type=float, default=None, help="scalar coupling J (Hz)")
    g.add_argument("--steps-file", dest="steps_file", default=None, help="CSV pulse-step file")
    g.add_argument("--temperatures", type=float, nargs="+", default=None, help="preparation kT values (peV)")
    g.add_argument("--backward-temperatures", dest="backward_temperatures", type=float, nargs="+", default=None)
    g.add_argument("--sigma", type=float, default=None, help="Gaussian noise on observable means")
    g.add_argument("--seed", type=int, default=None, help="master seed")
    g.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (0 disables propagation)")
    g.add_argument("--confidence", type=float, default=None, help="prediction-interval confidence")
    g.add_argument("--ratio-floor", dest="ratio_floor", type=float, default=None)
    g.add_argument("--n-jobs", dest="n_jobs", type=int, default=None)
    g.add_argument("--mle-tol", dest="mle_tol", type=float, default=None)
    g.add_argument("--mle-max-iter", dest="mle_max_iter", type=int, default=None)
    g.add_argument("--directions", nargs="+", choices=["forward", "backward"], default=None)
    g.add_argument("--non-interacting", dest="non_interacting", action="store_true",
                   help="set J = 0 during free evolution (pulse timing unchanged)")
    g.add_argument("--energy-scale", dest="energy_scale", type=float, default=None,
                   help="rescale energies so that E2 - E0 equals this many peV")
    g.add_argument("--output-dir", dest="output_dir", default=None)


def flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Nested config dict holding only the flags that were given.
    """
    cfg: Dict[str, Any] = {}
    for dest, path in FLAG_PATHS:
        value = getattr(args, dest, None)
        if value is None:
            continue
        node = cfg
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    if getattr(args, "non_interacting", False):
        cfg["interacting"] = False
    return cfg


def config_from_args(args: argparse.Namespace, inversion: bool = True) -> RunConfig:
    overrides = flag_overrides(args)
    if args.config:
        return load_run_config(args.config, overrides, inversion=inversion)
    return RunConfig.from_dict(overrides, inversion=inversion)


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    out = Path(args.out) if getattr(args, "out", None) else _out_dir(cfg) / "dataset.csv"
    write_dataset(simulate_dataset(cfg), out)
    return EXIT_OK


def cmd_invert(cfg: RunConfig, args: argparse.Namespace) -> int:
    out_dir = _out_dir(cfg)
    dataset = Path(getattr(args, "dataset", None) or out_dir / "dataset.csv")
    out = Path(getattr(args, "out", None) or out_dir / "inversion.yaml")

    ds = read_dataset(dataset)
    table = build_spectrum(cfg)
    reports = invert_dataset(ds, table, cfg)
    write_inversion(reports, table, out)

    stuck = [d for d, r in reports.items() if not r.converged]
    if stuck:
        raise ConvergenceError(
            f"MLE projection did not converge for {stuck} within {cfg.mle_max_iter} iterations; "
            f"diagnostics written to {out}"
        )
    return EXIT_OK


def cmd_workdist(cfg: RunConfig, args: argparse.Namespace) -> int:
    out_dir = _out_dir(cfg)
    dataset = Path(getattr(args, "dataset", None) or out_dir / "dataset.csv")
    inversion = Path(getattr(args, "inversion", None) or out_dir / "inversion.yaml")

    ds = read_dataset(dataset)
    entries = read_inversion(inversion)
    stuck = [d for d, e in entries.items() if not e.get("converged", True)]
    if stuck:
        raise ConvergenceError(f"{inversion} holds non-converged projections for {stuck}")
    matrices = {d: TransitionMatrix(e["projected"], direction=d, provenance="reconstructed")
                for d, e in entries.items()}
    dists = work_distributions(matrices, ds, build_spectrum(cfg))
    for (direction, i), dist in sorted(dists.items()):
        write_workdist(dist, out_dir / "workdist" / f"{direction}_T{i}.csv")
    return EXIT_OK


def cmd_crooks(cfg: RunConfig, args: argparse.Namespace) -> int:
    out_dir = _out_dir(cfg)
    workdist_dir = Path(getattr(args, "workdist_dir", None) or out_dir / "workdist")
    dists = load_workdists(workdist_dir)
    pairs = temperature_pairs(dists)
    if not pairs:
        raise FileNotFoundError(f"no forward/backward distribution pairs found in {workdist_dir}")

    uncertainty = None
    uncertainty_path = Path(getattr(args, "uncertainty", None) or out_dir / "uncertainty.csv")
    if getattr(args, "propagate", False) and cfg.trials >= 2 and cfg.sigma > 0:
        uncertainty = propagate_errors(cfg)
        write_uncertainty(uncertainty, uncertainty_path, {"trials": cfg.trials, "sigma": cfg.sigma, "seed": cfg.seed})
    elif uncertainty_path.exists():
        uncertainty = read_uncertainty(uncertainty_path)

    for i in pairs:
        crooks = crooks_for(dists, i, cfg.ratio_floor)
        if crooks.unpaired:
            print(f"[crooks] T{i}: {len(crooks.unpaired)} W values without a backward partner")
        if crooks.below_floor:
            print(f"[crooks] T{i}: {len(crooks.below_floor)} W values below the ratio floor {cfg.ratio_floor:g}")
        points = ratio_points(crooks, None if uncertainty is None else ln_ratio_sigmas(uncertainty, i))
        fit = fit_fluctuation(points, confidence=cfg.confidence)

        forward, backward = dists[("forward", i)], dists[("backward", i)]
        meta = {
            "kT_forward_peV": float(forward.kT_peV),
            "kT_backward_peV": float(backward.kT_peV),
            "kT_mismatch": bool(kT_mismatch(forward, backward)),
            "unpaired_W_peV": [float(hz_to_peV(w)) for w in crooks.unpaired],
            "below_floor_W_peV": [float(hz_to_peV(w)) for w in crooks.below_floor],
        }
        write_fit(fit, i, out_dir / "crooks" / f"fit_T{i}.yaml", meta)
        write_table(fit_plot_frame(fit, points), out_dir / "crooks" / f"points_T{i}.csv", "crooks")
        print(f"[crooks] T{i}: kT = {fit.kT_peV:.3f} +/- {fit.kT_stderr:.3f} peV "
              f"(prepared {forward.kT_peV:.3f}), {len(fit.excluded)} excluded")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args: argparse.Namespace) -> int:
    out_dir = Path(cfg.output_dir)
    uncertainty_path = out_dir / "uncertainty.csv"
    uncertainty = read_uncertainty(uncertainty_path) if uncertainty_path.exists() else None
    write_summary(cfg, out_dir, uncertainty)
    return EXIT_OK


def cmd_run(cfg: RunConfig, args: argparse.Namespace) -> int:
    """
    simulate -> invert -> workdist -> crooks -> report in one output directory.
    """
    args.propagate = True
    for step in (cmd_simulate, cmd_invert, cmd_workdist):
        step(cfg, args)
    if {"forward", "backward"} <= set(cfg.directions):
        cmd_crooks(cfg, args)
    else:
        print("[cli] single direction configured; skipping the fluctuation-relation fit")
    return cmd_report(cfg, args)


COMMANDS = {
    "simulate": (cmd_simulate, False),
    "invert": (cmd_invert, True),
    "workdist": (cmd_workdist, True),
    "crooks": (cmd_crooks, True),
    "report": (cmd_report, False),
    "run": (cmd_run, True),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="work-fluct",
        description="Work statistics of a driven two-spin system from observable means",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated observable dataset")
    p.add_argument("--out", default=None, help="dataset CSV (default <output-dir>/dataset.csv)")
    _add_run_flags(p)

    p = sub.add_parser("invert", help="reconstruct transition matrices from a dataset")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", default=None, help="report YAML (default <output-dir>/inversion.yaml)")
    _add_run_flags(p)

    p = sub.add_parser("workdist", help="work distributions from an inversion report")
    p.add_argument("--dataset", default=None, help="dataset holding the preparation populations")
    p.add_argument("--inversion", default=None)
    _add_run_flags(p)

    p = sub.add_parser("crooks", help="fluctuation-relation fit per temperature")
    p.add_argument("--workdist-dir", dest="workdist_dir", default=None)
    p.add_argument("--uncertainty", default=None, help="Monte Carlo uncertainty CSV to weight the fit")
    p.add_argument("--propagate", action="store_true", help="run the Monte Carlo propagation first")
    _add_run_flags(p)

    p = sub.add_parser("report", help="write summary.md for an output directory")
    _add_run_flags(p)

    p = sub.add_parser("run", help="full pipeline into one output directory")
    _add_run_flags(p)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    command, needs_inversion = COMMANDS[args.command]
    try:
        cfg = config_from_args(args, inversion=needs_inversion)
        print(f"[cli] {args.command}: output dir {cfg.output_dir}, seed {cfg.seed}")
        return command(cfg, args)
    except WorkStatsError as exc:
        print(f"[cli] error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"[cli] error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
