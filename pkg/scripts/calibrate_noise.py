import sys

import numpy as np
import pandas as pd

from work_fluctuations.inversion.system import build_system, system_diagnostics
from work_fluctuations.pipeline import build_drive, build_spectrum, oracle_matrices, theory_dataset
from work_fluctuations.stats.propagation import run_trials
from work_fluctuations.utils.config import load_run_config


def main() -> None:
    # Monte Carlo calibration of the noisy tolerances (matrix error, micro-reversibility, fitted kT)
    config_name = sys.argv[1] if len(sys.argv) > 1 else "default.yaml"
    trials = int(sys.argv[2]) if len(sys.argv) > 2 else None
    cfg = load_run_config(config_name)
    trials = cfg.trials if trials is None else trials

    table = build_spectrum(cfg)
    drive = build_drive(cfg)
    theory = theory_dataset(cfg, table, drive)
    oracle = oracle_matrices(table, drive, cfg.directions)

    for direction in cfg.directions:
        diag = system_diagnostics(build_system(theory, table, direction))
        print(f"[calibrate] {direction} system: rank {diag['rank']:.0f}, "
              f"condition number {diag['condition_number']:.3e}")

    frame = run_trials(cfg, trials, n_jobs=cfg.n_jobs)
    failed = frame[frame["quantity"] == "failed"]
    n_done = int((failed["value"] == 0).sum())
    print(f"[calibrate] {n_done} of {trials} trials completed at sigma {cfg.sigma}")

    # Max-entry distance between reconstructed and oracle matrices, per trial
    p = frame[frame["quantity"] == "p"].copy()
    m_idx = p["key"].str.split("|").str[0].astype(int) - 1
    n_idx = p["key"].str.split("|").str[1].astype(int) - 1
    p["m"], p["n"] = m_idx, n_idx
    p["oracle"] = [oracle[d].p[m, n] for d, m, n in zip(p["direction"], p["m"], p["n"])]
    p["error"] = (p["value"] - p["oracle"]).abs()
    errors = p.groupby(["direction", "trial"])["error"].max().groupby("direction")
    print("\n[calibrate] max |p - p_oracle| per trial")
    print(errors.describe(percentiles=[0.5, 0.9, 0.95, 0.99]).to_string())

    if {"forward", "backward"} <= set(cfg.directions):
        fwd = p[p["direction"] == "forward"].set_index(["trial", "m", "n"])["value"]
        # backward p(n|m) lines up with forward p(m|n)
        bwd = p[p["direction"] == "backward"].rename(columns={"m": "n", "n": "m"}).set_index(["trial", "m", "n"])["value"]
        gap = (fwd - bwd).abs().groupby(level=0).max()
        print("\n[calibrate] micro-reversibility gap per trial")
        print(gap.describe(percentiles=[0.5, 0.9, 0.95, 0.99]).to_string())

    kT = frame[frame["quantity"] == "kT_fit"]
    rows = []
    for i, prepared in enumerate(cfg.temperatures_peV):
        values = kT[kT["temperature"] == i]["value"].dropna()
        median = float(np.median(values)) if len(values) else float("nan")
        rows.append({
            "T": f"T{i}",
            "prepared_peV": prepared,
            "fits": len(values),
            "median_kT_peV": median,
            "relative_error": abs(median - prepared) / prepared,
            "p16": float(np.percentile(values, 16)) if len(values) else float("nan"),
            "p84": float(np.percentile(values, 84)) if len(values) else float("nan"),
        })
    print("\n[calibrate] fitted kT")
    print(pd.DataFrame(rows).set_index("T").to_string(float_format=lambda v: f"{v:.3f}"))


if __name__ == "__main__":
    main()
