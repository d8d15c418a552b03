import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

from work_fluctuations.data.io import read_table
from work_fluctuations.utils.config import load_run_config

NUMERIC = ["W_peV", "ln_ratio", "sigma", "fitted", "lower", "upper"]


def main() -> None:
    config_name = sys.argv[1] if len(sys.argv) > 1 else "default.yaml"
    cfg = load_run_config(config_name)
    out_dir = Path(cfg.output_dir)

    paths = sorted((out_dir / "crooks").glob("points_T*.csv"))
    if not paths:
        raise FileNotFoundError(f"no ratio points under {out_dir / 'crooks'}")

    fig, ax = plt.subplots(1, 1, figsize=(8, 5))
    for path in paths:
        frame, _, _ = read_table(path, "crooks")
        frame[NUMERIC] = frame[NUMERIC].apply(pd.to_numeric)
        frame["excluded"] = frame["excluded"] == "True"
        frame = frame.sort_values("W_peV")

        kept = frame[~frame["excluded"]]
        dropped = frame[frame["excluded"]]
        line = ax.errorbar(kept["W_peV"], kept["ln_ratio"], yerr=kept["sigma"], fmt="o", label=path.stem)
        color = line[0].get_color()
        ax.plot(frame["W_peV"], frame["fitted"], color=color)
        ax.fill_between(frame["W_peV"], frame["lower"], frame["upper"], color=color, alpha=0.15)
        if not dropped.empty:
            ax.plot(dropped["W_peV"], dropped["ln_ratio"], "x", color=color)

    ax.set_xlabel("W (peV)")
    ax.set_ylabel("ln[P_F(W) / P_B(-W)]")
    ax.legend()
    ax.grid(True, linestyle="--", alpha=0.4)

    figures = out_dir / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    plt.tight_layout()
    plt.savefig(figures / "fluctuation_relation.png")
    plt.close()
    print(f"[plot] Wrote {figures / 'fluctuation_relation.png'}")


if __name__ == "__main__":
    main()
