import sys
from pathlib import Path

import matplotlib.pyplot as plt

from work_fluctuations.models.hilbert import hz_to_peV
from work_fluctuations.report import load_workdists
from work_fluctuations.utils.config import load_run_config


def main() -> None:
    config_name = sys.argv[1] if len(sys.argv) > 1 else "default.yaml"
    cfg = load_run_config(config_name)
    out_dir = Path(cfg.output_dir)

    dists = load_workdists(out_dir / "workdist")
    if not dists:
        raise FileNotFoundError(f"no work distributions under {out_dir / 'workdist'}")

    directions = sorted({d for d, _ in dists})
    n_temps = max(i for _, i in dists) + 1
    fig, axes = plt.subplots(len(directions), n_temps, figsize=(4 * n_temps, 3 * len(directions)),
                             squeeze=False, sharex=True, sharey=True)

    for row, direction in enumerate(directions):
        for i in range(n_temps):
            ax = axes[row][i]
            dist = dists.get((direction, i))
            if dist is None:
                ax.set_visible(False)
                continue
            ax.stem(hz_to_peV(dist.work), dist.prob)
            ax.set_title(f"{direction}, kT = {dist.kT_peV:.1f} peV", fontsize=9)
            ax.set_xlabel("W (peV)")
            ax.grid(True, linestyle="--", alpha=0.4)
        axes[row][0].set_ylabel("P(W)")

    figures = out_dir / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    plt.tight_layout()
    plt.savefig(figures / "work_distributions.png")
    plt.close()
    print(f"[plot] Wrote {figures / 'work_distributions.png'}")


if __name__ == "__main__":
    main()
