import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from work_fluctuations.data.io import read_inversion
from work_fluctuations.pipeline import build_drive, build_spectrum, oracle_matrices
from work_fluctuations.utils.config import load_run_config


def main() -> None:
    config_name = sys.argv[1] if len(sys.argv) > 1 else "default.yaml"
    cfg = load_run_config(config_name)
    out_dir = Path(cfg.output_dir)

    inversion = read_inversion(out_dir / "inversion.yaml")
    table = build_spectrum(cfg)
    oracle = oracle_matrices(table, build_drive(cfg), list(inversion))
    labels = [table.label_string(k) for k in range(table.dimension)]

    # Bars: reconstructed vs theory, one panel per direction
    fig, axes = plt.subplots(1, len(inversion), figsize=(7 * len(inversion), 4), squeeze=False)
    for ax, (direction, entry) in zip(axes[0], inversion.items()):
        reconstructed = entry["projected"].ravel()
        theory = oracle[direction].p.ravel()
        x = np.arange(len(theory))
        ax.bar(x - 0.2, reconstructed, width=0.4, label="reconstructed")
        ax.bar(x + 0.2, theory, width=0.4, label="theory", alpha=0.6)
        ticks = [f"{labels[m]}|{labels[n]}" for m in range(len(labels)) for n in range(len(labels))]
        ax.set_xticks(x)
        ax.set_xticklabels(ticks, rotation=90, fontsize=7)
        ax.set_ylabel("p(m|n)")
        ax.set_title(f"{direction} transition probabilities")
        ax.legend()
        ax.grid(True, linestyle="--", alpha=0.4)

    figures = out_dir / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    plt.tight_layout()
    plt.savefig(figures / "transition_matrices.png")
    plt.close()
    print(f"[plot] Wrote {figures / 'transition_matrices.png'}")


if __name__ == "__main__":
    main()
