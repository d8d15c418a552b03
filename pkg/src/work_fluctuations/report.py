# src/work_fluctuations/report.py

import re
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from work_fluctuations.data.io import read_dataset, read_fit, read_inversion, read_workdist
from work_fluctuations.data.measure import Dataset
from work_fluctuations.models.hilbert import SpectrumTable, hz_to_peV
from work_fluctuations.models.tpm import (
    TransitionMatrix,
    WorkDistribution,
    jarzynski_functional,
    mean_work,
    micro_reversibility_gap,
)
from work_fluctuations.pipeline import (
    build_drive,
    build_spectrum,
    oracle_matrices,
    theory_dataset,
    work_distributions,
)
from work_fluctuations.stats.fluctuation import w_key
from work_fluctuations.stats.propagation import failure_rate
from work_fluctuations.stats.temperature import kT_from_populations
from work_fluctuations.utils.config import DIRECTIONS, RunConfig

SOFT_CHECK_TOL = 0.05
WORKDIST_PATTERN = re.compile(r"^(forward|backward)_T(\d+)\.csv$")
FIT_PATTERN = re.compile(r"^fit_T(\d+)\.yaml$")


def _block(frame: pd.DataFrame, float_format: str = "{:.4f}") -> str:
    text = frame.to_string(float_format=lambda v: float_format.format(v))
    return f"```\n{text}\n```"


def _matrix_frame(p: np.ndarray, spec: SpectrumTable) -> pd.DataFrame:
    labels = [spec.label_string(k) for k in range(spec.dimension)]
    return pd.DataFrame(p, index=labels, columns=labels)


def load_workdists(directory: Path) -> Dict[Tuple[str, int], WorkDistribution]:
    out = {}
    if not directory.exists():
        return out
    for path in sorted(directory.iterdir()):
        match = WORKDIST_PATTERN.match(path.name)
        if match:
            out[(match.group(1), int(match.group(2)))] = read_workdist(path)
    return out


def load_fits(directory: Path) -> Dict[int, dict]:
    out = {}
    if not directory.exists():
        return out
    for path in sorted(directory.iterdir()):
        match = FIT_PATTERN.match(path.name)
        if match:
            out[int(match.group(1))] = read_fit(path)
    return out


def spectrum_section(spec: SpectrumTable) -> List[str]:
    frame = pd.DataFrame({
        "level": range(spec.dimension),
        "spins (H, C)": [spec.label_string(k) for k in range(spec.dimension)],
        "energy_hz": spec.energies,
        "energy_peV": hz_to_peV(spec.energies),
    }).set_index("level")
    return ["## Spectrum", "", _block(frame, "{:.3f}"), ""]


def matrices_section(
    spec: SpectrumTable,
    oracle: Dict[str, TransitionMatrix],
    inversion: Dict[str, dict],
) -> List[str]:
    lines = ["## Transition matrices", "", "Rows: final level m, columns: initial level n.", ""]
    for direction in DIRECTIONS:
        if direction not in inversion:
            lines += [f"### {direction}", "", "absent", ""]
            continue
        entry = inversion[direction]
        reconstructed = entry["projected"]
        error = float(np.abs(reconstructed - oracle[direction].p).max())
        cond = entry.get("condition_number")
        cond_text = "n/a" if cond is None else f"{cond:.3e}"
        lines += [
            f"### {direction}",
            "",
            "oracle:",
            _block(_matrix_frame(oracle[direction].p, spec)),
            "reconstructed:",
            _block(_matrix_frame(reconstructed, spec)),
            "",
            f"- max |reconstructed - oracle| = {error:.3e}",
            f"- MLE iterations {entry.get('iterations')}, converged {entry.get('converged')}, "
            f"least-squares rank {entry.get('rank')}, condition number {cond_text}",
            f"- flags: {', '.join(entry.get('flags') or []) or 'none'}",
            "",
        ]

    if all(d in inversion for d in DIRECTIONS):
        fwd = TransitionMatrix(inversion["forward"]["projected"], "forward", "reconstructed")
        bwd = TransitionMatrix(inversion["backward"]["projected"], "backward", "reconstructed")
        lines += [
            "### Micro-reversibility",
            "",
            f"- reconstructed max |p^F(m|n) - p^B(n|m)| = {micro_reversibility_gap(fwd, bwd):.3e}",
            f"- oracle max |p^F(m|n) - p^B(n|m)| = "
            f"{micro_reversibility_gap(oracle['forward'], oracle['backward']):.3e}",
            "",
        ]
    else:
        lines += ["### Micro-reversibility", "", "absent (needs both directions)", ""]
    return lines


def distributions_section(dists: Dict[Tuple[str, int], WorkDistribution]) -> List[str]:
    lines = ["## Work distributions", ""]
    if not dists:
        return lines + ["absent", ""]

    for direction in DIRECTIONS:
        keys = sorted(i for d, i in dists if d == direction)
        if not keys:
            lines += [f"### {direction}", "", "absent", ""]
            continue
        lines += [f"### {direction}", ""]
        for i in keys:
            dist = dists[(direction, i)]
            frame = pd.DataFrame({"W_peV": hz_to_peV(dist.work), "P(W)": dist.prob})
            jar = jarzynski_functional(dist, dist.kT_hz) if dist.kT_hz and np.isfinite(dist.kT_hz) else float("nan")
            lines += [
                f"T{i} (kT = {dist.kT_peV:.3f} peV): <W> = {hz_to_peV(mean_work(dist)):.4f} peV, "
                f"<exp(-W/kT)> = {jar:.6f}",
                _block(frame.set_index("W_peV"), "{:.4f}"),
                "",
            ]
    return lines


def temperature_section(ds: Dataset, spec: SpectrumTable, fits: Dict[int, dict]) -> List[str]:
    rows = []
    n = max((len(ds.temperatures(d)) for d in ds.directions()), default=0)
    for i in range(n):
        row = {"T": f"T{i}"}
        for direction in DIRECTIONS:
            temps = ds.temperatures(direction) if direction in ds.directions() else []
            if i < len(temps):
                est = kT_from_populations(ds.population(direction, temps[i]), spec)
                row[f"kT_pops_{direction}"] = est.kT_peV if est.is_finite else float("nan")
            else:
                row[f"kT_pops_{direction}"] = float("nan")
        fit = fits.get(i)
        row["kT_fit"] = float("nan") if fit is None else fit["kT_peV"]
        row["kT_fit_stderr"] = float("nan") if fit is None else fit["kT_stderr"]
        row["excluded"] = "" if fit is None else len(fit["excluded_W_peV"])
        row["kT_mismatch"] = "" if fit is None else fit.get("kT_mismatch", False)
        rows.append(row)

    lines = ["## Temperatures", ""]
    if not rows:
        return lines + ["absent", ""]
    lines += [_block(pd.DataFrame(rows).set_index("T"), "{:.3f}"), ""]
    if not fits:
        lines += ["fluctuation-relation fits absent", ""]
    return lines


def soft_check_section(cfg: RunConfig, theory: Dataset) -> List[str]:
    """
    Non-gating comparison of noiseless means against configured reference values.
    """
    if not cfg.reference_means:
        return []
    lines = ["## Reference magnetizations (informational)", ""]
    for direction, by_obs in cfg.reference_means.items():
        if direction not in theory.directions():
            continue
        sub = theory.for_direction(direction)
        temps = theory.temperatures(direction)
        for observable, refs in by_obs.items():
            for i, ref in enumerate(refs[:len(temps)]):
                hit = sub[(sub["observable"] == observable) & (sub["kT_peV"] == temps[i])]
                if hit.empty:
                    continue
                value = float(hit["mean"].iloc[0])
                verdict = "agrees" if abs(value - ref) <= SOFT_CHECK_TOL else "differs"
                lines.append(f"- {direction} {observable} T{i}: simulated {value:+.3f}, reference {ref:+.3f} ({verdict})")
    return lines + [""]


def interaction_contrast_section(cfg: RunConfig, dists: Dict[Tuple[str, int], WorkDistribution]) -> List[str]:
    """
    For a J = 0 run, compare the work supports against the interacting drive.
    """
    if cfg.interacting or not dists:
        return []
    coupled = replace(cfg, interacting=True)
    table = build_spectrum(coupled)
    drive = build_drive(coupled)
    theory = theory_dataset(coupled, table, drive)
    coupled_dists = work_distributions(oracle_matrices(table, drive, theory.directions()), theory, table)

    lines = ["## Non-interacting contrast", ""]
    for key in sorted(dists):
        if key not in coupled_dists:
            continue
        ours = sorted(w_key(hz_to_peV(w)) for w in dists[key].support(1e-12))
        theirs = sorted(w_key(hz_to_peV(w)) for w in coupled_dists[key].support(1e-12))
        verdict = "differs" if ours != theirs else "identical"
        lines.append(f"- {key[0]} T{key[1]}: J=0 support {len(ours)} values, interacting support "
                     f"{len(theirs)} values ({verdict})")
    return lines + [""]


def build_summary(cfg: RunConfig, out_dir: Path, uncertainty: Optional[pd.DataFrame] = None) -> str:
    """
    Markdown summary of a run directory. dataset.csv and inversion.yaml are
    required; distribution and fit sections are marked absent when missing.
    """
    out_dir = Path(out_dir)
    required = [out_dir / "dataset.csv", out_dir / "inversion.yaml"]
    missing = [str(p) for p in required if not p.exists()]
    if missing:
        raise FileNotFoundError(f"report inputs missing: {', '.join(missing)}")

    ds = read_dataset(out_dir / "dataset.csv")
    inversion = read_inversion(out_dir / "inversion.yaml")
    dists = load_workdists(out_dir / "workdist")
    fits = load_fits(out_dir / "crooks")

    table = build_spectrum(cfg)
    drive = build_drive(cfg)
    oracle = oracle_matrices(table, drive, list(inversion))

    lines = [
        "# Work fluctuation summary",
        "",
        f"- dataset provenance: {ds.provenance}, seed {ds.seed}",
        f"- interacting: {cfg.interacting}, J = {drive.j_effective} Hz, noise sigma {cfg.sigma}",
        f"- directions: {', '.join(ds.directions())}",
        "",
    ]
    lines += spectrum_section(table)
    lines += matrices_section(table, oracle, inversion)
    lines += distributions_section(dists)
    lines += temperature_section(ds, table, fits)
    if uncertainty is not None:
        kT_rows = uncertainty[uncertainty["quantity"] == "kT_fit"]
        lines += ["## Monte Carlo", "", f"- {int(uncertainty['count'].max())} trials aggregated",
                  f"- failed trials: {failure_rate(uncertainty):.1%}", ""]
        if not kT_rows.empty:
            lines += [_block(kT_rows[["temperature", "mean", "std", "count"]].set_index("temperature"), "{:.3f}"), ""]
    if cfg.reference_means:
        lines += soft_check_section(cfg, theory_dataset(cfg, table, drive))
    lines += interaction_contrast_section(cfg, dists)
    return "\n".join(lines)


def write_summary(cfg: RunConfig, out_dir: Path, uncertainty: Optional[pd.DataFrame] = None) -> Path:
    path = Path(out_dir) / "summary.md"
    path.write_text(build_summary(cfg, out_dir, uncertainty))
    print(f"[report] Wrote {path}")
    return path
