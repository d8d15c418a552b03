# src/work_fluctuations/stats/propagation.py

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional

import pandas as pd

from work_fluctuations.data.measure import Dataset, add_noise
from work_fluctuations.models.hilbert import SpectrumTable, hz_to_peV
from work_fluctuations.pipeline import (
    build_drive,
    build_spectrum,
    crooks_for,
    invert_dataset,
    temperature_pairs,
    theory_dataset,
    work_distributions,
)
from work_fluctuations.stats.fluctuation import fit_fluctuation, ratio_points, w_key
from work_fluctuations.utils.config import RunConfig
from work_fluctuations.utils.errors import (
    ConvergenceError,
    FitDegenerateError,
    NumericalError,
    ValidationError,
)
from work_fluctuations.utils.seeding import derive_seed

TRIAL_COLUMNS = ["trial", "quantity", "direction", "temperature", "key", "W_peV", "value"]
UNCERTAINTY_COLUMNS = ["quantity", "direction", "temperature", "key", "W_peV", "mean", "std", "count"]


def _flag_row(trial: int, quantity: str, temperature: int, value: float) -> dict:
    return dict(trial=trial, quantity=quantity, direction="all", temperature=temperature,
                key="rate", W_peV=float("nan"), value=value)


def _trial_rows(trial: int, theory: Dataset, table: SpectrumTable, cfg: RunConfig) -> List[dict]:
    """
    One noisy replicate of simulate -> invert -> distributions -> ratios.
    """
    noisy = add_noise(theory, cfg.sigma, derive_seed(cfg.seed, "propagate", trial))
    reports = invert_dataset(noisy, table, cfg, verbose=False)
    stuck = [d for d, r in reports.items() if not r.converged]
    if stuck:
        raise ConvergenceError(f"projection did not converge for {stuck}")
    matrices = {d: r.projected for d, r in reports.items()}

    rows = []
    for direction, t in matrices.items():
        d = t.p.shape[0]
        for m in range(d):
            for n in range(d):
                rows.append(dict(trial=trial, quantity="p", direction=direction, temperature=-1,
                                 key=f"{m + 1}|{n + 1}", W_peV=float("nan"), value=float(t.p[m, n])))

    dists = work_distributions(matrices, noisy, table)
    for (direction, i), dist in dists.items():
        for w, prob in zip(dist.work, dist.prob):
            w_peV = float(hz_to_peV(w))
            rows.append(dict(trial=trial, quantity="P_W", direction=direction, temperature=i,
                             key=f"{w_key(w_peV):.6f}", W_peV=w_key(w_peV), value=float(prob)))

    for i in temperature_pairs(dists):
        points = ratio_points(crooks_for(dists, i, cfg.ratio_floor))
        for p in points:
            rows.append(dict(trial=trial, quantity="ln_ratio", direction="pair", temperature=i,
                             key=f"{w_key(p.W):.6f}", W_peV=w_key(p.W), value=p.ln_ratio))
        try:
            fit = fit_fluctuation(points, confidence=cfg.confidence)
        except FitDegenerateError:
            rows.append(_flag_row(trial, "fit_failed", i, 1.0))
            continue
        rows.append(_flag_row(trial, "fit_failed", i, 0.0))
        rows.append(dict(trial=trial, quantity="kT_fit", direction="pair", temperature=i,
                         key="kT", W_peV=float("nan"), value=fit.kT_peV))
    return rows


def _run_trials(cfg: RunConfig, trials: List[int]) -> List[dict]:
    table = build_spectrum(cfg)
    theory = theory_dataset(cfg, table, build_drive(cfg))
    rows: List[dict] = []
    for trial in trials:
        try:
            trial_rows = _trial_rows(trial, theory, table, cfg)
        except NumericalError as exc:
            print(f"[propagate] trial {trial} failed: {exc}")
            rows.append(_flag_row(trial, "failed", -1, 1.0))
            continue
        rows.extend(trial_rows)
        rows.append(_flag_row(trial, "failed", -1, 0.0))
    return rows


def _chunks(n: int, n_jobs: int) -> List[List[int]]:
    return [list(range(k, n, n_jobs)) for k in range(n_jobs) if k < n]


def run_trials(cfg: RunConfig, trials: int, n_jobs: int = 1) -> pd.DataFrame:
    """
    Per-trial long table (TRIAL_COLUMNS). Trials run sequentially or spread
    over a process pool; each trial's noise seed depends only on the master
    seed and its index.
    """
    if n_jobs <= 1:
        rows = _run_trials(cfg, list(range(trials)))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = pool.map(_run_trials, [cfg] * n_jobs, _chunks(trials, n_jobs))
            rows = [row for part in parts for row in part]

    frame = pd.DataFrame(rows, columns=TRIAL_COLUMNS)
    return frame.sort_values(["trial", "quantity", "direction", "temperature", "key"], kind="stable").reset_index(drop=True)


def summarize_trials(frame: pd.DataFrame) -> pd.DataFrame:
    grouped = frame.groupby(["quantity", "direction", "temperature", "key"], sort=True, dropna=False)
    table = grouped.agg(
        W_peV=("W_peV", "first"),
        mean=("value", "mean"),
        std=("value", "std"),
        count=("value", "count"),
    ).reset_index()
    table["std"] = table["std"].fillna(0.0)
    return table[UNCERTAINTY_COLUMNS]


def propagate_errors(
    cfg: RunConfig,
    sigma: Optional[float] = None,
    trials: Optional[int] = None,
    master_seed: Optional[int] = None,
    n_jobs: Optional[int] = None,
) -> pd.DataFrame:
    """
    Monte Carlo uncertainty table: mean and standard deviation over trials of
    every transition entry, P(W) weight, ln-ratio point and fitted kT.
    The "failed" and "fit_failed" rows carry 0/1 per trial, so their mean is
    the rate of trials missing from the other rows. Arguments left as None
    come from cfg.
    """
    run = replace(
        cfg,
        sigma=cfg.sigma if sigma is None else float(sigma),
        trials=cfg.trials if trials is None else int(trials),
        seed=cfg.seed if master_seed is None else int(master_seed),
        n_jobs=cfg.n_jobs if n_jobs is None else int(n_jobs),
    )
    if run.trials < 2:
        raise ValidationError(f"error propagation needs at least 2 trials, got {run.trials}")
    if run.sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {run.sigma}")

    print(f"[propagate] {run.trials} trials at sigma {run.sigma}, seed {run.seed}, {run.n_jobs} job(s)")
    table = summarize_trials(run_trials(run, run.trials, n_jobs=run.n_jobs))
    rate = failure_rate(table)
    if rate > 0:
        print(f"[propagate] warning: {rate:.1%} of trials failed; the other statistics cover the rest only")
    return table


def ln_ratio_sigmas(uncertainty: pd.DataFrame, temperature: int) -> Dict[float, float]:
    """
    w_key(W_peV) -> standard deviation of ln-ratio at one temperature index.
    """
    sub = uncertainty[(uncertainty["quantity"] == "ln_ratio") & (uncertainty["temperature"] == temperature)]
    return {w_key(w): float(s) for w, s in zip(sub["W_peV"], sub["std"])}


def failure_rate(uncertainty: pd.DataFrame) -> float:
    """
    Fraction of Monte Carlo trials that raised a numerical error.
    """
    row = uncertainty[uncertainty["quantity"] == "failed"]
    return float(row["mean"].iloc[0]) if len(row) else 0.0
