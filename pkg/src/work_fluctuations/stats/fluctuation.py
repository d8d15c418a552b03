# src/work_fluctuations/stats/fluctuation.py

from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm
from numpy.typing import NDArray
from scipy.stats import t

from work_fluctuations.models.hilbert import hz_to_peV
from work_fluctuations.models.tpm import CrooksPoints
from work_fluctuations.utils.errors import FitDegenerateError, ValidationError

MIN_FIT_POINTS = 3
W_KEY_DECIMALS = 6


def w_key(w_peV: float) -> float:
    """
    Rounded W used to match ratio points across Monte Carlo trials.
    """
    return round(float(w_peV), W_KEY_DECIMALS)


@dataclass(frozen=True)
class RatioPoint:
    W: float
    ln_ratio: float
    sigma: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.W) and np.isfinite(self.ln_ratio)):
            raise ValidationError(f"ratio point must be finite, got W={self.W}, ln_ratio={self.ln_ratio}")
        if self.sigma < 0:
            raise ValidationError(f"ratio point sigma must be >= 0, got {self.sigma}")


@dataclass
class FitResult:
    """
    ln_ratio = intercept + slope * W with W in peV; kT = 1 / slope.

    lower/upper are the prediction-interval bounds from the first fit over
    all points, the ones used to decide exclusions. residuals come from the
    final fit, evaluated on every input point.
    """
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float
    kT_peV: float
    kT_stderr: float
    confidence: float
    weighted: bool
    excluded: List[float] = field(default_factory=list)
    residuals: NDArray[np.float64] = field(default_factory=lambda: np.array([]))
    lower: NDArray[np.float64] = field(default_factory=lambda: np.array([]))
    upper: NDArray[np.float64] = field(default_factory=lambda: np.array([]))
    n_points: int = 0

    @property
    def n_used(self) -> int:
        return self.n_points - len(self.excluded)

    def predict(self, w: NDArray[np.float64]) -> NDArray[np.float64]:
        return self.intercept + self.slope * np.asarray(w, dtype=float)


def ratio_points(crooks: CrooksPoints, sigmas: Optional[Mapping[float, float]] = None) -> List[RatioPoint]:
    """
    Convert Crooks pairs (W in h*Hz) to ratio points in peV. sigmas maps
    w_key(W_peV) to the ln-ratio uncertainty; missing keys get sigma 0.
    """
    points = []
    for w_hz, lr in zip(crooks.work, crooks.ln_ratio):
        w = float(hz_to_peV(w_hz))
        sigma = 0.0 if sigmas is None else float(sigmas.get(w_key(w), 0.0))
        points.append(RatioPoint(W=w, ln_ratio=float(lr), sigma=sigma))
    return points


def _design(w: np.ndarray) -> np.ndarray:
    return sm.add_constant(w, has_constant="add")


def _fit_once(w: np.ndarray, y: np.ndarray, sigma: np.ndarray, weighted: bool, alpha: float):
    """
    Returns (results, prediction half-widths at the fitted points).
    """
    x = _design(w)
    if weighted:
        res = sm.WLS(y, x, weights=1.0 / sigma ** 2).fit()
        # sigmas are absolute: parameter covariance is (X' W X)^-1, no scale
        cov = res.normalized_cov_params
        tppf = t.ppf(1 - alpha / 2, res.df_resid)
        half = tppf * np.sqrt(sigma ** 2 + np.einsum("ij,jk,ik->i", x, cov, x))
        stderr = np.sqrt(np.diag(cov))
    else:
        res = sm.OLS(y, x).fit()
        frame = res.get_prediction(x).summary_frame(alpha=alpha)
        half = 0.5 * (frame["obs_ci_upper"].to_numpy() - frame["obs_ci_lower"].to_numpy())
        stderr = np.asarray(res.bse)
    return res, half, stderr


def fit_fluctuation(points: Sequence[RatioPoint], confidence: float = 0.99) -> FitResult:
    """
    Linear fit of ln_ratio against W with one outlier-rejection pass.

    Inverse-variance weights with absolute sigmas when every point has
    sigma > 0, otherwise ordinary least squares. Points outside the two-sided
    Student-t prediction interval of the all-points fit are dropped and the
    line is refitted once. The intercept is free.
    """
    if not (0 < confidence < 1):
        raise ValidationError(f"confidence must be in (0, 1), got {confidence}")
    if len(points) < MIN_FIT_POINTS:
        raise FitDegenerateError(f"need at least {MIN_FIT_POINTS} ratio points, got {len(points)}")

    w = np.array([p.W for p in points])
    y = np.array([p.ln_ratio for p in points])
    sigma = np.array([p.sigma for p in points])
    weighted = bool(np.all(sigma > 0))
    alpha = 1 - confidence

    if np.ptp(w) == 0:
        raise FitDegenerateError("all ratio points share the same W; slope is undefined")

    res, half, _ = _fit_once(w, y, sigma, weighted, alpha)
    fitted = res.params[0] + res.params[1] * w
    atol = 1e-9 * max(1.0, float(np.abs(y).max()))
    outside = np.abs(y - fitted) > half + atol

    keep = ~outside
    if keep.sum() < MIN_FIT_POINTS:
        raise FitDegenerateError(
            f"only {int(keep.sum())} of {len(points)} points survive the prediction-interval cut"
        )
    if len(np.unique(w[keep])) < 2:
        raise FitDegenerateError("surviving ratio points share the same W; slope is undefined")

    final, _, stderr = _fit_once(w[keep], y[keep], sigma[keep], weighted, alpha)
    intercept, slope = float(final.params[0]), float(final.params[1])
    slope_se = float(stderr[1])

    if slope > 0:
        kT, kT_se = 1.0 / slope, slope_se / slope ** 2
    else:
        print(f"[crooks] warning: non-positive slope {slope:.3e}; no finite temperature")
        kT, kT_se = float("nan"), float("nan")

    return FitResult(
        slope=slope,
        intercept=intercept,
        slope_stderr=slope_se,
        intercept_stderr=float(stderr[0]),
        kT_peV=kT,
        kT_stderr=kT_se,
        confidence=confidence,
        weighted=weighted,
        excluded=[float(v) for v in w[outside]],
        residuals=y - (intercept + slope * w),
        lower=fitted - half,
        upper=fitted + half,
        n_points=len(points),
    )


def fit_plot_frame(fit: FitResult, points: Sequence[RatioPoint]) -> pd.DataFrame:
    """
    One row per ratio point: W, ln_ratio, sigma, fitted, lower, upper, excluded.
    """
    w = np.array([p.W for p in points])
    excluded = {w_key(v) for v in fit.excluded}
    return pd.DataFrame({
        "W_peV": w,
        "ln_ratio": [p.ln_ratio for p in points],
        "sigma": [p.sigma for p in points],
        "fitted": fit.predict(w),
        "lower": fit.lower,
        "upper": fit.upper,
        "excluded": [w_key(v) in excluded for v in w],
    })
