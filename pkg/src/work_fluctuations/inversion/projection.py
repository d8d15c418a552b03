# src/work_fluctuations/inversion/projection.py

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from numpy.typing import NDArray

from work_fluctuations.models.tpm import TransitionMatrix
from work_fluctuations.utils.errors import UnbalanceableMatrixError, ValidationError

SINKHORN_FLOOR = 1e-12


@dataclass
class SinkhornResult:
    matrix: NDArray[np.float64]
    iterations: int
    deviation: float
    converged: bool


@dataclass
class InversionReport:
    """
    Output of the adapted MLE, plus the least-squares diagnostics when it
    runs inside invert_pipeline.
    """
    raw_matrix: NDArray[np.float64]
    projected: TransitionMatrix
    iterations: int
    change: float
    converged: bool
    raw_solution: Optional[NDArray[np.float64]] = None
    residual: Optional[float] = None
    rank: Optional[int] = None
    condition_number: Optional[float] = None
    clamped_entries: int = 0
    flags: List[str] = field(default_factory=list)

    @property
    def direction(self) -> str:
        return self.projected.direction


def _bistochastic_deviation(m: np.ndarray) -> float:
    return float(max(np.abs(m.sum(axis=0) - 1).max(), np.abs(m.sum(axis=1) - 1).max()))


def _check_balanceable(m: np.ndarray, floor: float) -> None:
    dead_rows = np.where(np.all(m <= floor, axis=1))[0]
    dead_cols = np.where(np.all(m <= floor, axis=0))[0]
    if len(dead_rows) or len(dead_cols):
        raise UnbalanceableMatrixError(
            f"rows {dead_rows.tolist()} / columns {dead_cols.tolist()} have no entry above {floor}; "
            f"Sinkhorn balancing needs support in every row and column"
        )


def sinkhorn_sweep(m: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    One pass: normalize rows, then columns.
    """
    out = m / m.sum(axis=1, keepdims=True)
    return out / out.sum(axis=0, keepdims=True)


def sinkhorn(
    m: NDArray[np.float64],
    tol: float = 1e-6,
    max_iter: int = 1000,
    floor: float = SINKHORN_FLOOR,
) -> SinkhornResult:
    """
    Alternate row and column normalization until every row sum is within tol
    of 1 (columns are exact after each sweep). Entries below floor are raised
    to floor first so matrices with zeros can be balanced.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"Sinkhorn needs a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValidationError("Sinkhorn input has non-finite entries")
    _check_balanceable(m, floor)

    current = np.maximum(m, floor)
    deviation = _bistochastic_deviation(current)
    iterations = 0
    while iterations < max_iter and deviation >= tol:
        current = sinkhorn_sweep(current)
        iterations += 1
        deviation = float(np.abs(current.sum(axis=1) - 1).max())

    return SinkhornResult(current, iterations, deviation, converged=deviation < tol)


def mle_project(
    raw: NDArray[np.float64],
    tol: float = 1e-6,
    max_iter: int = 1000,
    direction: str = "forward",
    floor: float = SINKHORN_FLOOR,
    sinkhorn_max_iter: int = 1000,
) -> InversionReport:
    """
    Project a raw (possibly unphysical) matrix onto bistochastic matrices
    with entries in [0, 1].

    Each cycle clamps the current iterate to the box, which is the closed-form
    minimizer of sum (x - xi)^2 over the box, then balances it with Sinkhorn
    until its row sums are within tol; the balanced matrix is the next xi.
    Stops when the max-norm change between cycles and the bistochastic
    deviation are both below tol.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ValidationError(f"raw matrix must be square, got shape {raw.shape}")
    if not np.isfinite(raw).all():
        raise ValidationError("raw matrix has non-finite entries")

    clamped = int(np.sum((raw < 0) | (raw > 1)))
    flags: List[str] = ["clamped"] if clamped else []

    xi = raw
    change = np.inf
    deviation = np.inf
    iterations = 0
    while iterations < max_iter:
        balanced = sinkhorn(np.clip(xi, 0.0, 1.0), tol=tol, max_iter=sinkhorn_max_iter, floor=floor)
        iterations += 1

        change = float(np.abs(balanced.matrix - xi).max())
        deviation = _bistochastic_deviation(balanced.matrix)
        xi = balanced.matrix
        if change < tol and deviation < tol:
            break

    converged = change < tol and deviation < tol
    if not converged:
        print(f"[invert] warning: MLE projection did not converge in {max_iter} iterations "
              f"(change {change:.2e}, deviation {deviation:.2e})")
        flags.append("not_converged")

    projected = TransitionMatrix(xi, direction=direction, provenance="reconstructed")
    return InversionReport(
        raw_matrix=raw,
        projected=projected,
        iterations=iterations,
        change=change,
        converged=converged,
        clamped_entries=clamped,
        flags=flags,
    )
