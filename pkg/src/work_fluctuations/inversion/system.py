# src/work_fluctuations/inversion/system.py

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from work_fluctuations.data.measure import Dataset, observable_diagonals
from work_fluctuations.models.hilbert import SpectrumTable
from work_fluctuations.utils.errors import (
    RankDeficiencyError,
    UnderdeterminedSystemError,
    ValidationError,
)

CONDITION_WARNING = 1e8
UNINFORMATIVE_ATOL = 1e-14


@dataclass
class LinearSystem:
    """
    A x = b over the (d-1)^2 free transition probabilities.

    Unknown k is p_{m|n} with (m, n) = index_map[k], 0-based levels in
    ascending energy; level d-1 is eliminated by the bistochastic conditions.
    """
    a: NDArray[np.float64]
    b: NDArray[np.float64]
    index_map: List[Tuple[int, int]]
    row_labels: List[Tuple[str, float]] = field(default_factory=list)
    uninformative: List[int] = field(default_factory=list)

    @property
    def n_unknowns(self) -> int:
        return len(self.index_map)

    @property
    def dimension(self) -> int:
        return int(round(np.sqrt(self.n_unknowns))) + 1

    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.a))

    def unknown_label(self, k: int) -> str:
        m, n = self.index_map[k]
        return f"p_{{{m + 1}|{n + 1}}}"


@dataclass
class LeastSquaresSolution:
    x: NDArray[np.float64]
    residual: float
    rank: int
    condition_number: float
    singular_values: NDArray[np.float64]
    flags: List[str] = field(default_factory=list)


def _index_map(d: int) -> List[Tuple[int, int]]:
    return [(m, n) for m in range(d - 1) for n in range(d - 1)]


def build_system(ds: Dataset, spec: SpectrumTable, direction: str = "forward") -> LinearSystem:
    """
    One equation per observable record of the given direction.

    With q_m = sum_n p_n p_{m|n}, eliminating the last row and column gives
    <O> = o_d + sum_{m<d} (o_m - o_d) [p_d + sum_{n<d} (p_n - p_d) p_{m|n}].
    """
    d = spec.dimension
    records = ds.for_direction(direction)
    n_unknowns = (d - 1) ** 2
    if len(records) < n_unknowns:
        raise UnderdeterminedSystemError(
            f"{direction}: {len(records)} records for {n_unknowns} unknowns; "
            f"measure more observables or temperatures"
        )

    diagonals = observable_diagonals(spec)
    rows, rhs, labels, uninformative = [], [], [], []
    for i, rec in enumerate(records.itertuples(index=False)):
        if rec.observable not in diagonals:
            raise ValidationError(f"no diagonal known for observable '{rec.observable}'")
        o = diagonals[rec.observable]
        p = ds.population(direction, rec.kT_peV).probs

        do = o[:-1] - o[-1]
        dp = p[:-1] - p[-1]
        rows.append(np.outer(do, dp).ravel())
        rhs.append(rec.mean - o[-1] - p[-1] * do.sum())
        labels.append((rec.observable, float(rec.kT_peV)))
        if np.abs(dp).max() <= UNINFORMATIVE_ATOL:
            uninformative.append(i)

    if uninformative:
        print(f"[invert] {direction}: {len(uninformative)} rows carry no information (uniform populations)")

    return LinearSystem(
        a=np.array(rows),
        b=np.array(rhs),
        index_map=_index_map(d),
        row_labels=labels,
        uninformative=uninformative,
    )


def solve_least_squares(sys: LinearSystem, allow_rank_deficient: bool = False) -> LeastSquaresSolution:
    """
    Minimum-norm least squares through an SVD-based LAPACK driver.

    Rank deficiency raises unless allow_rank_deficient is set, in which case
    the minimum-norm solution comes back with a warning flag.
    """
    n = sys.n_unknowns
    if sys.a.shape[0] < n:
        raise UnderdeterminedSystemError(f"{sys.a.shape[0]} equations for {n} unknowns")

    x, _, rank, s = scipy.linalg.lstsq(sys.a, sys.b, lapack_driver="gelsd")
    condition = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    residual = float(np.linalg.norm(sys.a @ x - sys.b))
    flags: List[str] = []

    if rank < n:
        null = scipy.linalg.null_space(sys.a)
        directions = []
        for vec in null.T:
            top = np.argsort(-np.abs(vec))[:3]
            directions.append(" + ".join(f"{vec[k]:+.2f}*{sys.unknown_label(k)}" for k in top))
        message = f"rank {rank} < {n}; unidentifiable directions: " + "; ".join(directions)
        if not allow_rank_deficient:
            raise RankDeficiencyError(message)
        print(f"[invert] warning: {message}")
        flags.append("rank_deficient")

    if condition > CONDITION_WARNING:
        print(f"[invert] warning: condition number {condition:.3e} exceeds {CONDITION_WARNING:.0e}")
        flags.append("ill_conditioned")

    return LeastSquaresSolution(x=x, residual=residual, rank=int(rank), condition_number=condition,
                                singular_values=s, flags=flags)


def complete_matrix(x: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    Fill the eliminated row and column from the bistochastic conditions.
    No clamping.
    """
    x = np.asarray(x, dtype=float)
    k = int(round(np.sqrt(x.size)))
    if k * k != x.size:
        raise ValidationError(f"solution length {x.size} is not a perfect square")

    d = k + 1
    full = np.zeros((d, d))
    full[:k, :k] = x.reshape(k, k)
    full[:k, k] = 1.0 - full[:k, :k].sum(axis=1)
    full[k, :k] = 1.0 - full[:k, :k].sum(axis=0)
    full[k, k] = 1.0 - full[k, :k].sum()
    return full


def oracle_unknowns(p: NDArray[np.float64]) -> NDArray[np.float64]:
    """
    The (d-1)^2 free entries of a full transition matrix, in system order.
    """
    p = np.asarray(p, dtype=float)
    return p[:-1, :-1].ravel()


def system_diagnostics(sys: LinearSystem) -> Dict[str, float]:
    """
    rank and condition number, in the spirit of a covariance health check
    """
    s = np.linalg.svd(sys.a, compute_uv=False)
    return {
        "rank": float(np.linalg.matrix_rank(sys.a)),
        "min_singular_value": float(s.min()),
        "max_singular_value": float(s.max()),
        "condition_number": float(s[0] / s[-1]) if s[-1] > 0 else float("inf"),
    }
