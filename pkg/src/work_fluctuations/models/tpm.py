# src/work_fluctuations/models/tpm.py

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from work_fluctuations.models.hilbert import (
    ComplexMatrix,
    PopulationVector,
    SpectrumTable,
    hz_to_peV,
)
from work_fluctuations.utils.errors import ValidationError

ORACLE_TOL = 1e-9
RECONSTRUCTED_TOL = 1e-6
WORK_BIN_TOL = 1e-9


@dataclass
class TransitionMatrix:
    """
    p[m, n] = p_{m|n}: probability of ending in level m given start in level n
    (levels in ascending energy order).
    """
    p: NDArray[np.float64]
    direction: str = "forward"
    provenance: str = "oracle"

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        if self.p.ndim != 2 or self.p.shape[0] != self.p.shape[1]:
            raise ValidationError(f"transition matrix must be square, got shape {self.p.shape}")
        if self.direction not in ("forward", "backward"):
            raise ValidationError(f"direction must be forward or backward, got {self.direction!r}")
        if self.provenance not in ("oracle", "reconstructed"):
            raise ValidationError(f"provenance must be oracle or reconstructed, got {self.provenance!r}")

    @property
    def tolerance(self) -> float:
        return ORACLE_TOL if self.provenance == "oracle" else RECONSTRUCTED_TOL

    def bistochastic_deviation(self) -> float:
        return float(max(
            np.abs(self.p.sum(axis=0) - 1).max(),
            np.abs(self.p.sum(axis=1) - 1).max(),
        ))

    def is_bistochastic(self, tol: Optional[float] = None) -> bool:
        tol = self.tolerance if tol is None else tol
        in_box = np.all(self.p >= -tol) and np.all(self.p <= 1 + tol)
        return bool(in_box and self.bistochastic_deviation() < tol)

    def check(self) -> "TransitionMatrix":
        if not self.is_bistochastic():
            raise ValidationError(
                f"{self.provenance} transition matrix is not bistochastic within {self.tolerance}: "
                f"deviation {self.bistochastic_deviation():.3e}"
            )
        return self


@dataclass
class WorkDistribution:
    """
    Work values W (h*Hz) with their probabilities, one direction and temperature.
    """
    work: NDArray[np.float64]
    prob: NDArray[np.float64]
    direction: str = "forward"
    kT_hz: Optional[float] = None
    kT_peV: Optional[float] = None

    def __post_init__(self):
        self.work = np.asarray(self.work, dtype=float)
        self.prob = np.asarray(self.prob, dtype=float)
        if self.work.shape != self.prob.shape:
            raise ValidationError("work and prob arrays must have the same length")

    def support(self, floor: float = 0.0) -> NDArray[np.float64]:
        return self.work[self.prob > floor]

    def probability_at(self, w: float, tol: float = WORK_BIN_TOL) -> float:
        hit = np.abs(self.work - w) <= tol
        return float(self.prob[hit].sum())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "W_hz": self.work,
            "W_peV": hz_to_peV(self.work),
            "probability": self.prob,
            "direction": self.direction,
            "kT_peV": self.kT_peV,
        })


@dataclass
class CrooksPoints:
    work: NDArray[np.float64]
    p_forward: NDArray[np.float64]
    p_backward: NDArray[np.float64]
    ln_ratio: NDArray[np.float64]
    unpaired: List[float] = field(default_factory=list)
    below_floor: List[float] = field(default_factory=list)
    floor: float = 0.0


def _is_unitary(u: np.ndarray, atol: float) -> bool:
    return np.allclose(u.conj().T @ u, np.eye(u.shape[0]), rtol=0.0, atol=atol)


def transition_matrix(
    u: ComplexMatrix,
    basis: SpectrumTable,
    direction: str = "forward",
) -> TransitionMatrix:
    """
    Two-point-measurement transition probabilities |<m|U|n>|^2 between sorted
    eigenstates. Initial and final Hamiltonians are the same.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (basis.dimension, basis.dimension):
        raise ValidationError(f"unitary shape {u.shape} does not match spectrum dimension {basis.dimension}")
    if not _is_unitary(u, atol=1e-10):
        raise ValidationError("driving operator is not unitary within 1e-10")

    order = list(basis.order)
    p = np.abs(u[np.ix_(order, order)]) ** 2
    return TransitionMatrix(p, direction=direction, provenance="oracle").check()


def micro_reversibility_gap(forward: TransitionMatrix, backward: TransitionMatrix) -> float:
    """
    max |p^F_{m|n} - p^B_{n|m}|
    """
    return float(np.abs(forward.p - backward.p.T).max())


def _bin_work(work: np.ndarray, prob: np.ndarray, tol: float):
    idx = np.argsort(work, kind="stable")
    work, prob = work[idx], prob[idx]

    bins_w: List[float] = []
    bins_p: List[float] = []
    for w, p in zip(work, prob):
        if bins_w and abs(w - bins_w[-1]) <= tol:
            bins_p[-1] += p
        else:
            bins_w.append(float(w))
            bins_p.append(float(p))
    return np.array(bins_w), np.array(bins_p)


def work_distribution(
    pops: PopulationVector,
    t: TransitionMatrix,
    spec: SpectrumTable,
    tol: float = WORK_BIN_TOL,
) -> WorkDistribution:
    """
    P(W) = sum_{m,n} p_n p_{m|n} delta(W - (e_m - e_n)), binned within tol.
    """
    d = spec.dimension
    if t.p.shape != (d, d) or pops.probs.shape != (d,):
        raise ValidationError("populations, transition matrix and spectrum dimensions differ")
    if not t.is_bistochastic():
        raise ValidationError(f"transition matrix is not bistochastic within {t.tolerance}")

    e = spec.energies
    work = (e[:, None] - e[None, :]).ravel()
    mass = (t.p * pops.probs[None, :]).ravel()
    bins_w, bins_p = _bin_work(work, mass, tol)
    return WorkDistribution(bins_w, bins_p, direction=t.direction, kT_hz=pops.kT_hz, kT_peV=pops.kT_peV)


def mean_work(w: WorkDistribution) -> float:
    return float(np.sum(w.work * w.prob))


def jarzynski_functional(w: WorkDistribution, kT_hz: float) -> float:
    """
    <exp(-W/kT)>; equals 1 when the initial state is Gibbs at kT and dF = 0.
    """
    if not (kT_hz > 0):
        raise ValidationError(f"kT must be > 0, got {kT_hz}")
    return float(np.sum(w.prob * np.exp(-w.work / kT_hz)))


def crooks_points(
    forward: WorkDistribution,
    backward: WorkDistribution,
    floor: float = 1e-12,
    tol: float = WORK_BIN_TOL,
) -> CrooksPoints:
    """
    (W, ln[P_F(W) / P_B(-W)]) for every W carried by the forward distribution.

    Probabilities at or below floor count as absent. Forward W values whose
    own weight is at or below floor go to below_floor; those without a
    backward partner at -W go to unpaired.
    """
    work, pf, pb, unpaired, below_floor = [], [], [], [], []
    for w, p in zip(forward.work, forward.prob):
        if p <= floor:
            below_floor.append(float(w))
            continue
        partner = backward.probability_at(-w, tol=tol)
        if partner <= floor:
            unpaired.append(float(w))
            continue
        work.append(float(w))
        pf.append(float(p))
        pb.append(partner)

    pf_arr, pb_arr = np.array(pf), np.array(pb)
    return CrooksPoints(
        work=np.array(work),
        p_forward=pf_arr,
        p_backward=pb_arr,
        ln_ratio=np.log(pf_arr / pb_arr) if len(pf) else np.array([]),
        unpaired=unpaired,
        below_floor=below_floor,
        floor=floor,
    )
