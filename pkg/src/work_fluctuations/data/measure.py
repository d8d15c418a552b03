# src/work_fluctuations/data/measure.py

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from work_fluctuations.models.hilbert import (
    IDENTITY2,
    SIGMA_Z,
    ComplexMatrix,
    PopulationVector,
    SpectrumTable,
    tensor,
)
from work_fluctuations.models.pulses import readout_prefix
from work_fluctuations.models.tpm import transition_matrix
from work_fluctuations.utils.errors import ValidationError

OBSERVABLES = ("sigma_z_H", "sigma_z_C", "sigma_zz")
RECORD_COLUMNS = ["observable", "direction", "kT_peV", "mean", "stderr"]

BUILTIN_OPERATORS: Dict[str, ComplexMatrix] = {
    "sigma_z_H": tensor(SIGMA_Z, IDENTITY2),
    "sigma_z_C": tensor(IDENTITY2, SIGMA_Z),
    "sigma_zz": tensor(SIGMA_Z, SIGMA_Z),
}


@dataclass(frozen=True)
class ObservableRecord:
    observable: str
    direction: str
    kT_peV: float
    mean: float
    stderr: float = 0.0

    def __post_init__(self):
        if self.direction not in ("forward", "backward"):
            raise ValidationError(f"direction must be forward or backward, got {self.direction!r}")
        if self.stderr < 0:
            raise ValidationError(f"stderr must be >= 0, got {self.stderr}")
        if abs(self.mean) > 1 + 3 * self.stderr:
            raise ValidationError(
                f"|mean| = {abs(self.mean):.4f} exceeds 1 + 3*stderr for {self.observable} "
                f"({self.direction}, kT={self.kT_peV} peV)"
            )


@dataclass
class Dataset:
    """
    Observable means plus the preparation populations they were measured with.

    records has one row per (observable, direction, kT_peV); populations is
    keyed by (direction, kT_peV).
    """
    records: pd.DataFrame
    populations: Dict[Tuple[str, float], PopulationVector]
    provenance: str = "simulated"
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [c for c in RECORD_COLUMNS if c not in self.records.columns]
        if missing:
            raise ValidationError(f"dataset records are missing columns {missing}")
        self.records = self.records[RECORD_COLUMNS].reset_index(drop=True)
        dup = self.records.duplicated(subset=["observable", "direction", "kT_peV"])
        if dup.any():
            first = self.records[dup].iloc[0]
            raise ValidationError(
                f"duplicate record for {first['observable']} ({first['direction']}, kT={first['kT_peV']} peV)"
            )

    def directions(self) -> List[str]:
        return [d for d in ("forward", "backward") if (self.records["direction"] == d).any()]

    def temperatures(self, direction: str) -> List[float]:
        sub = self.records[self.records["direction"] == direction]
        return list(dict.fromkeys(sub["kT_peV"].tolist()))

    def for_direction(self, direction: str) -> pd.DataFrame:
        return self.records[self.records["direction"] == direction].reset_index(drop=True)

    def iter_records(self):
        for row in self.records.itertuples(index=False):
            yield ObservableRecord(row.observable, row.direction, float(row.kT_peV), float(row.mean), float(row.stderr))

    def population(self, direction: str, kT_peV: float) -> PopulationVector:
        key = (direction, float(kT_peV))
        if key not in self.populations:
            raise ValidationError(f"no populations recorded for {direction} at kT={kT_peV} peV")
        return self.populations[key]


def observable_diagonals(spec: SpectrumTable) -> Dict[str, np.ndarray]:
    """
    Eigenvalues of the built-in observables, reindexed by ascending energy.
    """
    order = list(spec.order)
    return {name: np.diag(op).real[order] for name, op in BUILTIN_OPERATORS.items()}


def readout_observable(k: int, qubit: str = "H", j_coupling: float = 215.1) -> ComplexMatrix:
    """
    Observable effectively measured when sz on qubit is read after S^k.
    """
    s = readout_prefix(k, j_coupling)
    sz = BUILTIN_OPERATORS["sigma_z_H"] if qubit == "H" else BUILTIN_OPERATORS["sigma_z_C"]
    return s.conj().T @ sz @ s


def _diagonal_of(op: ComplexMatrix, spec: SpectrumTable, name: str) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    order = list(spec.order)
    in_basis = op[np.ix_(order, order)]
    off = in_basis - np.diag(np.diag(in_basis))
    if np.abs(off).max() > 1e-10:
        raise ValidationError(
            f"observable '{name}' is not diagonal in the energy eigenbasis; "
            f"the inversion needs observables that commute with the final Hamiltonian"
        )
    return np.diag(in_basis).real


def simulate_observables(
    u: ComplexMatrix,
    pops_by_kT: Sequence[PopulationVector],
    spec: SpectrumTable,
    direction: str = "forward",
    observables: Optional[Mapping[str, ComplexMatrix]] = None,
) -> Dataset:
    """
    Noiseless end-of-protocol means <O> = sum_m o_m sum_n p_n p_{m|n}.
    """
    ops = BUILTIN_OPERATORS if observables is None else observables
    diagonals = {name: _diagonal_of(op, spec, name) for name, op in ops.items()}
    t = transition_matrix(u, spec, direction=direction)

    rows = []
    populations = {}
    for pops in pops_by_kT:
        if pops.kT_peV is None:
            raise ValidationError("populations need kT metadata to be stored in a dataset")
        final = t.p @ pops.probs
        for name, o in diagonals.items():
            rows.append({
                "observable": name,
                "direction": direction,
                "kT_peV": float(pops.kT_peV),
                "mean": float(o @ final),
                "stderr": 0.0,
            })
        populations[(direction, float(pops.kT_peV))] = pops

    return Dataset(pd.DataFrame(rows, columns=RECORD_COLUMNS), populations, provenance="simulated")


def add_noise(ds: Dataset, sigma: float, seed: int) -> Dataset:
    """
    Independent zero-mean Gaussian noise of width sigma on every mean.
    Populations are left untouched.
    """
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")

    rng = np.random.default_rng(seed)
    records = ds.records.copy()
    records["mean"] = records["mean"].to_numpy() + rng.normal(0.0, sigma, size=len(records))
    records["stderr"] = float(sigma)
    return Dataset(records, dict(ds.populations), provenance=ds.provenance, seed=seed, meta=dict(ds.meta))


def combine_datasets(a: Dataset, b: Dataset) -> Dataset:
    populations = dict(a.populations)
    for key, pops in b.populations.items():
        if key in populations and not np.array_equal(populations[key].probs, pops.probs):
            raise ValidationError(f"conflicting populations for {key}")
        populations[key] = pops

    records = pd.concat([a.records, b.records], ignore_index=True)
    provenance = a.provenance if a.provenance == b.provenance else "mixed"
    return Dataset(records, populations, provenance=provenance, seed=a.seed if a.seed == b.seed else None)
