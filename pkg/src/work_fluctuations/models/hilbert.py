# src/work_fluctuations/models/hilbert.py

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy import constants

from work_fluctuations.utils.errors import NumericalError, ValidationError

ComplexMatrix = NDArray[np.complex128]

MAX_DIMENSION = 64

# Planck constant in eV/Hz; 1 h*Hz = PLANCK_EV_S * 1e12 peV
PLANCK_EV_S = constants.physical_constants["Planck constant in eV/Hz"][0]
PEV_PER_HZ = PLANCK_EV_S * 1e12

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# Computational basis of the (H, C) pair: index = 2 * b_H + b_C, b = 0 for spin up.
# sigma_z eigenvalue of each basis state, per qubit
BASIS_SPINS: Tuple[Tuple[int, int], ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def peV_to_hz(x):
    return np.asarray(x, dtype=float) / PEV_PER_HZ if np.ndim(x) else float(x) / PEV_PER_HZ


def hz_to_peV(x):
    return np.asarray(x, dtype=float) * PEV_PER_HZ if np.ndim(x) else float(x) * PEV_PER_HZ


@dataclass(frozen=True)
class HamiltonianSpec:
    """
    Two-spin Hamiltonian in the rotating frame, all values in Hz:
    H/h = -dnu_h/2 sz_H - dnu_c/2 sz_C + J/4 sz_H sz_C
    """
    dnu_h: float
    dnu_c: float
    j_coupling: float

    def __post_init__(self):
        for name in ("dnu_h", "dnu_c", "j_coupling"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite, got {getattr(self, name)}")
        if self.j_coupling < 0:
            raise ValidationError(f"j_coupling must be >= 0, got {self.j_coupling}")

    def without_coupling(self) -> "HamiltonianSpec":
        return HamiltonianSpec(self.dnu_h, self.dnu_c, 0.0)


@dataclass(frozen=True)
class SpectrumTable:
    """
    Energies in h*Hz sorted ascending. order[k] is the computational basis
    index of the k-th level and labels[k] its (sz_H, sz_C) pair.
    """
    energies: NDArray[np.float64]
    order: Tuple[int, ...]
    labels: Tuple[Tuple[int, int], ...]

    @property
    def dimension(self) -> int:
        return len(self.energies)

    def label_string(self, k: int) -> str:
        arrows = {1: "↑", -1: "↓"}
        return "".join(arrows[s] for s in self.labels[k])


@dataclass
class PopulationVector:
    probs: NDArray[np.float64]
    kT_hz: Optional[float] = None
    kT_peV: Optional[float] = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=float)
        if self.probs.ndim != 1:
            raise ValidationError(f"populations must be a 1-D vector, got shape {self.probs.shape}")
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ValidationError(f"populations must lie in [0, 1], got {self.probs}")
        if abs(self.probs.sum() - 1.0) > 1e-12:
            raise ValidationError(f"populations must sum to 1 within 1e-12, sum is {self.probs.sum()!r}")
        if self.kT_peV is not None and self.kT_hz is None:
            self.kT_hz = float(peV_to_hz(self.kT_peV))
        if self.kT_hz is not None and self.kT_peV is None:
            self.kT_peV = float(hz_to_peV(self.kT_hz))

    @classmethod
    def normalized(cls, values, kT_peV: Optional[float] = None, atol: float = 1e-3) -> "PopulationVector":
        """
        Build from measured values that sum to 1 only approximately.
        """
        values = np.asarray(values, dtype=float)
        total = values.sum()
        if abs(total - 1.0) > atol:
            raise ValidationError(f"populations sum to {total}, more than {atol} away from 1")
        return cls(values / total, kT_peV=kT_peV)


def _check_square(a: np.ndarray, name: str) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be a square matrix, got shape {a.shape}")


def tensor(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    _check_square(a, "a")
    _check_square(b, "b")

    dim = a.shape[0] * b.shape[0]
    if dim > MAX_DIMENSION:
        raise ValidationError(f"tensor product dimension {dim} exceeds the limit of {MAX_DIMENSION}")
    return np.kron(a, b)


def spectrum(spec: HamiltonianSpec) -> SpectrumTable:
    """
    Diagonal energies of the two-spin Hamiltonian, sorted ascending.

    Degenerate levels keep computational order (stable sort).
    """
    raw = np.array([
        -0.5 * spec.dnu_h * s_h - 0.5 * spec.dnu_c * s_c + 0.25 * spec.j_coupling * s_h * s_c
        for s_h, s_c in BASIS_SPINS
    ])
    order = np.argsort(raw, kind="stable")
    return SpectrumTable(
        energies=raw[order],
        order=tuple(int(i) for i in order),
        labels=tuple(BASIS_SPINS[i] for i in order),
    )


def rescale_spectrum(table: SpectrumTable, gap_peV: float) -> SpectrumTable:
    """
    Scale all energies so that the second excited level sits gap_peV above
    the ground level. Labels are unchanged.
    """
    if not (gap_peV > 0):
        raise ValidationError(f"gap_peV must be > 0, got {gap_peV}")
    gap_hz = table.energies[2] - table.energies[0]
    if gap_hz <= 0:
        raise ValidationError("cannot rescale a spectrum whose levels 0 and 2 are degenerate")

    factor = peV_to_hz(gap_peV) / gap_hz
    return SpectrumTable(energies=table.energies * factor, order=table.order, labels=table.labels)


def hamiltonian_matrix(spec: HamiltonianSpec) -> ComplexMatrix:
    """
    Full 4x4 Hamiltonian in h*Hz, computational basis.
    """
    sz_h = tensor(SIGMA_Z, IDENTITY2)
    sz_c = tensor(IDENTITY2, SIGMA_Z)
    return -0.5 * spec.dnu_h * sz_h - 0.5 * spec.dnu_c * sz_c + 0.25 * spec.j_coupling * sz_h @ sz_c


def gibbs_populations(table: SpectrumTable, kT: float, unit: str = "peV") -> PopulationVector:
    """
    Boltzmann populations of the sorted levels.

    kT is in peV by default, or in h*Hz with unit="hz". kT = inf gives the
    uniform distribution.
    """
    if unit not in ("peV", "hz"):
        raise ValidationError(f"unit must be 'peV' or 'hz', got '{unit}'")
    if np.isnan(kT) or kT <= 0:
        raise ValidationError(f"kT must be > 0, got {kT}")

    kT_hz = float(peV_to_hz(kT)) if unit == "peV" else float(kT)
    d = table.dimension
    if np.isinf(kT_hz):
        return PopulationVector(np.full(d, 1.0 / d), kT_hz=np.inf, kT_peV=np.inf)

    # Shift by the ground energy to keep exponents <= 0
    weights = np.exp(-(table.energies - table.energies[0]) / kT_hz)
    probs = weights / weights.sum()
    kT_peV = float(kT) if unit == "peV" else float(hz_to_peV(kT_hz))
    return PopulationVector(probs, kT_hz=kT_hz, kT_peV=kT_peV)


def thermal_state(table: SpectrumTable, pops: PopulationVector) -> ComplexMatrix:
    """
    Diagonal density matrix in the computational basis for sorted-level populations.
    """
    diag = np.zeros(table.dimension)
    diag[list(table.order)] = pops.probs
    return np.diag(diag).astype(complex)


def is_hermitian(a: np.ndarray, atol: float = 1e-10) -> bool:
    return np.allclose(a, a.conj().T, rtol=0.0, atol=atol)


def expectation(obs: ComplexMatrix, state: ComplexMatrix) -> float:
    obs = np.asarray(obs, dtype=complex)
    state = np.asarray(state, dtype=complex)
    _check_square(obs, "obs")
    _check_square(state, "state")

    if obs.shape != state.shape:
        raise ValidationError(f"observable {obs.shape} and state {state.shape} differ in shape")
    if not is_hermitian(obs):
        raise ValidationError("observable is not Hermitian within 1e-10")
    if not is_hermitian(state):
        raise ValidationError("state is not Hermitian within 1e-10")
    if abs(np.trace(state) - 1.0) > 1e-10:
        raise ValidationError(f"state trace must be 1 within 1e-10, got {np.trace(state)}")

    value = np.trace(obs @ state)
    if abs(value.imag) >= 1e-9:
        raise NumericalError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)
