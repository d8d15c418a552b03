# src/work_fluctuations/models/pulses.py

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from work_fluctuations.models.hilbert import (
    IDENTITY2,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    ComplexMatrix,
    tensor,
)
from work_fluctuations.utils.errors import DatasetFormatError, ValidationError

PAULI = {"x": SIGMA_X, "y": SIGMA_Y}
QUBITS = ("H", "C")
STEP_COLUMNS = ["kind", "axis", "qubit", "angle", "duration"]
STEPS_HEADER = "# work-fluctuations steps v1"


@dataclass(frozen=True)
class ProtocolAngles:
    """
    Rotation angles (radians) of the driving sequence; alpha goes to H, gamma to C.
    """
    alpha: tuple
    gamma: tuple

    def __post_init__(self):
        if len(self.alpha) != 6 or len(self.gamma) != 6:
            raise ValidationError(f"need 6 alpha and 6 gamma angles, got {len(self.alpha)} and {len(self.gamma)}")
        if not all(math.isfinite(a) for a in tuple(self.alpha) + tuple(self.gamma)):
            raise ValidationError("protocol angles must be finite")

    @classmethod
    def zeros(cls) -> "ProtocolAngles":
        return cls(alpha=(0.0,) * 6, gamma=(0.0,) * 6)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "ProtocolAngles":
        draws = rng.uniform(-np.pi, np.pi, size=12)
        return cls(alpha=tuple(draws[:6]), gamma=tuple(draws[6:]))


@dataclass(frozen=True)
class PulseStep:
    kind: str
    axis: Optional[str] = None
    qubit: Optional[str] = None
    angle: Optional[float] = None
    duration: Optional[float] = None

    def __post_init__(self):
        if self.kind == "rotation":
            if self.axis not in PAULI:
                raise ValidationError(f"rotation axis must be 'x' or 'y', got {self.axis!r}")
            if self.qubit not in QUBITS:
                raise ValidationError(f"rotation qubit must be 'H' or 'C', got {self.qubit!r}")
            if self.angle is None or not math.isfinite(self.angle):
                raise ValidationError(f"rotation angle must be finite, got {self.angle!r}")
            if self.duration is not None:
                raise ValidationError("a rotation step has no duration")
        elif self.kind == "free":
            if self.axis is not None or self.angle is not None or self.qubit is not None:
                raise ValidationError("a free-evolution step has no axis, qubit or angle")
            if self.duration is None or not (self.duration >= 0):
                raise ValidationError(f"free-evolution duration must be >= 0, got {self.duration!r}")
        else:
            raise ValidationError(f"step kind must be 'rotation' or 'free', got {self.kind!r}")


def rotation(axis: str, angle: float, qubit: str) -> ComplexMatrix:
    """
    exp(-i angle sigma_axis / 2) on one qubit, identity on the other.
    """
    if axis not in PAULI:
        raise ValidationError(f"axis must be 'x' or 'y', got {axis!r}")
    if qubit not in QUBITS:
        raise ValidationError(f"qubit must be 'H' or 'C', got {qubit!r}")
    if not math.isfinite(angle):
        raise ValidationError(f"angle must be finite, got {angle}")

    single = math.cos(angle / 2) * IDENTITY2 - 1j * math.sin(angle / 2) * PAULI[axis]
    if qubit == "H":
        return tensor(single, IDENTITY2)
    return tensor(IDENTITY2, single)


def free_evolution(j: float, t: float) -> ComplexMatrix:
    """
    exp(-i 2pi (J/4) sz_H sz_C t), diagonal.
    """
    if t < 0:
        raise ValidationError(f"free-evolution time must be >= 0, got {t}")
    zz = np.diag(tensor(SIGMA_Z, SIGMA_Z)).real
    return np.diag(np.exp(-1j * 2 * np.pi * (j / 4) * zz * t))


def step_unitary(step: PulseStep, j_coupling: float) -> ComplexMatrix:
    if step.kind == "rotation":
        return rotation(step.axis, step.angle, step.qubit)
    return free_evolution(j_coupling, step.duration)


def compose(steps: Sequence[PulseStep], j_coupling: float) -> ComplexMatrix:
    """
    Time-ordered product of the steps: the first step acts first.
    """
    u = np.eye(4, dtype=complex)
    for step in steps:
        u = step_unitary(step, j_coupling) @ u
    return u


def default_delay(j_coupling: float) -> float:
    return 0.0 if j_coupling == 0 else 1.0 / (2.0 * j_coupling)


def forward_steps(angles: ProtocolAngles, delay: float) -> List[PulseStep]:
    """
    Three layers of x then y rotations on both spins, separated by two free
    evolutions of length delay. Layer k uses alpha/gamma indices 2k-1, 2k.
    """
    steps: List[PulseStep] = []
    for layer in range(3):
        if layer > 0:
            steps.append(PulseStep("free", duration=delay))
        for axis, idx in (("x", 2 * layer), ("y", 2 * layer + 1)):
            steps.append(PulseStep("rotation", axis=axis, qubit="H", angle=float(angles.alpha[idx])))
            steps.append(PulseStep("rotation", axis=axis, qubit="C", angle=float(angles.gamma[idx])))
    return steps


def backward_steps(steps: Sequence[PulseStep]) -> List[PulseStep]:
    """
    Time reverse of a step list: inverse order, negated angles, and every
    free evolution refocused by a pi_x pair on H (sx U_J sx = U_J^dagger).
    """
    reversed_steps: List[PulseStep] = []
    for step in reversed(steps):
        if step.kind == "rotation":
            reversed_steps.append(PulseStep("rotation", axis=step.axis, qubit=step.qubit, angle=-step.angle))
        else:
            reversed_steps.append(PulseStep("rotation", axis="x", qubit="H", angle=-math.pi))
            reversed_steps.append(step)
            reversed_steps.append(PulseStep("rotation", axis="x", qubit="H", angle=math.pi))
    return reversed_steps


def build_forward(angles: ProtocolAngles, j_coupling: float, delay: Optional[float] = None) -> ComplexMatrix:
    if delay is None:
        delay = default_delay(j_coupling)
    return compose(forward_steps(angles, delay), j_coupling)


def build_backward(angles: ProtocolAngles, j_coupling: float, delay: Optional[float] = None) -> ComplexMatrix:
    if delay is None:
        delay = default_delay(j_coupling)
    return compose(backward_steps(forward_steps(angles, delay)), j_coupling)


def cnot_steps(j_coupling: float) -> List[PulseStep]:
    """
    CNOT with C as control and H as target, from x/y pulses and one 1/(2J)
    coupling period: R_y^H(pi/2) . CZ . R_y^H(-pi/2), with
    CZ ~ U_J(1/2J) R_z^H(-pi/2) R_z^C(-pi/2) and R_z(t) = R_x(pi/2) R_y(t) R_x(-pi/2).
    """
    if j_coupling <= 0:
        raise ValidationError("the CNOT readout needs a nonzero scalar coupling")

    steps = [PulseStep("rotation", axis="y", qubit="H", angle=-math.pi / 2)]
    for qubit in QUBITS:
        steps += [
            PulseStep("rotation", axis="x", qubit=qubit, angle=-math.pi / 2),
            PulseStep("rotation", axis="y", qubit=qubit, angle=-math.pi / 2),
            PulseStep("rotation", axis="x", qubit=qubit, angle=math.pi / 2),
        ]
    steps.append(PulseStep("free", duration=default_delay(j_coupling)))
    steps.append(PulseStep("rotation", axis="y", qubit="H", angle=math.pi / 2))
    return steps


def canonical_cnot() -> ComplexMatrix:
    """
    |h, c> -> |h xor c, c> in the index = 2h + c basis.
    """
    u = np.zeros((4, 4), dtype=complex)
    for h in (0, 1):
        for c in (0, 1):
            u[2 * (h ^ c) + c, 2 * h + c] = 1.0
    return u


def equivalent_up_to_phase(a: ComplexMatrix, b: ComplexMatrix, atol: float = 1e-10) -> bool:
    overlap = np.trace(b.conj().T @ a) / a.shape[0]
    if abs(abs(overlap) - 1.0) > atol:
        return False
    phase = overlap / abs(overlap)
    return bool(np.allclose(a, phase * b, rtol=0.0, atol=atol))


def readout_prefix(k: int, j_coupling: float = 215.1) -> ComplexMatrix:
    """
    S^0 is the identity, S^1 the pulse-built CNOT (checked against the
    canonical gate up to a global phase).
    """
    if k == 0:
        return np.eye(4, dtype=complex)
    if k != 1:
        raise ValidationError(f"readout index k must be 0 or 1, got {k}")

    s1 = compose(cnot_steps(j_coupling), j_coupling)
    if not equivalent_up_to_phase(s1, canonical_cnot(), atol=1e-9):
        raise ValidationError("pulse-built S^1 does not match the CNOT gate")
    return s1


def write_steps(steps: Sequence[PulseStep], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([{col: getattr(s, col) for col in STEP_COLUMNS} for s in steps], columns=STEP_COLUMNS)
    with open(path, "w", newline="") as f:
        f.write(STEPS_HEADER + "\n")
        frame.to_csv(f, index=False)
    print(f"[pulses] Wrote {len(steps)} steps to {path}")
    return path


def read_steps(path: Path) -> List[PulseStep]:
    """
    Read a CSV step file: kind, axis, qubit, angle, duration (one step per row).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Step file not found: {path}")

    frame = pd.read_csv(path, comment="#", dtype={"kind": str, "axis": str, "qubit": str})
    missing = [c for c in STEP_COLUMNS if c not in frame.columns]
    if missing:
        raise DatasetFormatError(f"missing columns {missing} in {path}", line=1)

    steps = []
    # +3: 1-based lines, header comment, column header
    for row_idx, row in enumerate(frame.itertuples(index=False)):
        line = row_idx + 3
        kind = row.kind
        try:
            if kind == "rotation":
                steps.append(PulseStep("rotation", axis=row.axis, qubit=row.qubit, angle=float(row.angle)))
            elif kind == "free":
                steps.append(PulseStep("free", duration=float(row.duration)))
            else:
                raise DatasetFormatError(f"unknown step kind {kind!r}", line=line, field="kind")
        except ValidationError as exc:
            if isinstance(exc, DatasetFormatError):
                raise
            raise DatasetFormatError(str(exc), line=line) from exc
    return steps
