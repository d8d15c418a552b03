# src/work_fluctuations/stats/temperature.py

from dataclasses import dataclass

import numpy as np

from work_fluctuations.models.hilbert import PopulationVector, SpectrumTable, hz_to_peV
from work_fluctuations.utils.errors import ValidationError


@dataclass(frozen=True)
class TemperatureEstimate:
    """
    status is "finite", "infinite" (p0 == p2) or "negative" (p0 < p2).
    """
    kT_peV: float
    status: str = "finite"

    @property
    def is_finite(self) -> bool:
        return self.status == "finite"


def kT_from_populations(pops: PopulationVector, spec: SpectrumTable) -> TemperatureEstimate:
    """
    Spin temperature from the ground and second excited populations:
    kT = (e2 - e0) / ln(p0 / p2), reported in peV.
    """
    if spec.dimension < 3 or pops.probs.shape != (spec.dimension,):
        raise ValidationError("temperature estimate needs populations for at least 3 sorted levels")

    p0, p2 = float(pops.probs[0]), float(pops.probs[2])
    if p0 <= 0 or p2 <= 0:
        raise ValidationError(f"populations p0={p0}, p2={p2} must both be > 0 to estimate kT")

    gap_peV = float(hz_to_peV(spec.energies[2] - spec.energies[0]))
    if p0 == p2:
        return TemperatureEstimate(np.inf, "infinite")

    kT = gap_peV / np.log(p0 / p2)
    if kT < 0:
        return TemperatureEstimate(float(kT), "negative")
    return TemperatureEstimate(float(kT), "finite")
