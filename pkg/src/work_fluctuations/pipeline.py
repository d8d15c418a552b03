# src/work_fluctuations/pipeline.py

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from work_fluctuations.data.measure import Dataset, add_noise, combine_datasets, simulate_observables
from work_fluctuations.inversion.projection import InversionReport
from work_fluctuations.inversion.reconstruct import invert_pipeline
from work_fluctuations.models.hilbert import (
    ComplexMatrix,
    HamiltonianSpec,
    PopulationVector,
    SpectrumTable,
    gibbs_populations,
    rescale_spectrum,
    spectrum,
)
from work_fluctuations.models.pulses import (
    ProtocolAngles,
    PulseStep,
    backward_steps,
    compose,
    default_delay,
    forward_steps,
    read_steps,
)
from work_fluctuations.models.tpm import (
    CrooksPoints,
    TransitionMatrix,
    WorkDistribution,
    crooks_points,
    transition_matrix,
    work_distribution,
)
from work_fluctuations.utils.config import RunConfig
from work_fluctuations.utils.seeding import derive_seed

KT_MATCH_RTOL = 1e-9


@dataclass
class Drive:
    steps: List[PulseStep]
    j_effective: float
    unitaries: Dict[str, ComplexMatrix]


def build_spectrum(cfg: RunConfig) -> SpectrumTable:
    """
    Final (= initial) Hamiltonian spectrum; J is dropped for the
    non-interacting comparison and energies are rescaled when an energy
    scale is configured.
    """
    spec = HamiltonianSpec(cfg.dnu_h, cfg.dnu_c, cfg.j_coupling)
    if not cfg.interacting:
        spec = spec.without_coupling()
    table = spectrum(spec)
    if cfg.energy_scale_peV is not None:
        table = rescale_spectrum(table, cfg.energy_scale_peV)
    return table


def build_drive(cfg: RunConfig) -> Drive:
    """
    Forward and backward unitaries. Pulse timing always follows the nominal
    coupling; only the coupling during free evolution is switched off in the
    non-interacting comparison.
    """
    if cfg.steps_file is not None:
        steps = read_steps(cfg.steps_file)
    else:
        angles = ProtocolAngles(alpha=tuple(cfg.alpha), gamma=tuple(cfg.gamma))
        steps = forward_steps(angles, default_delay(cfg.j_coupling))

    j_eff = cfg.j_coupling if cfg.interacting else 0.0
    unitaries = {
        "forward": compose(steps, j_eff),
        "backward": compose(backward_steps(steps), j_eff),
    }
    return Drive(steps=steps, j_effective=j_eff, unitaries=unitaries)


def prepare_populations(cfg: RunConfig, table: SpectrumTable) -> Dict[str, List[PopulationVector]]:
    return {
        direction: [gibbs_populations(table, kT) for kT in cfg.temperatures_for(direction)]
        for direction in cfg.directions
    }


def theory_dataset(cfg: RunConfig, table: SpectrumTable, drive: Drive) -> Dataset:
    """
    Noiseless observable means for every configured direction and temperature.
    """
    pops = prepare_populations(cfg, table)
    ds: Optional[Dataset] = None
    for direction in cfg.directions:
        part = simulate_observables(drive.unitaries[direction], pops[direction], table, direction=direction)
        ds = part if ds is None else combine_datasets(ds, part)
    return ds


def simulate_dataset(
    cfg: RunConfig,
    table: Optional[SpectrumTable] = None,
    drive: Optional[Drive] = None,
) -> Dataset:
    """
    Theory means plus Gaussian noise of width cfg.sigma, seeded from the
    master seed through the "noise" stage.
    """
    table = build_spectrum(cfg) if table is None else table
    drive = build_drive(cfg) if drive is None else drive
    ds = theory_dataset(cfg, table, drive)
    if cfg.sigma > 0:
        ds = add_noise(ds, cfg.sigma, derive_seed(cfg.seed, "noise"))
    ds.seed = cfg.seed
    ds.meta["interacting"] = cfg.interacting
    print(f"[simulate] {len(ds.records)} records, directions {ds.directions()}, sigma {cfg.sigma}")
    return ds


def oracle_matrices(table: SpectrumTable, drive: Drive, directions) -> Dict[str, TransitionMatrix]:
    return {d: transition_matrix(drive.unitaries[d], table, direction=d) for d in directions}


def invert_dataset(
    ds: Dataset,
    table: SpectrumTable,
    cfg: RunConfig,
    verbose: bool = True,
) -> Dict[str, InversionReport]:
    return {
        d: invert_pipeline(ds, table, direction=d, tol=cfg.mle_tol, max_iter=cfg.mle_max_iter, verbose=verbose)
        for d in ds.directions()
    }


def work_distributions(
    matrices: Dict[str, TransitionMatrix],
    ds: Dataset,
    table: SpectrumTable,
) -> Dict[Tuple[str, int], WorkDistribution]:
    """
    One distribution per (direction, temperature index), using the
    preparation populations stored with the dataset.
    """
    out = {}
    for direction, t in matrices.items():
        for i, kT in enumerate(ds.temperatures(direction)):
            out[(direction, i)] = work_distribution(ds.population(direction, kT), t, table)
    return out


def temperature_pairs(dists: Dict[Tuple[str, int], WorkDistribution]) -> List[int]:
    """
    Temperature indices that have both a forward and a backward distribution.
    """
    forward = {i for d, i in dists if d == "forward"}
    backward = {i for d, i in dists if d == "backward"}
    return sorted(forward & backward)


def kT_mismatch(forward: WorkDistribution, backward: WorkDistribution) -> bool:
    return not np.isclose(forward.kT_peV, backward.kT_peV, rtol=KT_MATCH_RTOL, atol=0.0)


def crooks_for(
    dists: Dict[Tuple[str, int], WorkDistribution],
    index: int,
    floor: float,
) -> CrooksPoints:
    forward, backward = dists[("forward", index)], dists[("backward", index)]
    if kT_mismatch(forward, backward):
        print(f"[crooks] warning: T{index} forward kT {forward.kT_peV:.4g} peV and backward kT "
              f"{backward.kT_peV:.4g} peV differ")
    return crooks_points(forward, backward, floor=floor)
