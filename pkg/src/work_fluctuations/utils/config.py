# src/work_fluctuations/utils/config.py

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from work_fluctuations.utils.errors import ValidationError

DIRECTIONS = ("forward", "backward")

# Pulse angles of the reference drive, radians
DEFAULT_ALPHA = (0.48, -0.80, math.pi / 2, -3.61, 0.69, math.pi / 2)
DEFAULT_GAMMA = (-0.83, 1.40, math.pi / 2, -3.65, 2.68, math.pi / 2)


def get_project_root() -> Path:
    """
    Get the root directory of the project.
    """
    # From src/work_fluctuations/utils/config.py, go up 3 levels to project root
    return Path(__file__).parents[3]


def load_config(config_name: str = "default.yaml") -> Dict[str, Any]:
    """
    Load a YAML config, either an explicit path or a name inside configs/ at
    the project root.

    Returns a nested dict, e.g. cfg["hamiltonian"]["j_coupling"].
    """
    config_path = Path(config_name)
    if not config_path.exists():
        config_path = get_project_root() / "configs" / config_name

    if not config_path.exists():
        raise FileNotFoundError(f"Config file not found: {config_path}")

    with open(config_path, "r") as f:
        cfg = yaml.safe_load(f)

    if cfg is None:
        raise ValueError(f"Config file {config_path} is empty or invalid")

    print(f"[config] Loaded {config_path}")
    return cfg


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Recursive dict merge; values from override win. Neither input is modified.
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


@dataclass
class RunConfig:
    dnu_h: float = 2000.0
    dnu_c: float = 4000.0
    j_coupling: float = 215.1
    alpha: List[float] = field(default_factory=lambda: list(DEFAULT_ALPHA))
    gamma: List[float] = field(default_factory=lambda: list(DEFAULT_GAMMA))
    steps_file: Optional[str] = None
    temperatures_peV: List[float] = field(default_factory=lambda: [20.0, 12.0, 9.0])
    backward_temperatures_peV: Optional[List[float]] = None
    sigma: float = 0.05
    seed: int = 1
    trials: int = 1000
    confidence: float = 0.99
    ratio_floor: float = 1e-6
    n_jobs: int = 1
    mle_tol: float = 1e-6
    mle_max_iter: int = 1000
    directions: List[str] = field(default_factory=lambda: list(DIRECTIONS))
    interacting: bool = True
    energy_scale_peV: Optional[float] = None
    output_dir: str = "data/outputs"
    reference_means: Optional[Dict[str, Dict[str, List[float]]]] = None

    @classmethod
    def from_dict(cls, cfg: Dict[str, Any], inversion: bool = True) -> "RunConfig":
        """
        Build from the nested layout used in configs/*.yaml. Missing keys keep
        their defaults.
        """
        ham = cfg.get("hamiltonian", {}) or {}
        protocol = cfg.get("protocol", {}) or {}
        noise = cfg.get("noise", {}) or {}
        prop = cfg.get("propagation", {}) or {}
        mle = cfg.get("mle", {}) or {}
        default = cls()

        run = cls(
            dnu_h=float(ham.get("dnu_h", default.dnu_h)),
            dnu_c=float(ham.get("dnu_c", default.dnu_c)),
            j_coupling=float(ham.get("j_coupling", default.j_coupling)),
            alpha=[float(a) for a in protocol.get("alpha", default.alpha)],
            gamma=[float(g) for g in protocol.get("gamma", default.gamma)],
            steps_file=protocol.get("steps_file", default.steps_file),
            temperatures_peV=[float(t) for t in cfg.get("temperatures_peV", default.temperatures_peV)],
            backward_temperatures_peV=(
                None if cfg.get("backward_temperatures_peV") is None
                else [float(t) for t in cfg["backward_temperatures_peV"]]
            ),
            sigma=float(noise.get("sigma", default.sigma)),
            seed=int(cfg.get("seed", default.seed)),
            trials=int(prop.get("trials", default.trials)),
            confidence=float(prop.get("confidence", default.confidence)),
            ratio_floor=float(prop.get("ratio_floor", default.ratio_floor)),
            n_jobs=int(prop.get("n_jobs", default.n_jobs)),
            mle_tol=float(mle.get("tol", default.mle_tol)),
            mle_max_iter=int(mle.get("max_iter", default.mle_max_iter)),
            directions=list(cfg.get("directions", default.directions)),
            interacting=bool(cfg.get("interacting", default.interacting)),
            energy_scale_peV=(
                None if cfg.get("energy_scale_peV") is None else float(cfg["energy_scale_peV"])
            ),
            output_dir=str(cfg.get("output_dir", default.output_dir)),
            reference_means=cfg.get("reference_means"),
        )
        run.validate(inversion=inversion)
        return run

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hamiltonian": {"dnu_h": self.dnu_h, "dnu_c": self.dnu_c, "j_coupling": self.j_coupling},
            "protocol": {"alpha": list(self.alpha), "gamma": list(self.gamma), "steps_file": self.steps_file},
            "temperatures_peV": list(self.temperatures_peV),
            "backward_temperatures_peV": (
                None if self.backward_temperatures_peV is None else list(self.backward_temperatures_peV)
            ),
            "noise": {"sigma": self.sigma},
            "seed": self.seed,
            "propagation": {
                "trials": self.trials,
                "confidence": self.confidence,
                "ratio_floor": self.ratio_floor,
                "n_jobs": self.n_jobs,
            },
            "mle": {"tol": self.mle_tol, "max_iter": self.mle_max_iter},
            "directions": list(self.directions),
            "interacting": self.interacting,
            "energy_scale_peV": self.energy_scale_peV,
            "output_dir": self.output_dir,
            "reference_means": self.reference_means,
        }

    def temperatures_for(self, direction: str) -> List[float]:
        if direction == "backward" and self.backward_temperatures_peV is not None:
            return list(self.backward_temperatures_peV)
        return list(self.temperatures_peV)

    def validate(self, inversion: bool = True) -> None:
        """
        Raise ValidationError with an actionable message on the first problem found.
        """
        for name in ("dnu_h", "dnu_c", "j_coupling"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"hamiltonian.{name} must be finite, got {getattr(self, name)}")
        if self.j_coupling < 0:
            raise ValidationError(f"hamiltonian.j_coupling must be >= 0, got {self.j_coupling}")
        if self.steps_file is None and (len(self.alpha) != 6 or len(self.gamma) != 6):
            raise ValidationError(
                f"protocol.alpha and protocol.gamma need 6 angles each, "
                f"got {len(self.alpha)} and {len(self.gamma)}"
            )
        if not all(math.isfinite(a) for a in list(self.alpha) + list(self.gamma)):
            raise ValidationError("protocol angles must be finite")

        bad_dirs = [d for d in self.directions if d not in DIRECTIONS]
        if bad_dirs or not self.directions:
            raise ValidationError(f"directions must be a non-empty subset of {DIRECTIONS}, got {self.directions}")

        for direction in self.directions:
            temps = self.temperatures_for(direction)
            if any(not (t > 0) for t in temps):
                raise ValidationError(f"{direction} temperatures must be > 0 peV, got {temps}")
            if inversion and len(set(temps)) < 3:
                raise ValidationError(
                    f"inversion needs at least 3 distinct temperatures, got {temps} for {direction}"
                )
        if self.backward_temperatures_peV is not None and len(self.backward_temperatures_peV) != len(self.temperatures_peV):
            raise ValidationError("backward_temperatures_peV must have as many entries as temperatures_peV")

        if self.sigma < 0:
            raise ValidationError(f"noise.sigma must be >= 0, got {self.sigma}")
        if self.mle_tol <= 0 or self.mle_max_iter < 1:
            raise ValidationError(f"mle.tol must be > 0 and mle.max_iter >= 1, got {self.mle_tol}, {self.mle_max_iter}")
        if not (0 < self.confidence < 1):
            raise ValidationError(f"propagation.confidence must be in (0, 1), got {self.confidence}")
        if self.ratio_floor < 0:
            raise ValidationError(f"propagation.ratio_floor must be >= 0, got {self.ratio_floor}")
        if self.trials < 0 or self.n_jobs < 1:
            raise ValidationError(f"propagation.trials must be >= 0 and n_jobs >= 1, got {self.trials}, {self.n_jobs}")
        if self.energy_scale_peV is not None and not (self.energy_scale_peV > 0):
            raise ValidationError(f"energy_scale_peV must be > 0 when set, got {self.energy_scale_peV}")


def load_run_config(
    config_name: str = "default.yaml",
    overrides: Optional[Dict[str, Any]] = None,
    inversion: bool = True,
) -> RunConfig:
    """
    Load a YAML config into a RunConfig. overrides is a nested dict applied
    underneath the file (file values win).
    """
    cfg = load_config(config_name)
    if overrides:
        cfg = merge_config(overrides, cfg)
    return RunConfig.from_dict(cfg, inversion=inversion)
