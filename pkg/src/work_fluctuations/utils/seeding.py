# src/work_fluctuations/utils/seeding.py

import numpy as np

# Stage tags mixed into every derived seed
STAGE_TAGS = {
    "noise": 1,
    "propagate": 2,
}


def derive_seed(master_seed: int, stage: str, trial: int = 0) -> int:
    """
    Deterministic child seed from (master seed, stage tag, trial index).

    The three values enter a numpy SeedSequence as entropy and spawn key,
    so different stages and trials never share a stream.
    """
    if stage not in STAGE_TAGS:
        raise KeyError(f"Unknown seed stage '{stage}'. Known stages: {list(STAGE_TAGS)}")
    if trial < 0:
        raise ValueError(f"trial index must be >= 0, got {trial}")

    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(STAGE_TAGS[stage], int(trial)))
    return int(seq.generate_state(1, dtype=np.uint32)[0])
