from dataclasses import replace

import numpy as np
import pytest

from work_fluctuations.models.hilbert import gibbs_populations
from work_fluctuations.models.tpm import (
    TransitionMatrix,
    WorkDistribution,
    crooks_points,
    jarzynski_functional,
    mean_work,
    micro_reversibility_gap,
    transition_matrix,
    work_distribution,
)
from work_fluctuations.pipeline import build_drive, build_spectrum, oracle_matrices, work_distributions
from work_fluctuations.utils.errors import ValidationError


def test_identity_drive_gives_spike_at_zero(default_table):
    t = transition_matrix(np.eye(4), default_table)
    np.testing.assert_allclose(t.p, np.eye(4))

    dist = work_distribution(gibbs_populations(default_table, 12.0), t, default_table)
    np.testing.assert_allclose(dist.support(1e-12), [0.0])
    assert dist.probability_at(0.0) == pytest.approx(1.0)
    assert mean_work(dist) == pytest.approx(0.0, abs=1e-12)


def test_oracle_matrices_bistochastic(default_table, default_drive):
    for t in oracle_matrices(default_table, default_drive, ["forward", "backward"]).values():
        assert t.is_bistochastic()
        assert t.provenance == "oracle"


def test_micro_reversibility(default_table, default_drive):
    oracle = oracle_matrices(default_table, default_drive, ["forward", "backward"])
    assert micro_reversibility_gap(oracle["forward"], oracle["backward"]) < 1e-12


def test_non_unitary_rejected(default_table):
    with pytest.raises(ValidationError):
        transition_matrix(2 * np.eye(4), default_table)
    with pytest.raises(ValidationError):
        transition_matrix(np.eye(2), default_table)


def test_transition_matrix_validation():
    with pytest.raises(ValidationError):
        TransitionMatrix(np.ones((2, 3)))
    with pytest.raises(ValidationError):
        TransitionMatrix(np.eye(2), direction="sideways")
    with pytest.raises(ValidationError):
        TransitionMatrix(np.full((2, 2), 0.6), provenance="oracle").check()

    near = TransitionMatrix(np.eye(2) + 5e-7 * np.array([[1, -1], [-1, 1]]), provenance="reconstructed")
    assert near.is_bistochastic()
    assert not TransitionMatrix(near.p, provenance="oracle").is_bistochastic()


def test_work_distribution_sums_to_one(default_table, default_drive, noiseless_dataset):
    matrices = oracle_matrices(default_table, default_drive, ["forward", "backward"])
    dists = work_distributions(matrices, noiseless_dataset, default_table)
    assert set(dists) == {(d, i) for d in ("forward", "backward") for i in range(3)}
    for dist in dists.values():
        assert dist.prob.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(dist.work) > 0)


# --- fluctuation theorems ---

def test_jarzynski_equality(default_table, default_drive, noiseless_dataset):
    matrices = oracle_matrices(default_table, default_drive, ["forward", "backward"])
    for dist in work_distributions(matrices, noiseless_dataset, default_table).values():
        assert jarzynski_functional(dist, dist.kT_hz) == pytest.approx(1.0, abs=1e-12)

    with pytest.raises(ValidationError):
        jarzynski_functional(dist, 0.0)


def test_crooks_ratio_is_linear(default_table, default_drive, noiseless_dataset):
    matrices = oracle_matrices(default_table, default_drive, ["forward", "backward"])
    dists = work_distributions(matrices, noiseless_dataset, default_table)
    for i in range(3):
        fwd, bwd = dists[("forward", i)], dists[("backward", i)]
        pts = crooks_points(fwd, bwd, floor=1e-6)
        assert len(pts.work) >= 3
        np.testing.assert_allclose(pts.ln_ratio, pts.work / fwd.kT_hz, atol=1e-8)


def test_crooks_unpaired_values():
    fwd = WorkDistribution(np.array([-1.0, 0.0, 2.0]), np.array([0.2, 0.5, 0.3]))
    bwd = WorkDistribution(np.array([0.0, 1.0]), np.array([0.6, 0.4]), direction="backward")
    pts = crooks_points(fwd, bwd)
    np.testing.assert_allclose(pts.work, [-1.0, 0.0])
    np.testing.assert_allclose(pts.ln_ratio, [np.log(0.2 / 0.4), np.log(0.5 / 0.6)])
    assert pts.unpaired == [2.0]
    assert pts.below_floor == []


def test_crooks_reports_points_below_floor():
    fwd = WorkDistribution(np.array([-1.0, 0.0, 1.0]), np.array([0.3, 0.7 - 1e-8, 1e-8]))
    bwd = WorkDistribution(np.array([-1.0, 0.0, 1.0]), np.array([0.2, 0.6, 0.2]), direction="backward")
    pts = crooks_points(fwd, bwd, floor=1e-6)
    np.testing.assert_allclose(pts.work, [-1.0, 0.0])
    assert pts.below_floor == [1.0]
    assert pts.unpaired == []


def test_non_interacting_support_differs(noiseless_cfg, noiseless_dataset, default_table, default_drive):
    coupled = work_distributions(oracle_matrices(default_table, default_drive, ["forward"]), noiseless_dataset, default_table)

    free_cfg = replace(noiseless_cfg, interacting=False)
    free_table = build_spectrum(free_cfg)
    free_drive = build_drive(free_cfg)
    assert free_drive.j_effective == 0.0

    pops = gibbs_populations(free_table, 20.0)
    t = transition_matrix(free_drive.unitaries["forward"], free_table)
    free_dist = work_distribution(pops, t, free_table)

    assert set(np.round(free_dist.support(1e-12), 6)) != set(np.round(coupled[("forward", 0)].support(1e-12), 6))


def test_jarzynski_fails_at_wrong_temperature(default_table, default_drive, noiseless_dataset):
    matrices = oracle_matrices(default_table, default_drive, ["forward"])
    dist = work_distributions(matrices, noiseless_dataset, default_table)[("forward", 0)]
    other = gibbs_populations(default_table, 9.0)
    assert abs(jarzynski_functional(dist, other.kT_hz) - 1.0) > 1e-3


def test_swap_exchanges_the_mixed_levels(default_table):
    swap = np.eye(4)[[0, 2, 1, 3]]
    t = transition_matrix(swap, default_table)
    labels = default_table.labels
    expected = np.array([[float(labels[m] == labels[n][::-1]) for n in range(4)] for m in range(4)])
    np.testing.assert_allclose(t.p, expected, atol=1e-15)
    assert np.trace(t.p) == pytest.approx(2.0)
