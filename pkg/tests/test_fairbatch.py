from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chisquare

from core.dataset import Dataset, build_group_index, gen_synthetic
from core.errors import ConfigError, SamplingError
from core.fairbatch import (
    FairnessCriterion,
    SamplingDistribution,
    adjacent_gaps,
    convergence_envelope,
    draw_epoch,
    init_lambda,
    loss_weighted_within_group,
    multigroup_objectives,
    outer_loss_table,
    sampling_distribution,
    signed_gd_1d,
    uniform_distribution,
    update_lambda,
)
from core.metrics import GroupLossTable
from core.model import ModelParams, example_gradients


def _index(counts):
    """GroupIndex whose (y, z) cell sizes follow ``counts``."""
    counts = np.asarray(counts)
    labels, sensitive = [], []
    for (y, z), c in np.ndenumerate(counts):
        labels += [y] * int(c)
        sensitive += [z] * int(c)
    n = len(labels)
    d = Dataset(
        features=np.linspace(-1.0, 1.0, n).reshape(-1, 1),
        labels=labels,
        sensitive=sensitive,
        n_y=counts.shape[0],
        n_z=counts.shape[1],
    )
    return d, build_group_index(d)


def _table(means, counts):
    return GroupLossTable(means=np.asarray(means, dtype=float), counts=np.asarray(counts))


COUNTS = [[30, 20], [10, 40]]


def test_init_lambda_eqopp_is_uniform_point():
    _, gi = _index(COUNTS)
    crit = FairnessCriterion("eqopp")
    ls = init_lambda(crit, gi, 0.01)
    assert ls.d == 1
    assert ls.lam[0] == pytest.approx(10 / 100)
    assert ls.upper[0] == pytest.approx(50 / 100)
    sd = sampling_distribution(ls, crit, gi)
    np.testing.assert_allclose(sd.set_probs, np.asarray(COUNTS) / 100, atol=1e-15)
    np.testing.assert_allclose(sd.example_probs, np.full(100, 0.01), atol=1e-15)


def test_init_lambda_eqodds_and_dp_dimensions():
    _, gi = _index(COUNTS)
    eqodds = init_lambda(FairnessCriterion("eqodds"), gi, 0.01)
    np.testing.assert_allclose(eqodds.lam, [0.30, 0.10])
    np.testing.assert_allclose(eqodds.upper, [0.50, 0.50])
    dp = init_lambda(FairnessCriterion("dp"), gi, 0.01)
    np.testing.assert_allclose(dp.lam, [0.30, 0.20])
    np.testing.assert_allclose(dp.upper, [0.40, 0.60])


def test_uniform_distribution_matches_init_for_every_criterion():
    _, gi = _index(COUNTS)
    uniform = uniform_distribution(gi)
    for kind in ("eqopp", "eqodds", "dp"):
        crit = FairnessCriterion(kind)
        sd = sampling_distribution(init_lambda(crit, gi, 0.005), crit, gi)
        np.testing.assert_allclose(sd.set_probs, uniform.set_probs, atol=1e-15)


def test_single_group_is_a_config_error():
    _, gi = _index([[5], [5]])
    with pytest.raises(ConfigError):
        init_lambda(FairnessCriterion("eqopp"), gi, 0.01)


def test_dp_requires_binary_labels():
    _, gi = _index([[5, 5], [5, 5], [5, 5]])
    with pytest.raises(ConfigError):
        init_lambda(FairnessCriterion("dp"), gi, 0.01)


def test_empty_cell_in_block_is_a_sampling_error():
    _, gi = _index([[5, 5], [5, 0]])
    with pytest.raises(SamplingError):
        init_lambda(FairnessCriterion("eqopp"), gi, 0.01)


def test_negative_alpha_rejected():
    _, gi = _index(COUNTS)
    with pytest.raises(ConfigError):
        init_lambda(FairnessCriterion("eqopp"), gi, -0.1)


def test_eqopp_moves_mass_towards_the_worse_group():
    _, gi = _index(COUNTS)
    crit = FairnessCriterion("eqopp")
    ls = init_lambda(crit, gi, 0.01)
    worse_z0 = update_lambda(ls, crit, _table([[0.1, 0.1], [0.9, 0.3]], COUNTS))
    assert worse_z0.lam[0] == pytest.approx(0.11)
    worse_z1 = update_lambda(ls, crit, _table([[0.1, 0.1], [0.3, 0.9]], COUNTS))
    assert worse_z1.lam[0] == pytest.approx(0.09)


def test_threshold_suppresses_small_updates():
    _, gi = _index(COUNTS)
    crit = FairnessCriterion("eqopp", threshold=0.05)
    ls = init_lambda(crit, gi, 0.01)
    same = update_lambda(ls, crit, _table([[0.1, 0.1], [0.33, 0.30]], COUNTS))
    assert same is ls
    moved = update_lambda(ls, crit, _table([[0.1, 0.1], [0.40, 0.30]], COUNTS))
    assert moved.lam[0] > ls.lam[0]


def test_zero_disparity_keeps_lambda():
    _, gi = _index(COUNTS)
    crit = FairnessCriterion("eqopp")
    ls = init_lambda(crit, gi, 0.01)
    assert update_lambda(ls, crit, _table([[0.2, 0.4], [0.5, 0.5]], COUNTS)) is ls


def test_alpha_zero_keeps_lambda_constant():
    _, gi = _index(COUNTS)
    crit = FairnessCriterion("eqodds")
    ls = init_lambda(crit, gi, 0.0)
    updated = update_lambda(ls, crit, _table([[0.9, 0.1], [0.1, 0.9]], COUNTS))
    np.testing.assert_array_equal(updated.lam, ls.lam)


def test_eqodds_picks_the_larger_gap_and_later_class_on_ties():
    _, gi = _index(COUNTS)
    crit = FairnessCriterion("eqodds")
    ls = init_lambda(crit, gi, 0.01)
    y0 = update_lambda(ls, crit, _table([[0.9, 0.1], [0.5, 0.4]], COUNTS))
    assert y0.lam[0] == pytest.approx(0.31) and y0.lam[1] == pytest.approx(0.10)
    tie = update_lambda(ls, crit, _table([[0.6, 0.2], [0.2, 0.6]], COUNTS))
    assert tie.lam[0] == pytest.approx(0.30) and tie.lam[1] == pytest.approx(0.09)


def test_dp_signs():
    _, gi = _index([[25, 25], [25, 25]])
    crit = FairnessCriterion("dp")
    ls = init_lambda(crit, gi, 0.01)
    counts = [[25, 25], [25, 25]]
    # y=0 gap dominates and is positive: the z=0 coordinate goes down
    down = update_lambda(ls, crit, _table([[0.9, 0.1], [0.5, 0.45]], counts))
    np.testing.assert_allclose(down.lam, [0.24, 0.25])
    # y=1 gap dominates and is positive: the z=1 coordinate goes up
    up = update_lambda(ls, crit, _table([[0.5, 0.45], [0.9, 0.1]], counts))
    np.testing.assert_allclose(up.lam, [0.25, 0.26])


def test_clamp_keeps_lambda_in_bounds():
    _, gi = _index(COUNTS)
    crit = FairnessCriterion("eqopp")
    ls = init_lambda(crit, gi, 0.3)
    table = _table([[0.1, 0.1], [0.9, 0.3]], COUNTS)
    for _ in range(5):
        ls = update_lambda(ls, crit, table)
    assert ls.lam[0] == pytest.approx(ls.upper[0])
    sd = sampling_distribution(ls, crit, gi)
    assert sd.set_probs[1, 1] == pytest.approx(0.0, abs=1e-15)
    assert sd.set_probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_multigroup_updates_never_produce_negative_mass():
    _, gi = _index([[10, 10, 10], [5, 20, 15]])
    rng = np.random.default_rng(0)
    for kind in ("eqopp", "eqodds", "dp"):
        crit = FairnessCriterion(kind)
        ls = init_lambda(crit, gi, 0.05)
        for _ in range(200):
            ls = update_lambda(ls, crit, _table(rng.random((2, 3)), gi.counts))
            sd = sampling_distribution(ls, crit, gi)
            assert np.all(sd.set_probs >= 0)
            assert sd.set_probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_multigroup_eqopp_objectives_are_adjacent_pairs():
    objectives = multigroup_objectives(_table([[0, 0, 0], [0.5, 0.2, 0.4]], np.ones((2, 3))), FairnessCriterion("eqopp"))
    assert [o.dimension for o in objectives] == [0, 1]
    np.testing.assert_allclose([o.disparity for o in objectives], [0.3, -0.2])


def test_adjacent_gap_bound_over_random_vectors():
    rng = np.random.default_rng(11)
    for _ in range(500):
        n_z = int(rng.integers(2, 9))
        eps = float(rng.uniform(0.001, 0.5))
        steps = rng.uniform(-eps, eps, size=n_z - 1)
        losses = rng.normal() + np.concatenate([[0.0], np.cumsum(steps)])
        assert np.all(np.abs(adjacent_gaps(losses)) <= eps + 1e-12)
        assert losses.max() - losses.min() <= (n_z - 1) * eps + 1e-12


def test_draw_epoch_shapes_and_membership():
    d, gi = _index(COUNTS)
    sd = uniform_distribution(gi)
    plan = draw_epoch(sd, 7, 5, np.random.default_rng(0))
    assert plan.batches.shape == (5, 7)
    assert plan.batches_per_epoch == 5
    assert all(batch.size == 7 for batch in plan)
    assert plan.batches.min() >= 0 and plan.batches.max() < d.n


def test_draw_epoch_cell_frequencies_follow_lambda():
    _, gi = _index(COUNTS)
    crit = FairnessCriterion("eqopp")
    ls = init_lambda(crit, gi, 0.2)
    ls = update_lambda(ls, crit, _table([[0.1, 0.1], [0.9, 0.3]], COUNTS))
    sd = sampling_distribution(ls, crit, gi)
    plan = draw_epoch(sd, 100, 200, np.random.default_rng(3))
    cell_of = np.empty(gi.m, dtype=int)
    for flat, cell in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        cell_of[gi.rows(*cell)] = flat
    observed = np.bincount(cell_of[plan.batches.ravel()], minlength=4)
    expected = sd.set_probs.ravel() * observed.sum()
    assert chisquare(observed, expected).pvalue > 1e-4


def test_stratified_batches_have_fixed_cell_counts():
    _, gi = _index(COUNTS)
    sd = uniform_distribution(gi)
    plan = draw_epoch(sd, 10, 20, np.random.default_rng(1), mode="stratified")
    y0z0 = np.isin(plan.batches, gi.rows(0, 0)).sum(axis=1)
    y1z1 = np.isin(plan.batches, gi.rows(1, 1)).sum(axis=1)
    assert np.all(y0z0 == 3)
    assert np.all(y1z1 == 4)


def test_draw_epoch_is_deterministic_per_generator_seed():
    _, gi = _index(COUNTS)
    sd = uniform_distribution(gi)
    a = draw_epoch(sd, 10, 4, np.random.default_rng(9))
    b = draw_epoch(sd, 10, 4, np.random.default_rng(9))
    np.testing.assert_array_equal(a.batches, b.batches)


def test_draw_epoch_rejects_mass_on_empty_cell():
    _, gi = _index([[5, 0], [5, 5]])
    probs = np.full((2, 2), 0.25)
    sd = SamplingDistribution(set_probs=probs, example_probs=np.full(gi.m, 1 / gi.m), index=gi)
    with pytest.raises(SamplingError):
        draw_epoch(sd, 4, 1, np.random.default_rng(0))


def test_draw_epoch_rejects_empty_batch_size():
    _, gi = _index(COUNTS)
    with pytest.raises(SamplingError):
        draw_epoch(uniform_distribution(gi), 0, 1, np.random.default_rng(0))


def test_single_draw_gradient_is_unbiased():
    d = gen_synthetic(300, seed=5)
    gi = build_group_index(d)
    p = ModelParams(weights=[0.3, -0.1], bias=0.05)
    gw, gb = example_gradients(p, d.features, d.labels)
    per_example = np.column_stack([gw, gb])
    rng = np.random.default_rng(17)
    draws = 100_000

    for kind in ("eqopp", "eqodds", "dp"):
        crit = FairnessCriterion(kind)
        base = init_lambda(crit, gi, 0.0)
        for _ in range(7):
            # random lambda inside the ordered box of each block
            lam = np.array(base.lam)
            for block in base.blocks:
                cuts = np.sort(rng.uniform(0.0, block.total, size=block.dims))
                lam[block.offset : block.offset + block.dims] = cuts
            ls = replace(base, lam=lam)
            sd = sampling_distribution(ls, crit, gi)
            plan = draw_epoch(sd, 1, draws, rng)
            sampled = per_example[plan.batches.ravel()]

            expected = sd.example_probs @ per_example
            spread = np.sqrt(sd.example_probs @ (per_example - expected) ** 2)
            stderr = spread / np.sqrt(draws)
            # 3 standard errors per coordinate
            assert np.all(np.abs(sampled.mean(axis=0) - expected) <= 3 * stderr + 1e-12)


def test_outer_loss_table_uses_ones_target_for_dp():
    d = Dataset(features=[[2.0], [-2.0], [2.0], [-2.0]], labels=[0, 0, 1, 1], sensitive=[0, 1, 0, 1], n_y=2, n_z=2)
    gi = build_group_index(d)
    p = ModelParams(weights=[1.0], bias=0.0)
    eqopp = outer_loss_table(p, d, gi, FairnessCriterion("eqopp"))
    dp = outer_loss_table(p, d, gi, FairnessCriterion("dp"))
    assert eqopp.cell(0, 0) > dp.cell(0, 0)
    assert dp.cell(1, 1) == pytest.approx(eqopp.cell(1, 1))


def test_loss_weighting_keeps_set_masses_and_favours_high_loss():
    _, gi = _index(COUNTS)
    sd = uniform_distribution(gi)
    losses = np.linspace(0.0, 1.0, gi.m)
    weighted = loss_weighted_within_group(sd, losses, temperature=1.0)
    np.testing.assert_array_equal(weighted.set_probs, sd.set_probs)
    for (y, z), rows in gi.cells.items():
        assert weighted.example_probs[rows].sum() == pytest.approx(sd.set_probs[y, z])
        top = rows[np.argmax(losses[rows])]
        assert weighted.example_probs[top] == weighted.example_probs[rows].max()


def test_loss_weighting_temperature_zero_is_identity():
    _, gi = _index(COUNTS)
    sd = uniform_distribution(gi)
    weighted = loss_weighted_within_group(sd, np.random.default_rng(0).random(gi.m), temperature=0.0)
    np.testing.assert_allclose(weighted.example_probs, sd.example_probs, atol=1e-15)


def test_loss_weighting_rejects_wrong_length():
    _, gi = _index(COUNTS)
    with pytest.raises(SamplingError):
        loss_weighted_within_group(uniform_distribution(gi), np.ones(3))


def test_signed_gd_reaches_minimiser_of_a_v_shape():
    target = 0.37

    def components(lam):
        # f decreasing, g increasing, crossing at target
        return target - lam, lam - target

    trajectory = signed_gd_1d(components, 0.0, 0.01, 100, 1.0)
    assert trajectory.size == 101
    assert abs(trajectory[-1] - target) <= 0.01 + 1e-12
    envelope = convergence_envelope(0.0, target, 0.01, np.arange(101))
    assert np.all(np.abs(trajectory - target) <= envelope + 1e-12)


def test_signed_gd_stays_in_box():
    trajectory = signed_gd_1d(lambda lam: (1.0, 0.0), 0.95, 0.1, 10, 1.0)
    assert trajectory.max() == 1.0
    trajectory = signed_gd_1d(lambda lam: (0.0, 1.0), 0.05, 0.1, 10, 1.0)
    assert trajectory.min() == 0.0


def test_signed_gd_rejects_non_positive_alpha():
    with pytest.raises(ConfigError):
        signed_gd_1d(lambda lam: (0.0, 0.0), 0.5, 0.0, 10, 1.0)


def test_convergence_envelope_floor():
    assert convergence_envelope(0.0, 0.5, 0.1, 3) == pytest.approx(0.2)
    assert convergence_envelope(0.0, 0.5, 0.1, 100) == pytest.approx(0.1)


def test_multigroup_update_follows_the_largest_gap():
    counts = [[20, 20, 20], [20, 20, 20]]
    table = _table([[0.0, 0.0, 0.0], [0.2, 0.5, 0.4]], counts)
    crit = FairnessCriterion("eqopp")
    objectives = multigroup_objectives(table, crit)
    np.testing.assert_allclose([o.disparity for o in objectives], [-0.3, 0.1])

    _, gi = _index(counts)
    ls = init_lambda(crit, gi, 0.01)
    moved = update_lambda(ls, crit, table)
    assert moved.lam[0] == pytest.approx(ls.lam[0] - 0.01)
    assert moved.lam[1] == ls.lam[1]


def test_loss_weighting_two_examples_by_hand():
    _, gi = _index([[2, 1], [1, 1]])
    sd = uniform_distribution(gi)
    first, second = gi.rows(0, 0)
    losses = np.zeros(gi.m)
    losses[first] = 1.0
    weighted = loss_weighted_within_group(sd, losses, temperature=1.5)
    # rank 1 for the larger loss, rank 2 for the other
    assert weighted.example_probs[first] / weighted.example_probs[second] == pytest.approx(2**1.5)
    assert weighted.example_probs[first] + weighted.example_probs[second] == pytest.approx(sd.set_probs[0, 0])


def test_uniform_draws_hit_every_example_equally_often():
    _, gi = _index([[25, 25], [25, 25]])
    plan = draw_epoch(uniform_distribution(gi), 100, 10_000, np.random.default_rng(5))
    hits = np.bincount(plan.batches.ravel(), minlength=100)
    draws = plan.batches.size
    sigma = np.sqrt(draws * 0.01 * 0.99)
    deviation = np.abs(hits - draws * 0.01)
    # 100 examples are compared at once; a handful may sit just past 3 sigma
    assert np.mean(deviation <= 3 * sigma) >= 0.95
    assert np.all(deviation <= 4 * sigma)
