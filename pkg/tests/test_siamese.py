"""Monotone siamese scorer: losses, gradients, training behavior."""

import numpy as np
import pytest

from aqindex import backend as backend_mod
from aqindex.cohort import (
    SyntheticSpec,
    generate,
    make_pairs,
    make_triplets,
    pair_arrays,
    triplet_arrays,
)
from aqindex.features import N_FEATURES
from aqindex.siamese import (
    DEFAULT_SIZES,
    BadArchitecture,
    SiameseNet,
    TrainConfig,
    contrastive_loss,
    gradient_check_contrastive,
    gradient_check_triplet,
    n_params,
    train_contrastive,
    train_triplet,
    triplet_loss,
)


# ---------------------------------------------------------------------------
# architecture


def test_default_architecture_param_count():
    assert n_params(DEFAULT_SIZES) == 21 * 16 + 16 + 16 * 8 + 8 + 8 * 1 + 1


def test_init_is_seeded():
    a = SiameseNet.init(seed=5)
    b = SiameseNet.init(seed=5)
    np.testing.assert_array_equal(a.omega, b.omega)
    c = SiameseNet.init(seed=6)
    assert not np.array_equal(a.omega, c.omega)


def test_input_width_is_fixed():
    with pytest.raises(BadArchitecture):
        SiameseNet.init(layer_sizes=(10, 4, 1))


def test_output_must_be_scalar():
    with pytest.raises(BadArchitecture):
        SiameseNet.init(layer_sizes=(21, 8, 2))


def test_at_least_two_layers():
    with pytest.raises(BadArchitecture):
        SiameseNet.init(layer_sizes=(21,))


def test_omega_length_is_validated():
    with pytest.raises(ValueError):
        SiameseNet(sizes=(21, 8, 1), omega=np.zeros(5))


def test_scores_live_in_unit_interval():
    net = SiameseNet.init(seed=1)
    x = np.random.default_rng(1).uniform(0, 1, (40, N_FEATURES))
    s = net.score(x)
    assert s.shape == (40,)
    assert np.all((s > 0) & (s < 1))


def test_untrained_net_is_already_monotone():
    # squared weights make the forward map monotone regardless of training
    net = SiameseNet.init(seed=2)
    rng = np.random.default_rng(2)
    x = rng.uniform(0, 1, N_FEATURES)
    y = np.minimum(1.0, x + rng.uniform(0, 0.4, N_FEATURES))
    assert net.score(y[None, :])[0] >= net.score(x[None, :])[0] - 1e-12


def test_roundtrip_dict():
    net = SiameseNet.init(seed=3)
    d = net.to_dict()
    back = SiameseNet.from_dict(d)
    assert back.sizes == net.sizes
    np.testing.assert_allclose(back.omega, net.omega)


# ---------------------------------------------------------------------------
# loss values


def test_contrastive_similar_pair_penalizes_distance():
    # y=1: loss is the squared score gap
    assert contrastive_loss(0.8, 0.5, 1, 0.5) == pytest.approx(0.09)


def test_contrastive_dissimilar_pair_inside_margin():
    # y=0 and gap below margin: squared shortfall
    assert contrastive_loss(0.6, 0.5, 0, 0.5) == pytest.approx(0.16)


def test_contrastive_dissimilar_pair_beyond_margin_is_free():
    assert contrastive_loss(0.9, 0.1, 0, 0.5) == 0.0


def test_contrastive_identical_dissimilar_pair_costs_margin_squared():
    m = 0.37
    assert contrastive_loss(0.5, 0.5, 0, m) == pytest.approx(m * m)


def test_contrastive_identical_similar_pair_is_free():
    assert contrastive_loss(0.5, 0.5, 1, 0.5) == 0.0


def test_triplet_satisfied_marginally():
    # anchor sits on the positive and far from the negative: hinge off
    assert triplet_loss(0.9, 0.9, 0.1, 0.5) == 0.0


def test_triplet_degenerate_costs_margin_squared():
    m = 0.5
    assert triplet_loss(0.5, 0.5, 0.5, m) == pytest.approx(m * m)


def test_triplet_partial_violation():
    # d_ap = 0.1, d_an = 0.3, margin 0.5 -> hinge 0.3 -> 0.09
    assert triplet_loss(0.5, 0.4, 0.8, 0.5) == pytest.approx(0.09)


def test_losses_accept_arrays():
    sa = np.array([0.8, 0.6])
    sb = np.array([0.5, 0.5])
    y = np.array([1, 0])
    out = contrastive_loss(sa, sb, y, 0.5)
    np.testing.assert_allclose(out, [0.09, 0.16])


# ---------------------------------------------------------------------------
# gradient checks


def batch(seed, n=12):
    rng = np.random.default_rng(seed)
    return (rng.uniform(0, 1, (n, N_FEATURES)),
            rng.uniform(0, 1, (n, N_FEATURES)),
            (rng.uniform(size=n) > 0.5).astype(float))


def test_contrastive_gradient_matches_finite_differences():
    net = SiameseNet.init(seed=11, scale=0.8)
    xa, xb, y = batch(11)
    report = gradient_check_contrastive(net, xa, xb, y)
    assert report.max_rel_error <= 1e-4
    assert report.n_samples_used > 0


def test_triplet_gradient_matches_finite_differences():
    net = SiameseNet.init(seed=12, scale=0.8)
    xa, xp, _ = batch(12)
    xn = np.random.default_rng(13).uniform(0, 1, xa.shape)
    report = gradient_check_triplet(net, xa, xp, xn)
    assert report.max_rel_error <= 1e-4


def test_gradient_check_over_many_nets():
    # larger init scales keep the raw scores spread out; tiny scales
    # saturate the net and push every pair inside the kink-skip zone
    worst = 0.0
    for seed in range(6):
        net = SiameseNet.init(seed=seed, scale=2.0 + 0.2 * seed)
        xa, xb, y = batch(100 + seed, n=8)
        rep = gradient_check_contrastive(net, xa, xb, y)
        assert rep.n_samples_used >= 6
        worst = max(worst, rep.max_rel_error)
    assert worst <= 1e-4


def test_tampered_gradient_is_caught():
    net = SiameseNet.init(seed=14)
    xa, xb, y = batch(14)
    bad = gradient_check_contrastive(net, xa, xb, y, tamper_index=3)
    assert bad.max_rel_error > 1e-2


def test_pairs_at_hinge_are_skipped():
    # engineered dissimilar pair of identical inputs: |s_a - s_b| = 0 is a
    # subgradient kink, so the checker must not use it
    net = SiameseNet.init(seed=15)
    rng = np.random.default_rng(15)
    x_kink = rng.uniform(0, 1, (1, N_FEATURES))
    x_a = np.vstack([x_kink, rng.uniform(0, 1, (1, N_FEATURES))])
    x_b = np.vstack([x_kink.copy(), rng.uniform(0, 1, (1, N_FEATURES))])
    report = gradient_check_contrastive(net, x_a, x_b, np.array([0.0, 1.0]))
    assert report.n_samples_skipped == 1
    assert report.n_samples_used == 1


def test_batch_of_only_kinks_is_rejected():
    net = SiameseNet.init(seed=15)
    x = np.random.default_rng(15).uniform(0, 1, (1, N_FEATURES))
    with pytest.raises(ValueError, match="kink"):
        gradient_check_contrastive(net, x, x.copy(), np.array([0.0]))


# ---------------------------------------------------------------------------
# training


def cohort_batches(seed=42, n=8):
    co = generate(SyntheticSpec(n_pos=n, n_neg=n, rng_seed=seed))
    xa, xb, y = pair_arrays(make_pairs(co))
    ta, tp, tn = triplet_arrays(make_triplets(co))
    return co, (xa, xb, y), (ta, tp, tn)


def test_contrastive_training_reduces_loss():
    _, (xa, xb, y), _ = cohort_batches()
    net = SiameseNet.init(seed=0)
    _, history = train_contrastive(net, xa, xb, y, TrainConfig(epochs=200))
    assert history[-1] < history[0] * 0.5
    assert len(history) == 200


def test_triplet_training_reduces_loss():
    _, _, (ta, tp, tn) = cohort_batches()
    net = SiameseNet.init(seed=0)
    _, history = train_triplet(net, ta, tp, tn, TrainConfig(epochs=200))
    assert history[-1] < history[0] * 0.5


def test_training_is_deterministic():
    _, (xa, xb, y), _ = cohort_batches()
    cfg = TrainConfig(epochs=25, rng_seed=9)
    n1, h1 = train_contrastive(SiameseNet.init(seed=1), xa, xb, y, cfg)
    n2, h2 = train_contrastive(SiameseNet.init(seed=1), xa, xb, y, cfg)
    np.testing.assert_array_equal(n1.omega, n2.omega)
    assert h1 == h2


def test_shuffle_seed_changes_path():
    _, (xa, xb, y), _ = cohort_batches()
    n1, _ = train_contrastive(SiameseNet.init(seed=1), xa, xb, y,
                              TrainConfig(epochs=10, rng_seed=0))
    n2, _ = train_contrastive(SiameseNet.init(seed=1), xa, xb, y,
                              TrainConfig(epochs=10, rng_seed=7))
    assert not np.array_equal(n1.omega, n2.omega)


def test_trained_net_separates_classes():
    co, (xa, xb, y), _ = cohort_batches()
    net, _ = train_contrastive(SiameseNet.init(seed=0), xa, xb, y,
                               TrainConfig(epochs=120))
    pos = net.score(co.positive_matrix()).mean()
    neg = net.score(co.negative_matrix()).mean()
    assert pos - neg > 0.1


def test_trained_net_stays_monotone():
    co, (xa, xb, y), _ = cohort_batches()
    net, _ = train_contrastive(SiameseNet.init(seed=0), xa, xb, y,
                               TrainConfig(epochs=120))
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = rng.uniform(0, 1, N_FEATURES)
        up = np.minimum(1.0, x + rng.uniform(0, 0.5, N_FEATURES))
        assert (net.score(up[None, :])[0]
                >= net.score(x[None, :])[0] - 1e-12)


def test_label_validation():
    net = SiameseNet.init(seed=0)
    xa = np.random.default_rng(0).uniform(0, 1, (3, N_FEATURES))
    with pytest.raises(ValueError):
        train_contrastive(net, xa, xa, np.array([0.0, 0.5, 1.0]),
                          TrainConfig(epochs=1))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(margin=0.0)
    with pytest.raises(ValueError):
        TrainConfig(margin=1.2)
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)


def test_train_backends_agree_numerically():
    names = backend_mod.available_backends()
    if len(names) < 2:
        pytest.skip("single backend installed")
    _, (xa, xb, y), _ = cohort_batches(n=5)
    cfg = TrainConfig(epochs=15)
    outs = []
    for name in names[:2]:
        b = backend_mod.get_backend(name)
        net, hist = train_contrastive(SiameseNet.init(seed=2), xa, xb, y,
                                      cfg, backend=b)
        outs.append((net.omega, np.asarray(hist)))
    np.testing.assert_allclose(outs[0][0], outs[1][0], atol=1e-8)
    np.testing.assert_allclose(outs[0][1], outs[1][1], atol=1e-10)
