"""Latent table construction, the z-score conventions, the three MLP
regressors on synthetic tables with known structure, and serialization."""

import numpy as np
import pytest

from gpdesign.errors import TrainingDivergedError
from gpdesign.latentmap import (
    LatentTable,
    RegressorSet,
    build_latent_table,
    denormalize_rows,
    fit_stats,
    normalize_rows,
    predict_gammas,
    regressors_from_container,
    regressors_to_container,
    table_from_container,
    table_to_container,
    train_regressors,
)
from gpdesign.numkit import Dense, LrSchedule, NetworkSpec, init_params
from gpdesign.rrae import RRAEConfig, TrainedRRAE


def stub_model(width, latent, k, seed):
    """Untrained autoencoder stub; encode_batch only needs encoder and u_k."""
    encoder = NetworkSpec((Dense(width, 16, "relu"), Dense(16, latent, "linear")))
    decoder = NetworkSpec((Dense(latent, 16, "relu"), Dense(16, width, "linear")))
    config = RRAEConfig(
        encoder=encoder,
        decoder=decoder,
        latent_dim=latent,
        k_max=k,
        input_shape=(width,),
        schedule=LrSchedule(((10, 1e-3),)),
        batch_size=4,
        seed=seed,
    )
    rng = np.random.default_rng(seed)
    enc_params = init_params(config.encoder, rng, np.float64)
    dec_params = init_params(config.decoder, rng, np.float64)
    q, _ = np.linalg.qr(rng.standard_normal((latent, k)))
    return TrainedRRAE(config, enc_params, dec_params, q,
                       np.zeros(k), np.ones(k), np.zeros(1))


@pytest.fixture(scope="module")
def stub_setup():
    rng = np.random.default_rng(42)
    n = 48
    models = {
        "geometry": stub_model(10, 16, 4, 1),
        "spatial": stub_model(20, 24, 12, 2),
        "m1": stub_model(15, 8, 3, 3),
        "m2": stub_model(15, 8, 3, 4),
    }
    views = {
        "geometry": rng.random((n, 10)),
        "spatial": rng.random((n, 20)),
        "m1": rng.random((n, 15)),
        "m2": rng.random((n, 15)),
    }
    views["geometry"][5] = views["geometry"][0]
    views["spatial"][5] = views["spatial"][0]
    views["m1"][5] = views["m1"][0]
    views["m2"][5] = views["m2"][0]
    return models, views


@pytest.fixture(scope="module")
def table(stub_setup):
    models, views = stub_setup
    return build_latent_table(models, views, n_train=40)


def linear_table(n_train=256, n_test=64, noise=1e-2, seed=0):
    """Synthetic table whose gammas are linear in alpha plus small noise."""
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    alpha = rng.standard_normal((n, 4))
    w_x = rng.standard_normal((4, 12)) / 2.0
    w_1 = rng.standard_normal((4, 3)) / 2.0
    w_2 = rng.standard_normal((4, 3)) / 2.0
    t = LatentTable(
        alpha=alpha,
        gamma_x=alpha @ w_x + noise * rng.standard_normal((n, 12)),
        gamma_1=alpha @ w_1 + noise * rng.standard_normal((n, 3)),
        gamma_2=alpha @ w_2 + noise * rng.standard_normal((n, 3)),
        n_train=n_train,
    )
    t.stats = fit_stats(t)
    return t


# --- table construction -------------------------------------------------------


def test_table_shapes_and_stats(table):
    assert table.alpha.shape == (48, 4)
    assert table.gamma_x.shape == (48, 12)
    assert table.gamma_1.shape == (48, 3)
    assert table.gamma_2.shape == (48, 3)
    for key in ("alpha", "gamma_x", "gamma_1", "gamma_2"):
        normalized = normalize_rows(table.stats, key, table.block(key)[:40])
        assert np.abs(normalized.mean(axis=0)).max() < 1e-10
        assert np.abs(normalized.std(axis=0) - 1.0).max() < 1e-10
    assert table.stats.fit_source == "train"


def test_duplicate_samples_share_rows(table):
    for key in ("alpha", "gamma_x", "gamma_1", "gamma_2"):
        assert np.array_equal(table.block(key)[0], table.block(key)[5])


def test_normalization_round_trip(table):
    rng = np.random.default_rng(7)
    row = rng.standard_normal((3, 12))
    back = denormalize_rows(table.stats, "gamma_x",
                            normalize_rows(table.stats, "gamma_x", row))
    assert np.allclose(back, row, atol=1e-12)


def test_build_validation_errors(stub_setup):
    models, views = stub_setup
    missing = dict(models)
    del missing["m2"]
    with pytest.raises(ValueError):
        build_latent_table(missing, views, 40)
    bad_views = dict(views)
    bad_views["spatial"] = bad_views["spatial"][:, :7]
    with pytest.raises(ValueError, match="spatial"):
        build_latent_table(models, bad_views, 40)
    short = dict(views)
    short["m1"] = short["m1"][:20]
    with pytest.raises(ValueError, match="count"):
        build_latent_table(models, short, 20)
    with pytest.raises(ValueError):
        build_latent_table(models, views, 0)
    with pytest.raises(ValueError):
        build_latent_table(models, views, 49)


# --- regression --------------------------------------------------------------


@pytest.fixture(scope="module")
def linear_fit():
    t = linear_table()
    return t, train_regressors(t, seed=0)


def test_linear_map_is_recovered(linear_fit):
    t, regs = linear_fit
    test_alpha = t.alpha[t.n_train:]
    preds = np.stack([
        np.concatenate(predict_gammas(regs, t.stats, a)) for a in test_alpha
    ])
    truth = np.concatenate(
        [t.gamma_x[t.n_train:], t.gamma_1[t.n_train:], t.gamma_2[t.n_train:]],
        axis=1,
    )
    mae = np.abs(preds - truth).mean()
    assert mae < 5 * 1e-2


def test_constant_targets_converge_to_constant():
    rng = np.random.default_rng(3)
    n = 40
    t = LatentTable(
        alpha=rng.standard_normal((n, 4)),
        gamma_x=np.full((n, 12), 0.7),
        gamma_1=np.full((n, 3), -1.2),
        gamma_2=np.full((n, 3), 3.4),
        n_train=n,
    )
    t.stats = fit_stats(t)
    regs = train_regressors(t, seed=1)
    gx, g1, g2 = predict_gammas(regs, t.stats, np.array([0.3, -0.1, 2.0, 0.5]))
    assert np.allclose(gx, 0.7, atol=1e-5)
    assert np.allclose(g1, -1.2, atol=1e-5)
    assert np.allclose(g2, 3.4, atol=1e-5)
    assert all(v < 5e-2 for v in regs.train_mae.values())


def test_training_is_deterministic():
    t = linear_table(n_train=64, n_test=0, seed=5)
    a = train_regressors(t, seed=9)
    b = train_regressors(t, seed=9)
    for key in ("gamma_x", "gamma_1", "gamma_2"):
        for blk_a, blk_b in zip(a.params[key], b.params[key]):
            assert np.array_equal(blk_a["w"], blk_b["w"])
            assert np.array_equal(blk_a["b"], blk_b["b"])
    assert a.train_mae == b.train_mae


def test_prediction_is_deterministic(linear_fit):
    t, regs = linear_fit
    a = np.array([0.1, -0.4, 1.3, 0.9])
    first = predict_gammas(regs, t.stats, a)
    second = predict_gammas(regs, t.stats, a)
    for x, y in zip(first, second):
        assert np.array_equal(x, y)


def test_recorded_mae_matches_training_metric(linear_fit):
    t, regs = linear_fit
    x = t.alpha[: t.n_train]
    preds = np.stack([
        predict_gammas(regs, t.stats, a)[0] for a in x
    ])
    truth = t.gamma_x[: t.n_train]
    normalized_mae = np.abs(
        normalize_rows(t.stats, "gamma_x", preds)
        - normalize_rows(t.stats, "gamma_x", truth)
    ).mean()
    assert normalized_mae == pytest.approx(regs.train_mae["gamma_x"], rel=0.5)


def test_leading_components_predicted_better():
    rng = np.random.default_rng(11)
    n_train, n_test = 256, 512
    n = n_train + n_test
    alpha = rng.standard_normal((n, 4))
    directions = rng.standard_normal((4, 12))
    directions /= np.linalg.norm(directions, axis=0)
    scales = 0.7 ** np.arange(12)
    gamma_x = (alpha @ directions) * scales + 0.05 * rng.standard_normal((n, 12))
    t = LatentTable(
        alpha=alpha,
        gamma_x=gamma_x,
        gamma_1=np.zeros((n, 3)) + alpha[:, :3],
        gamma_2=np.zeros((n, 3)) + alpha[:, :3],
        n_train=n_train,
    )
    t.stats = fit_stats(t)
    regs = train_regressors(t, seed=2)
    preds = np.stack([
        predict_gammas(regs, t.stats, a)[0] for a in t.alpha[n_train:]
    ])
    truth = t.gamma_x[n_train:]
    corr = np.array([
        np.corrcoef(preds[:, j], truth[:, j])[0, 1] for j in range(12)
    ])
    assert corr[0] > 0.9
    assert corr[-1] < corr[0] - 0.2
    assert np.all(corr[1:] <= corr[:-1] + 0.07)


def test_too_few_rows_rejected():
    t = linear_table(n_train=16, n_test=0, seed=6)
    with pytest.raises(ValueError):
        train_regressors(t, seed=0)


def test_nan_targets_raise():
    t = linear_table(n_train=64, n_test=0, seed=7)
    t.gamma_1[3, 1] = np.nan
    t.stats = fit_stats(t)
    with pytest.raises(TrainingDivergedError):
        train_regressors(t, seed=0)


# --- serialization -----------------------------------------------------------


def test_table_round_trip(table, tmp_path):
    from gpdesign.container import read_dataset, write_dataset

    path = tmp_path / "table.gpdc"
    write_dataset(table_to_container(table), path)
    loaded = table_from_container(read_dataset(path))
    assert loaded.n_train == table.n_train
    assert np.array_equal(loaded.alpha, table.alpha)
    assert np.array_equal(loaded.gamma_x, table.gamma_x)
    for key in ("alpha", "gamma_x", "gamma_1", "gamma_2"):
        assert np.array_equal(loaded.stats.mean[key], table.stats.mean[key])
        assert np.array_equal(loaded.stats.std[key], table.stats.std[key])


def test_regressor_round_trip(linear_fit, tmp_path):
    from gpdesign.container import read_dataset, write_dataset

    t, regs = linear_fit
    path = tmp_path / "regs.gpdc"
    write_dataset(regressors_to_container(regs), path)
    loaded = regressors_from_container(read_dataset(path))
    a = np.array([0.2, 0.4, -0.6, 1.1])
    for x, y in zip(predict_gammas(regs, t.stats, a),
                    predict_gammas(loaded, t.stats, a)):
        assert np.allclose(x, y, atol=1e-12)
    assert loaded.train_mae == regs.train_mae


def test_container_kind_checks(table):
    from gpdesign.container import DatasetContainer

    c = DatasetContainer()
    c.meta["kind"] = "something_else"
    with pytest.raises(ValueError):
        table_from_container(c)
    with pytest.raises(ValueError):
        regressors_from_container(c)
