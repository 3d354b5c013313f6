"""Latent coefficient table and the geometry-to-modes regression.

Every sample is encoded by the four trained autoencoders into coefficient
rows (alpha for geometry, gamma_x / gamma_1 / gamma_2 for the separated
modes). Rows are z-scored with statistics fitted on the training split
only, and three small MLPs learn the map from normalized alpha to each
normalized gamma block under a mean-absolute-error objective.
"""

import numpy as np
from dataclasses import dataclass, field

from .container import DatasetContainer
from .errors import TrainingDivergedError
from .numkit import (
    Dense,
    NetworkSpec,
    OptimizerState,
    init_params,
    net_backward,
    net_forward,
    optimizer_step,
    spec_from_dicts,
    spec_to_dicts,
)
from .rrae import TrainedRRAE, encode_batch

BLOCKS = ("alpha", "gamma_x", "gamma_1", "gamma_2")
MODEL_KEYS = ("geometry", "spatial", "m1", "m2")
_STD_FLOOR = 1e-8


@dataclass
class TableStats:
    """Per-component z-score statistics, one (mean, std) pair per block."""

    mean: dict
    std: dict
    fit_source: str = "train"


@dataclass
class LatentTable:
    alpha: np.ndarray  # (n, k_geometry)
    gamma_x: np.ndarray  # (n, k_spatial)
    gamma_1: np.ndarray  # (n, k_m1)
    gamma_2: np.ndarray  # (n, k_m2)
    n_train: int
    stats: TableStats = field(default=None)

    def block(self, key):
        return {"alpha": self.alpha, "gamma_x": self.gamma_x,
                "gamma_1": self.gamma_1, "gamma_2": self.gamma_2}[key]


@dataclass
class RegressorSet:
    """Three MLPs from normalized alpha to each normalized gamma block."""

    specs: dict  # key -> NetworkSpec, keys gamma_x / gamma_1 / gamma_2
    params: dict  # key -> parameter blocks
    train_mae: dict  # key -> final epoch MAE in normalized units
    epochs: dict  # key -> epochs actually run
    batch_size: int
    seed: int


def build_latent_table(models, views, n_train) -> LatentTable:
    """Encode every sample with all four autoencoders and fit statistics.

    models and views are mappings with keys geometry, spatial, m1, m2;
    views hold the sample arrays each encoder expects. Statistics come
    from the first n_train rows only.
    """
    for key in MODEL_KEYS:
        if key not in models:
            raise ValueError(f"missing model {key!r}")
        if key not in views:
            raise ValueError(f"missing view {key!r}")
        if not isinstance(models[key], TrainedRRAE):
            raise ValueError(f"model {key!r} is not a trained autoencoder")

    counts = {key: np.asarray(views[key]).shape[0] for key in MODEL_KEYS}
    if len(set(counts.values())) != 1:
        raise ValueError(f"views disagree on sample count: {counts}")
    n = counts["geometry"]
    if not (1 <= n_train <= n):
        raise ValueError(f"n_train {n_train} outside 1..{n}")

    rows = {}
    for key, block in zip(MODEL_KEYS, BLOCKS):
        try:
            rows[block] = encode_batch(models[key], views[key])
        except ValueError as err:
            raise ValueError(f"view for model {key!r} rejected: {err}") from err

    table = LatentTable(rows["alpha"], rows["gamma_x"], rows["gamma_1"],
                        rows["gamma_2"], n_train)
    table.stats = fit_stats(table)
    return table


def fit_stats(table: LatentTable) -> TableStats:
    """Z-score statistics over the training rows of every block."""
    mean, std = {}, {}
    for key in BLOCKS:
        rows = table.block(key)[: table.n_train]
        mean[key] = rows.mean(axis=0)
        std[key] = np.maximum(rows.std(axis=0), _STD_FLOOR)
    return TableStats(mean, std)


def normalize_rows(stats: TableStats, key, rows):
    rows = np.asarray(rows, np.float64)
    return (rows - stats.mean[key]) / stats.std[key]


def denormalize_rows(stats: TableStats, key, rows):
    rows = np.asarray(rows, np.float64)
    return rows * stats.std[key] + stats.mean[key]


# --- regression --------------------------------------------------------------


_HIDDEN = {"gamma_x": (128, 128, 128), "gamma_1": (64, 64), "gamma_2": (64, 64)}
_EPOCHS = {"gamma_x": 3000, "gamma_1": 2000, "gamma_2": 2000}
_LEARNING_RATE = 1e-3


def _regressor_spec(in_width, hidden, out_width):
    layers = []
    prev = in_width
    for h in hidden:
        layers.append(Dense(prev, h, "relu"))
        prev = h
    layers.append(Dense(prev, out_width, "linear"))
    return NetworkSpec(tuple(layers))


def _train_one(spec, x, t, epochs, batch_size, rng):
    """Adam on mean absolute error; returns (params, final epoch MAE)."""
    params = init_params(spec, rng, np.float64)
    state = OptimizerState(kind="adam")
    n = x.shape[0]
    step = 0
    epoch_mae = np.nan
    for _ in range(epochs):
        order = rng.permutation(n)
        abs_sum = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, tb = x[idx], t[idx]
            pred, tape = net_forward(spec, params, xb, keep_tape=True)
            diff = pred - tb
            abs_sum += np.abs(diff).sum()
            g = np.sign(diff) / diff.size
            grads, _ = net_backward(spec, params, tape, g, need_input_grad=False)
            optimizer_step(state, params, grads, _LEARNING_RATE)
            step += 1
        epoch_mae = abs_sum / (n * t.shape[1])
        if not np.isfinite(epoch_mae):
            raise TrainingDivergedError("regression loss diverged")
    return params, float(epoch_mae)


def train_regressors(table: LatentTable, *, seed=0, scale="desk") -> RegressorSet:
    """Fit the three alpha-to-gamma MLPs on the table's training rows."""
    if table.stats is None:
        raise ValueError("table has no fitted statistics")
    if table.n_train < 32:
        raise ValueError(f"need at least 32 training rows, got {table.n_train}")
    divisor = 10 if scale == "desk" else 1
    batch_size = 32

    x = normalize_rows(table.stats, "alpha", table.alpha[: table.n_train])
    rng = np.random.default_rng(seed)
    specs, params, maes, epochs_run = {}, {}, {}, {}
    for key in ("gamma_x", "gamma_1", "gamma_2"):
        t = normalize_rows(table.stats, key, table.block(key)[: table.n_train])
        spec = _regressor_spec(x.shape[1], _HIDDEN[key], t.shape[1])
        epochs = max(1, _EPOCHS[key] // divisor)
        params[key], maes[key] = _train_one(spec, x, t, epochs, batch_size, rng)
        specs[key] = spec
        epochs_run[key] = epochs
    return RegressorSet(specs, params, maes, epochs_run, batch_size, seed)


def predict_gammas(regs: RegressorSet, stats: TableStats, alpha):
    """Map one geometry coefficient vector to the three gamma vectors."""
    alpha = np.asarray(alpha, np.float64).reshape(1, -1)
    xn = normalize_rows(stats, "alpha", alpha)
    out = []
    for key in ("gamma_x", "gamma_1", "gamma_2"):
        pred = net_forward(regs.specs[key], regs.params[key], xn)
        out.append(denormalize_rows(stats, key, pred)[0])
    return tuple(out)


def e2e_error_bound(ae_loss_percents, regressor_maes):
    """Consistency budget for a reassembled training field, in percent.

    Chains the recorded error sources behind assemble-from-geometry: the
    three decoder reconstruction losses (percent Frobenius) and the three
    regressor MAEs (normalized units, so 1.0 means one training standard
    deviation, reported here as a percent). The factor 3 absorbs the
    interaction of the stages; an assembled field whose MAPE against the
    directly fitted solution exceeds this signals a wiring bug rather
    than ordinary model error.
    """
    losses = [float(v) for v in ae_loss_percents]
    maes = [float(v) for v in regressor_maes]
    return 3.0 * (sum(losses) + 100.0 * sum(maes))


# --- serialization -----------------------------------------------------------


def table_to_container(table: LatentTable) -> DatasetContainer:
    c = DatasetContainer()
    for key in BLOCKS:
        c.add(key, np.asarray(table.block(key), np.float64))
        c.add(f"{key}_mean", np.asarray(table.stats.mean[key], np.float64))
        c.add(f"{key}_std", np.asarray(table.stats.std[key], np.float64))
    c.meta.update({
        "kind": "latent_table",
        "n_train": int(table.n_train),
        "fit_source": table.stats.fit_source,
    })
    return c


def table_from_container(c: DatasetContainer) -> LatentTable:
    if c.meta.get("kind") != "latent_table":
        raise ValueError("container does not hold a latent table")
    mean = {key: c.arrays[f"{key}_mean"] for key in BLOCKS}
    std = {key: c.arrays[f"{key}_std"] for key in BLOCKS}
    stats = TableStats(mean, std, c.meta["fit_source"])
    return LatentTable(
        c.arrays["alpha"], c.arrays["gamma_x"], c.arrays["gamma_1"],
        c.arrays["gamma_2"], int(c.meta["n_train"]), stats,
    )


def regressors_to_container(regs: RegressorSet) -> DatasetContainer:
    c = DatasetContainer()
    for key, params in regs.params.items():
        for i, block in enumerate(params):
            for name, arr in block.items():
                c.add(f"{key}.{i}.{name}", np.asarray(arr, np.float64))
    c.meta.update({
        "kind": "regressor_set",
        "specs": {key: spec_to_dicts(spec) for key, spec in regs.specs.items()},
        "train_mae": {key: float(v) for key, v in regs.train_mae.items()},
        "epochs": {key: int(v) for key, v in regs.epochs.items()},
        "batch_size": int(regs.batch_size),
        "seed": int(regs.seed),
    })
    return c


def regressors_from_container(c: DatasetContainer) -> RegressorSet:
    if c.meta.get("kind") != "regressor_set":
        raise ValueError("container does not hold a regressor set")
    specs = {key: spec_from_dicts(d) for key, d in c.meta["specs"].items()}
    params = {}
    for key, spec in specs.items():
        params[key] = [
            {name: np.asarray(c.arrays[f"{key}.{i}.{name}"], np.float64)
             for name in ("w", "b")}
            for i in range(len(spec.layers))
        ]
    return RegressorSet(
        specs, params,
        dict(c.meta["train_mae"]), dict(c.meta["epochs"]),
        int(c.meta["batch_size"]), int(c.meta["seed"]),
    )
