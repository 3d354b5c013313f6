"""Autoencoders with an in-batch truncated-SVD bottleneck.

The encoder maps each sample into a wide latent vector; stacking a batch
column-wise gives a latent matrix whose truncated SVD keeps only the top
k_max directions before decoding. Gradients treat the SVD factors as
per-step constants, so the backward pass through the truncation is the
orthogonal projection onto the span of the kept directions. Four presets
cover the pipeline's needs: binary geometry images, stacked spatial-mode
fields, and the two families of parametric curves.
"""

import numpy as np
from dataclasses import dataclass

from .container import DatasetContainer
from .errors import TrainingDivergedError
from .numkit import (
    Conv2d,
    ConvTranspose2d,
    Dense,
    LrSchedule,
    NetworkSpec,
    OptimizerState,
    Reshape,
    init_params,
    lr_at,
    net_backward,
    net_forward,
    optimizer_step,
    spec_from_dicts,
    spec_to_dicts,
    thin_svd,
    truncate,
)

_SEED_CHANNELS = 16  # channel count of the decoder's spatial seed tensor


@dataclass(frozen=True)
class RRAEConfig:
    encoder: NetworkSpec
    decoder: NetworkSpec
    latent_dim: int
    k_max: int
    input_shape: tuple
    schedule: LrSchedule
    batch_size: int = 20
    optimizer: str = "adabelief"
    seed: int = 0
    clamp_output: bool = False

    def __post_init__(self):
        if not (self.latent_dim >= self.k_max >= 1):
            raise ValueError(
                f"need latent_dim >= k_max >= 1, got {self.latent_dim} and {self.k_max}"
            )
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.optimizer not in ("adam", "adabelief"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainedRRAE:
    config: RRAEConfig
    enc_params: list
    dec_params: list
    u_k: np.ndarray  # (latent_dim, k_max), frozen after the final full pass
    latent_mean: np.ndarray  # (k_max,)
    latent_std: np.ndarray  # (k_max,)
    loss_history: np.ndarray  # percent loss per training step


# --- presets -----------------------------------------------------------------


def _conv_out(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def _staged(steps, divisor):
    rates = (1e-3, 1e-4, 1e-5)
    return LrSchedule(tuple((max(1, s // divisor), r) for s, r in zip(steps, rates)))


def _check_resolution(resolution):
    if resolution < 16 or resolution % 4 != 0:
        raise ValueError("resolution must be >= 16 and divisible by 4")


def _image_encoder(channels, resolution, kernel, latent_dim):
    size = resolution
    layers = []
    chain = (32, 64, 128, 256)
    prev = channels
    for ch in chain:
        layers.append(Conv2d(prev, ch, kernel, 2, 1, "relu"))
        size = _conv_out(size, kernel, 2, 1)
        prev = ch
    flat = chain[-1] * size * size
    layers += [
        Reshape((flat,)),
        Dense(flat, 64, "softplus"),
        Dense(64, 64, "softplus"),
        Dense(64, latent_dim, "linear"),
    ]
    return NetworkSpec(tuple(layers))


def _image_decoder(channels, resolution, kernel, latent_dim, mid_channels, out_pad):
    seed = resolution // 4
    flat = _SEED_CHANNELS * seed * seed
    layers = [
        Dense(latent_dim, 64, "softplus"),
        Dense(64, 64, "softplus"),
        Dense(64, flat, "linear"),
        Reshape((_SEED_CHANNELS, seed, seed)),
        ConvTranspose2d(_SEED_CHANNELS, mid_channels[0], kernel, 2, 1, out_pad, "relu"),
        ConvTranspose2d(mid_channels[0], mid_channels[1], kernel, 2, 1, out_pad, "relu"),
        Conv2d(mid_channels[1], channels, 1, 1, 0, "linear"),
    ]
    return NetworkSpec(tuple(layers))


def geometry_preset(resolution=64, *, scale="desk", latent_dim=300, k_max=4,
                    batch_size=20, seed=0):
    """Binary-image autoencoder; output clamped to [0, 1]."""
    _check_resolution(resolution)
    divisor = 10 if scale == "desk" else 1
    return RRAEConfig(
        encoder=_image_encoder(1, resolution, 4, latent_dim),
        decoder=_image_decoder(1, resolution, 4, latent_dim, (8, 1), 0),
        latent_dim=latent_dim,
        k_max=k_max,
        input_shape=(1, resolution, resolution),
        schedule=_staged((3000, 3000, 3000), divisor),
        batch_size=batch_size,
        seed=seed,
        clamp_output=True,
    )


def spatial_preset(resolution=64, *, scale="desk", latent_dim=3000, k_max=12,
                   batch_size=20, seed=0):
    """Autoencoder for the stacked spatial-mode fields (3 channels)."""
    _check_resolution(resolution)
    divisor = 10 if scale == "desk" else 1
    return RRAEConfig(
        encoder=_image_encoder(3, resolution, 3, latent_dim),
        decoder=_image_decoder(3, resolution, 3, latent_dim, (64, 32), 1),
        latent_dim=latent_dim,
        k_max=k_max,
        input_shape=(3, resolution, resolution),
        schedule=_staged((6000, 5000, 4000), divisor),
        batch_size=batch_size,
        seed=seed,
    )


def curve_preset(which, *, scale="desk", k_max=3, batch_size=20, seed=0,
                 points=1000, n_curves=3):
    """Autoencoder for concatenated parametric curves ("m1" or "m2")."""
    if which not in ("m1", "m2"):
        raise ValueError(f"curve preset must be 'm1' or 'm2', got {which!r}")
    latent_dim = 1700 if which == "m1" else 800
    width = points * n_curves
    divisor = 10 if scale == "desk" else 1
    encoder = NetworkSpec((
        Dense(width, 64, "relu"),
        Dense(64, latent_dim, "linear"),
    ))
    hidden = tuple(Dense(64, 64, "relu") for _ in range(5))
    decoder = NetworkSpec((
        Dense(latent_dim, 64, "relu"),
        *hidden,
        Dense(64, width, "linear"),
    ))
    return RRAEConfig(
        encoder=encoder,
        decoder=decoder,
        latent_dim=latent_dim,
        k_max=k_max,
        input_shape=(width,),
        schedule=_staged((3000, 3000, 3000), divisor),
        batch_size=batch_size,
        seed=seed,
    )


# --- forward and loss --------------------------------------------------------


def _check_batch(config, x):
    expected = (x.shape[0],) + tuple(config.input_shape)
    if x.shape != expected:
        raise ValueError(
            f"batch shape {x.shape} does not match input shape {config.input_shape}"
        )


def rrae_loss(x, recon):
    """Relative Frobenius reconstruction error, in percent."""
    if x.shape != recon.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {recon.shape}")
    ref = np.linalg.norm(x.ravel())
    if ref == 0:
        raise ValueError("reconstruction loss undefined for an all-zero batch")
    return float(np.linalg.norm((recon - x).ravel()) / ref * 100.0)


def rrae_forward(config, enc_params, dec_params, x):
    """One full pass over a batch: encode, truncate in latent space, decode.

    Returns (y, u_k, a, recon) where y is the latent matrix with samples as
    columns, u_k its leading left-singular vectors, and a the coefficients.
    """
    _check_batch(config, x)
    if x.shape[0] < config.k_max:
        raise ValueError(
            f"batch of {x.shape[0]} is smaller than k_max={config.k_max}"
        )
    y_rows = net_forward(config.encoder, enc_params, np.asarray(x, np.float64))
    y = y_rows.T
    u_k, a = truncate(thin_svd(y), config.k_max)
    recon = net_forward(config.decoder, dec_params, (u_k @ a).T)
    if config.clamp_output:
        recon = np.clip(recon, 0.0, 1.0)
    return y, u_k, a, recon


# --- training ----------------------------------------------------------------


def _loss_and_grad(xb, raw, clamp):
    recon = np.clip(raw, 0.0, 1.0) if clamp else raw
    ref = np.linalg.norm(xb.ravel())
    if ref == 0:
        raise ValueError("reconstruction loss undefined for an all-zero batch")
    diff = recon - xb
    dn = np.linalg.norm(diff.ravel())
    loss = float(dn / ref * 100.0)
    if dn == 0:
        g = np.zeros_like(raw)
    else:
        g = diff * (100.0 / (dn * ref))
        if clamp:
            # out-of-range pixels only receive gradient that pulls them back
            # into [0, 1]; blocking both directions can freeze a saturated
            # decoder at initialization
            inward = ((raw <= 0.0) & (g < 0.0)) | ((raw >= 1.0) & (g > 0.0))
            g = np.where((raw > 0.0) & (raw < 1.0) | inward, g, 0.0)
    return loss, g


def _orient_clamped_decoder(spec, params):
    """Break the sign symmetry of a clamped decoder at initialization.

    A single-channel transposed-conv head can start with every unit that
    feeds a target pixel inactive and a negative output weight; the clamp
    then blocks recovery. Positive head weights plus a small positive bias
    on the transposed-conv stages start every unit active and oriented so
    that inclusions map to positive raw values.
    """
    for lay, block in zip(spec.layers, params):
        if isinstance(lay, ConvTranspose2d) and lay.activation == "relu":
            block["b"][:] = 0.05
    last = spec.layers[-1]
    if isinstance(last, Conv2d) and last.activation == "linear":
        params[-1]["w"] = np.abs(params[-1]["w"])


def train_rrae(dataset, config, *, bypass_svd=False):
    """Minibatch training of encoder and decoder under the staged schedule.

    The SVD factors act as constants within each step, so the gradient
    reaching the encoder is the decoder's latent gradient projected onto
    the span of the kept singular directions. With bypass_svd the
    bottleneck is skipped entirely, giving a plain autoencoder; the random
    stream is consumed identically either way.
    """
    data = np.asarray(dataset, np.float64)
    if data.ndim < 2 or data.shape[0] == 0:
        raise ValueError("training set must contain at least one sample")
    _check_batch(config, data)
    n = data.shape[0]
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds dataset size {n}")
    if config.batch_size < config.k_max:
        raise ValueError(
            f"batch_size {config.batch_size} is smaller than k_max={config.k_max}"
        )

    rng = np.random.default_rng(config.seed)
    enc_params = init_params(config.encoder, rng, np.float64)
    dec_params = init_params(config.decoder, rng, np.float64)
    if config.clamp_output:
        _orient_clamped_decoder(config.decoder, dec_params)
    combined = enc_params + dec_params
    state = OptimizerState(kind=config.optimizer)
    total = config.schedule.total_steps
    history = np.empty(total)

    perm = rng.permutation(n)
    ptr = 0
    for step in range(total):
        if ptr + config.batch_size > n:
            perm = rng.permutation(n)
            ptr = 0
        xb = data[perm[ptr:ptr + config.batch_size]]
        ptr += config.batch_size

        y_rows, enc_tape = net_forward(config.encoder, enc_params, xb, keep_tape=True)
        if not np.all(np.isfinite(y_rows)):
            raise TrainingDivergedError(f"latent values diverged at step {step}")
        u_k = None
        if bypass_svd:
            ytil_rows = y_rows
        else:
            u_k, a = truncate(thin_svd(y_rows.T), config.k_max)
            ytil_rows = (u_k @ a).T
        raw, dec_tape = net_forward(config.decoder, dec_params, ytil_rows, keep_tape=True)
        loss, g = _loss_and_grad(xb, raw, config.clamp_output)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss diverged at step {step}")
        history[step] = loss

        dec_grads, g_latent = net_backward(config.decoder, dec_params, dec_tape, g)
        if u_k is not None:
            g_latent = (g_latent @ u_k) @ u_k.T
        enc_grads, _ = net_backward(
            config.encoder, enc_params, enc_tape, g_latent, need_input_grad=False
        )
        optimizer_step(state, combined, enc_grads + dec_grads, lr_at(config.schedule, step))

    y_full = _encode_rows(config, enc_params, data).T
    u_k, a_full = truncate(thin_svd(y_full), config.k_max)
    mean = a_full.mean(axis=1)
    std = np.maximum(a_full.std(axis=1), 1e-12)
    return TrainedRRAE(config, enc_params, dec_params, u_k, mean, std, history)


def _encode_rows(config, enc_params, data):
    """Latent rows for a full dataset, processed in batch-size chunks."""
    chunks = []
    for start in range(0, data.shape[0], config.batch_size):
        xb = np.asarray(data[start:start + config.batch_size], np.float64)
        chunks.append(net_forward(config.encoder, enc_params, xb))
    return np.concatenate(chunks, axis=0)


# --- inference ---------------------------------------------------------------


def encode(model: TrainedRRAE, sample):
    """Project one sample onto the frozen basis: k_max coefficients."""
    sample = np.asarray(sample, np.float64)
    if sample.shape != tuple(model.config.input_shape):
        raise ValueError(
            f"sample shape {sample.shape} does not match {model.config.input_shape}"
        )
    y = net_forward(model.config.encoder, model.enc_params, sample[None])[0]
    return model.u_k.T @ y


def encode_batch(model: TrainedRRAE, samples):
    """Coefficient rows (n, k_max) for a stack of samples."""
    samples = np.asarray(samples, np.float64)
    _check_batch(model.config, samples)
    return _encode_rows(model.config, model.enc_params, samples) @ model.u_k


def decode(model: TrainedRRAE, coefficients, *, threshold=False):
    """Reconstruct a sample from k_max coefficients via the frozen basis."""
    alpha = np.asarray(coefficients, np.float64).reshape(-1)
    if alpha.shape[0] != model.config.k_max:
        raise ValueError(
            f"expected {model.config.k_max} coefficients, got {alpha.shape[0]}"
        )
    y = model.u_k @ alpha
    out = net_forward(model.config.decoder, model.dec_params, y[None])[0]
    if model.config.clamp_output:
        out = np.clip(out, 0.0, 1.0)
    if threshold:
        if not model.config.clamp_output:
            raise ValueError("thresholded view only applies to clamped decoders")
        return (out > 0.5).astype(np.uint8)
    return out


def reconstruction_loss(model: TrainedRRAE, samples):
    """Percent error of a sample stack round-tripped through the frozen basis.

    Encodes in batch-size chunks, projects onto the stored directions,
    decodes, and compares against the inputs with the same relative norm
    used during training.
    """
    samples = np.asarray(samples, np.float64)
    _check_batch(model.config, samples)
    coeff = _encode_rows(model.config, model.enc_params, samples) @ model.u_k
    rows = coeff @ model.u_k.T
    chunks = []
    step = model.config.batch_size
    for start in range(0, rows.shape[0], step):
        chunks.append(
            net_forward(model.config.decoder, model.dec_params, rows[start:start + step])
        )
    recon = np.concatenate(chunks, axis=0)
    if model.config.clamp_output:
        recon = np.clip(recon, 0.0, 1.0)
    return rrae_loss(samples, recon)


# --- serialization -----------------------------------------------------------


def rrae_to_container(model: TrainedRRAE) -> DatasetContainer:
    c = DatasetContainer()
    for prefix, params in (("enc", model.enc_params), ("dec", model.dec_params)):
        for i, block in enumerate(params):
            for key, arr in block.items():
                c.add(f"{prefix}{i}.{key}", arr.astype(np.float32))
    c.add("u_k", np.asarray(model.u_k, np.float64))
    c.add("latent_mean", np.asarray(model.latent_mean, np.float64))
    c.add("latent_std", np.asarray(model.latent_std, np.float64))
    c.add("loss_history", np.asarray(model.loss_history, np.float64))
    cfg = model.config
    c.meta.update({
        "kind": "trained_rrae",
        "encoder": spec_to_dicts(cfg.encoder),
        "decoder": spec_to_dicts(cfg.decoder),
        "latent_dim": cfg.latent_dim,
        "k_max": cfg.k_max,
        "input_shape": list(cfg.input_shape),
        "schedule": [[s, r] for s, r in cfg.schedule.phases],
        "batch_size": cfg.batch_size,
        "optimizer": cfg.optimizer,
        "seed": cfg.seed,
        "clamp_output": cfg.clamp_output,
    })
    return c


def rrae_from_container(c: DatasetContainer) -> TrainedRRAE:
    meta = c.meta
    if meta.get("kind") != "trained_rrae":
        raise ValueError("container does not hold a trained autoencoder")
    config = RRAEConfig(
        encoder=spec_from_dicts(meta["encoder"]),
        decoder=spec_from_dicts(meta["decoder"]),
        latent_dim=int(meta["latent_dim"]),
        k_max=int(meta["k_max"]),
        input_shape=tuple(meta["input_shape"]),
        schedule=LrSchedule(tuple((int(s), float(r)) for s, r in meta["schedule"])),
        batch_size=int(meta["batch_size"]),
        optimizer=meta["optimizer"],
        seed=int(meta["seed"]),
        clamp_output=bool(meta["clamp_output"]),
    )

    def blocks(prefix, spec):
        out = []
        for i, lay in enumerate(spec.layers):
            if isinstance(lay, Reshape):
                out.append({})
                continue
            out.append({
                key: np.asarray(c.arrays[f"{prefix}{i}.{key}"], np.float64)
                for key in ("w", "b")
            })
        return out

    return TrainedRRAE(
        config=config,
        enc_params=blocks("enc", config.encoder),
        dec_params=blocks("dec", config.decoder),
        u_k=np.asarray(c.arrays["u_k"], np.float64),
        latent_mean=np.asarray(c.arrays["latent_mean"], np.float64),
        latent_std=np.asarray(c.arrays["latent_std"], np.float64),
        loss_history=np.asarray(c.arrays["loss_history"], np.float64),
    )
