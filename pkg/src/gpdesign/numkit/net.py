"""Minimal reverse-mode engine over dense and 2D-convolution layers.

A network is an ordered tuple of layer descriptors; parameters live outside
the spec as a list of {"w": ..., "b": ...} dicts aligned with the layers.
net_forward can record a tape which net_backward consumes to produce
parameter gradients plus the gradient at the network input.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .. import kernels

ACTIVATIONS = ("relu", "softplus", "linear")


@dataclass(frozen=True)
class Dense:
    in_dim: int
    out_dim: int
    activation: str = "linear"


@dataclass(frozen=True)
class Conv2d:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    padding: int = 0
    activation: str = "linear"


@dataclass(frozen=True)
class ConvTranspose2d:
    in_ch: int
    out_ch: int
    kernel: int
    stride: int = 1
    padding: int = 0
    out_pad: int = 0
    activation: str = "linear"


@dataclass(frozen=True)
class Reshape:
    dims: tuple  # per-sample target shape, batch axis excluded


Layer = Dense | Conv2d | ConvTranspose2d | Reshape


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple

    def __post_init__(self):
        for lay in self.layers:
            act = getattr(lay, "activation", "linear")
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0)
    if kind == "softplus":
        return np.logaddexp(0, z).astype(z.dtype, copy=False)
    return z


def _act_grad(z, kind):
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    if kind == "softplus":
        # sigmoid via tanh for overflow safety
        return (0.5 * (1.0 + np.tanh(0.5 * z))).astype(z.dtype, copy=False)
    return None  # linear: multiply by nothing


def init_params(spec: NetworkSpec, rng: np.random.Generator, dtype=np.float32):
    """Glorot-uniform weights, zero biases, shapes per layer descriptor."""
    params = []
    for lay in spec.layers:
        if isinstance(lay, Dense):
            bound = np.sqrt(6.0 / (lay.in_dim + lay.out_dim))
            w = rng.uniform(-bound, bound, size=(lay.in_dim, lay.out_dim))
            params.append({"w": w.astype(dtype), "b": np.zeros(lay.out_dim, dtype)})
        elif isinstance(lay, Conv2d):
            fan_in = lay.in_ch * lay.kernel**2
            fan_out = lay.out_ch * lay.kernel**2
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(
                -bound, bound, size=(lay.out_ch, lay.in_ch, lay.kernel, lay.kernel)
            )
            params.append({"w": w.astype(dtype), "b": np.zeros(lay.out_ch, dtype)})
        elif isinstance(lay, ConvTranspose2d):
            fan_in = lay.in_ch * lay.kernel**2
            fan_out = lay.out_ch * lay.kernel**2
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(
                -bound, bound, size=(lay.in_ch, lay.out_ch, lay.kernel, lay.kernel)
            )
            params.append({"w": w.astype(dtype), "b": np.zeros(lay.out_ch, dtype)})
        elif isinstance(lay, Reshape):
            params.append({})
        else:
            raise ValueError(f"unknown layer {lay!r}")
    return params


def _check_channels(name, got, want):
    if got != want:
        raise ValueError(f"{name}: input has {got} channels, layer expects {want}")


def net_forward(spec: NetworkSpec, params, x, keep_tape=False):
    """Run the network; with keep_tape=True also return state for net_backward."""
    tape = []
    for lay, p in zip(spec.layers, params):
        entry = {"x": x}
        if isinstance(lay, Dense):
            if x.ndim != 2 or x.shape[1] != lay.in_dim:
                raise ValueError(
                    f"dense layer expects (batch, {lay.in_dim}), got {x.shape}"
                )
            z = x @ p["w"] + p["b"]
        elif isinstance(lay, Conv2d):
            _check_channels("conv2d", x.shape[1], lay.in_ch)
            z = kernels.conv_fwd(x, p["w"], p["b"], lay.stride, lay.padding)
        elif isinstance(lay, ConvTranspose2d):
            _check_channels("conv2d_transpose", x.shape[1], lay.in_ch)
            h_out = (x.shape[2] - 1) * lay.stride - 2 * lay.padding + lay.kernel + lay.out_pad
            w_out = (x.shape[3] - 1) * lay.stride - 2 * lay.padding + lay.kernel + lay.out_pad
            z = kernels.conv_dx(x, p["w"], lay.stride, lay.padding, h_out, w_out)
            z += p["b"][None, :, None, None]
        elif isinstance(lay, Reshape):
            z = x.reshape((x.shape[0],) + tuple(lay.dims))
        else:
            raise ValueError(f"unknown layer {lay!r}")
        if isinstance(lay, Reshape):
            x = z
        else:
            entry["z"] = z
            x = _act(z, lay.activation)
        tape.append(entry)
    if keep_tape:
        return x, tape
    return x


def net_backward(spec: NetworkSpec, params, tape, gy, need_input_grad=True):
    """Backpropagate gy (gradient at the output) through a recorded tape.

    Returns (grads, gx): per-layer gradient dicts mirroring params, and the
    gradient with respect to the network input (None when need_input_grad is
    False, which skips that final propagation).
    """
    if tape is None or len(tape) != len(spec.layers):
        raise ValueError("net_backward requires the tape from net_forward(keep_tape=True)")
    grads = [None] * len(params)
    g = gy
    for idx in range(len(spec.layers) - 1, -1, -1):
        lay = spec.layers[idx]
        entry = tape[idx]
        x = entry["x"]
        if isinstance(lay, Reshape):
            grads[idx] = {}
            g = g.reshape(x.shape)
            continue
        ag = _act_grad(entry["z"], lay.activation)
        if ag is not None:
            g = g * ag
        last = idx == 0 and not need_input_grad
        if isinstance(lay, Dense):
            grads[idx] = {"w": x.T @ g, "b": g.sum(axis=0)}
            if not last:
                g = g @ params[idx]["w"].T
        elif isinstance(lay, Conv2d):
            gw, gb = kernels.conv_dw(x, g, lay.stride, lay.padding, lay.kernel, lay.kernel)
            grads[idx] = {"w": gw, "b": gb}
            if not last:
                g = kernels.conv_dx(g, params[idx]["w"], lay.stride, lay.padding, x.shape[2], x.shape[3])
        elif isinstance(lay, ConvTranspose2d):
            gw, _ = kernels.conv_dw(g, x, lay.stride, lay.padding, lay.kernel, lay.kernel)
            grads[idx] = {"w": gw, "b": g.sum(axis=(0, 2, 3))}
            if not last:
                g = kernels.conv_fwd(
                    g,
                    params[idx]["w"],
                    np.zeros(lay.in_ch, dtype=g.dtype),
                    lay.stride,
                    lay.padding,
                )
        if last:
            g = None
    return grads, g

_LAYER_KINDS = {
    "dense": Dense,
    "conv2d": Conv2d,
    "conv2d_transpose": ConvTranspose2d,
    "reshape": Reshape,
}


def spec_to_dicts(spec: NetworkSpec):
    """Represent a network as plain dicts suitable for a JSON manifest."""
    out = []
    for lay in spec.layers:
        for kind, cls in _LAYER_KINDS.items():
            if type(lay) is cls:
                d = {"kind": kind, **asdict(lay)}
                if "dims" in d:
                    d["dims"] = list(d["dims"])
                out.append(d)
                break
        else:
            raise ValueError(f"unknown layer {lay!r}")
    return out


def spec_from_dicts(dicts) -> NetworkSpec:
    """Rebuild a NetworkSpec from spec_to_dicts output."""
    layers = []
    for d in dicts:
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in _LAYER_KINDS:
            raise ValueError(f"unknown layer kind {kind!r}")
        if "dims" in d:
            d["dims"] = tuple(d["dims"])
        layers.append(_LAYER_KINDS[kind](**d))
    return NetworkSpec(tuple(layers))
