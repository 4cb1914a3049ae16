"""
Fully-convolutional encoder.

conv (same padding, stride 1) -> relu, repeated per layer, then a mean over
the temporal axis and a dense map to F. The optional projection head
(dense -> relu -> dense) is only applied when computing the pretraining loss.
"""
import numpy as np

from ..core import autodiff as ad
from ..exceptions import ShapeError
from ..schemas.encoder import EncoderConfig, ModelParams


def init_params(config: EncoderConfig, seed: int) -> ModelParams:
    """Kaiming-uniform weights (bound sqrt(6 / fan_in)) and zero biases.

    dense.weight is drawn with its bound scaled by embed_init_gain so that raw
    dot products divided by tau start close to zero: the first loss of a batch
    with k sub-blocks then sits near ln k.
    """
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}

    def uniform(shape: tuple[int, ...], fan_in: int, gain: float = 1.0) -> np.ndarray:
        bound = gain * np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape)

    c_in = config.in_channels
    for i, (c_out, k) in enumerate(zip(config.channels, config.kernel_sizes)):
        tensors[f"conv{i}.weight"] = uniform((c_out, c_in, k), c_in * k)
        tensors[f"conv{i}.bias"] = np.zeros(c_out)
        c_in = c_out

    tensors["dense.weight"] = uniform((c_in, config.embed_dim), c_in, config.embed_init_gain)
    tensors["dense.bias"] = np.zeros(config.embed_dim)

    if config.projection_hidden is not None:
        hidden = config.projection_hidden
        tensors["head.0.weight"] = uniform((config.embed_dim, hidden), config.embed_dim)
        tensors["head.0.bias"] = np.zeros(hidden)
        tensors["head.1.weight"] = uniform((hidden, config.embed_dim), hidden)
        tensors["head.1.bias"] = np.zeros(config.embed_dim)

    return ModelParams(tensors=tensors)


def config_from_params(params: ModelParams) -> EncoderConfig:
    """Recover the architecture from tensor names and shapes (model files carry no config)."""
    t = params.tensors
    channels, kernel_sizes = [], []
    i = 0
    while f"conv{i}.weight" in t:
        c_out, _, k = t[f"conv{i}.weight"].shape
        channels.append(int(c_out))
        kernel_sizes.append(int(k))
        i += 1
    if not channels or "dense.weight" not in t:
        raise ShapeError("model file lacks conv or dense tensors")
    return EncoderConfig(
        in_channels=int(t["conv0.weight"].shape[1]),
        channels=channels,
        kernel_sizes=kernel_sizes,
        embed_dim=int(t["dense.weight"].shape[1]),
        projection_hidden=int(t["head.0.weight"].shape[1]) if "head.0.weight" in t else None,
    )


def as_tensors(params: ModelParams, requires_grad: bool = True) -> dict[str, ad.Tensor]:
    return {name: ad.Tensor(value, requires_grad=requires_grad, name=name) for name, value in params.tensors.items()}


def forward(x: ad.Tensor, weights: dict[str, ad.Tensor], config: EncoderConfig, projection: bool = False) -> ad.Tensor:
    """Graph-building encoder pass over an N x L x D tensor; returns N x F."""
    if x.data.ndim != 3:
        raise ShapeError(f"expected N x L x D blocks, got shape {x.shape}")
    if x.shape[2] != config.in_channels:
        raise ShapeError(f"input has D={x.shape[2]}, encoder expects {config.in_channels} channels")

    h = ad.transpose(x, (0, 2, 1))  # N x D x L
    for i in range(config.num_layers):
        h = ad.conv1d(h, weights[f"conv{i}.weight"], padding="same")
        h = ad.bias_add(h, weights[f"conv{i}.bias"])
        h = ad.relu(h)
    h = ad.mean_pool(h, axis=2)
    z = ad.bias_add(ad.dense(h, weights["dense.weight"]), weights["dense.bias"])

    if projection and "head.0.weight" in weights:
        z = ad.relu(ad.bias_add(ad.dense(z, weights["head.0.weight"]), weights["head.0.bias"]))
        z = ad.bias_add(ad.dense(z, weights["head.1.weight"]), weights["head.1.bias"])
    return z


def encode(blocks: np.ndarray, params: ModelParams, config: EncoderConfig, projection: bool = False) -> np.ndarray:
    """Embed N x L x D blocks (or whole windows) into an N x F matrix."""
    blocks = np.asarray(blocks, dtype=np.float64)
    if blocks.ndim != 3:
        raise ShapeError(f"expected N x L x D blocks, got shape {blocks.shape}")
    weights = as_tensors(params, requires_grad=False)
    return forward(ad.Tensor(blocks), weights, config, projection=projection).data
