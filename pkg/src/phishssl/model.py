"""Attention-gated encoder producing unit-norm embeddings.

Pipeline per input row ``x`` (already standardized)::

    alpha = sigmoid(W2 relu(W1 x + b1) + b2)
    x_att = x * alpha + residual_beta * x
    h1    = relu(LN1(E1 x_att + c1))
    h2    = dropout(relu(LN2(E2 h1 + c2)))
    z     = normalize(E3 h2 + c3)

Parameters live in a flat ``name -> ndarray`` mapping so optimizers and the
checkpoint writer can treat them uniformly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn

PARAM_NAMES = (
    "att_W1", "att_b1", "att_W2", "att_b2", "residual_beta",
    "enc1_W", "enc1_b", "ln1_gamma", "ln1_beta",
    "enc2_W", "enc2_b", "ln2_gamma", "ln2_beta",
    "enc3_W", "enc3_b",
)  # fmt: skip

LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelDims:
    input_dim: int
    att_dim: int = 64
    hidden1: int = 256
    hidden2: int = 128
    embed_dim: int = 128

    def __post_init__(self) -> None:
        if min(asdict(self).values()) <= 0:
            raise ValueError(f"all dimensions must be positive: {self}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ModelParams:
    dims: ModelDims
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        expected = param_shapes(self.dims)
        for name, shape in expected.items():
            if name not in self.tensors:
                raise ValueError(f"missing parameter {name!r}")
            if self.tensors[name].shape != shape:
                raise ValueError(
                    f"parameter {name!r} has shape {self.tensors[name].shape}, expected {shape}"
                )

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {k: v.copy() for k, v in self.tensors.items()})

    @property
    def residual_beta(self) -> float:
        return float(self.tensors["residual_beta"][0])


def param_shapes(d: ModelDims) -> dict[str, tuple[int, ...]]:
    return {
        "att_W1": (d.att_dim, d.input_dim),
        "att_b1": (d.att_dim,),
        "att_W2": (d.input_dim, d.att_dim),
        "att_b2": (d.input_dim,),
        "residual_beta": (1,),
        "enc1_W": (d.hidden1, d.input_dim),
        "enc1_b": (d.hidden1,),
        "ln1_gamma": (d.hidden1,),
        "ln1_beta": (d.hidden1,),
        "enc2_W": (d.hidden2, d.hidden1),
        "enc2_b": (d.hidden2,),
        "ln2_gamma": (d.hidden2,),
        "ln2_beta": (d.hidden2,),
        "enc3_W": (d.embed_dim, d.hidden2),
        "enc3_b": (d.embed_dim,),
    }


def init_params(dims: ModelDims, seed: int = 0, residual_beta: float = 1.0) -> ModelParams:
    """He-normal weights for layers feeding a ReLU, LeCun-normal elsewhere.

    Biases and layer-norm shifts start at zero and gains at one, so every
    attention gate initially reads 0.5.
    """
    rng = np.random.default_rng(seed)
    shapes = param_shapes(dims)

    def weight(name: str, gain: float) -> np.ndarray:
        fan_in = shapes[name][1]
        return rng.normal(0.0, np.sqrt(gain / fan_in), size=shapes[name])

    t = {name: np.zeros(shape) for name, shape in shapes.items()}
    t["att_W1"] = weight("att_W1", 2.0)
    t["att_W2"] = weight("att_W2", 1.0)
    t["enc1_W"] = weight("enc1_W", 2.0)
    t["enc2_W"] = weight("enc2_W", 2.0)
    t["enc3_W"] = weight("enc3_W", 1.0)
    t["ln1_gamma"][:] = 1.0
    t["ln2_gamma"][:] = 1.0
    t["residual_beta"][:] = residual_beta
    return ModelParams(dims, t)


def attention_weights(x: np.ndarray, t: dict[str, np.ndarray]):
    """Per-feature gates ``alpha`` in [0, 1] for each row of ``x``."""
    a1, c1 = nn.dense_forward(x, t["att_W1"], t["att_b1"])
    r1, cr = nn.relu_forward(a1)
    a2, c2 = nn.dense_forward(r1, t["att_W2"], t["att_b2"])
    alpha, cs = nn.sigmoid_forward(a2)
    return alpha, (c1, cr, c2, cs)


def attention_weights_backward(grad_alpha: np.ndarray, cache, grads: dict[str, np.ndarray]) -> np.ndarray:
    c1, cr, c2, cs = cache
    g = nn.sigmoid_backward(grad_alpha, cs)
    g, gW2, gb2 = nn.dense_backward(g, c2)
    g = nn.relu_backward(g, cr)
    gx, gW1, gb1 = nn.dense_backward(g, c1)
    grads["att_W1"] += gW1
    grads["att_b1"] += gb1
    grads["att_W2"] += gW2
    grads["att_b2"] += gb2
    return gx


def attention_forward(x: np.ndarray, params: ModelParams):
    """Returns ``(alpha, x_att)`` for a standardized batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.dims.input_dim:
        raise ValueError(f"expected (batch, {params.dims.input_dim}) input, got {x.shape}")
    alpha, _ = attention_weights(x, params.tensors)
    return alpha, x * alpha + params.residual_beta * x


def encoder_forward(x_att: np.ndarray, t: dict[str, np.ndarray], mask: nn.DropoutMask | None):
    a1, c1 = nn.dense_forward(x_att, t["enc1_W"], t["enc1_b"])
    n1, cn1 = nn.layer_norm_forward(a1, t["ln1_gamma"], t["ln1_beta"], LN_EPS)
    h1, cr1 = nn.relu_forward(n1)
    a2, c2 = nn.dense_forward(h1, t["enc2_W"], t["enc2_b"])
    n2, cn2 = nn.layer_norm_forward(a2, t["ln2_gamma"], t["ln2_beta"], LN_EPS)
    r2, cr2 = nn.relu_forward(n2)
    h2 = nn.apply_dropout(r2, mask)
    z_raw, c3 = nn.dense_forward(h2, t["enc3_W"], t["enc3_b"])
    z, cz = nn.l2_normalize_forward(z_raw)
    return z, (c1, cn1, cr1, c2, cn2, cr2, mask, c3, cz)


def encoder_backward(grad_z: np.ndarray, cache, grads: dict[str, np.ndarray]) -> np.ndarray:
    c1, cn1, cr1, c2, cn2, cr2, mask, c3, cz = cache
    g = nn.l2_normalize_backward(grad_z, cz)
    g, gW, gb = nn.dense_backward(g, c3)
    grads["enc3_W"] += gW
    grads["enc3_b"] += gb
    g = nn.dropout_backward(g, mask)
    g = nn.relu_backward(g, cr2)
    g, gg, gs = nn.layer_norm_backward(g, cn2)
    grads["ln2_gamma"] += gg
    grads["ln2_beta"] += gs
    g, gW, gb = nn.dense_backward(g, c2)
    grads["enc2_W"] += gW
    grads["enc2_b"] += gb
    g = nn.relu_backward(g, cr1)
    g, gg, gs = nn.layer_norm_backward(g, cn1)
    grads["ln1_gamma"] += gg
    grads["ln1_beta"] += gs
    g, gW, gb = nn.dense_backward(g, c1)
    grads["enc1_W"] += gW
    grads["enc1_b"] += gb
    return g


def pre_activations(cache) -> list[np.ndarray]:
    """ReLU inputs recorded in an encoder cache (used to avoid kinks in gradient checks)."""
    return [cache[2], cache[5]]


def forward_views(
    views: list[np.ndarray],
    params: ModelParams,
    masks: list[nn.DropoutMask | None] | None = None,
    attention: bool = True,
    shared_attention: bool = True,
):
    """Encode several views of one batch.

    With ``shared_attention`` the gates are computed from ``views[0]`` (the
    anchor) and applied to every view; otherwise each view gates itself.
    With ``attention=False`` the gate is bypassed and ``x_att = x``.
    """
    t = params.tensors
    masks = masks if masks is not None else [None] * len(views)
    if any(v.shape[1] != params.dims.input_dim for v in views):
        raise ValueError(f"views must have {params.dims.input_dim} columns")
    beta = params.residual_beta
    att_caches: list = []
    alphas: list[np.ndarray | None] = []
    if attention:
        if shared_attention:
            alpha, cache = attention_weights(views[0], t)
            att_caches.append(cache)
            alphas = [alpha] * len(views)
        else:
            for v in views:
                alpha, cache = attention_weights(v, t)
                att_caches.append(cache)
                alphas.append(alpha)
        x_atts = [v * a + beta * v for v, a in zip(views, alphas)]
    else:
        alphas = [None] * len(views)
        x_atts = list(views)

    zs, enc_caches = [], []
    for x_att, mask in zip(x_atts, masks):
        z, cache = encoder_forward(x_att, t, mask)
        zs.append(z)
        enc_caches.append(cache)
    return zs, (views, alphas, att_caches, enc_caches, attention, shared_attention, beta)


def backward_views(grad_zs: list[np.ndarray], cache, params: ModelParams):
    """Returns ``(param_grads, input_grads)`` for :func:`forward_views`."""
    views, alphas, att_caches, enc_caches, attention, shared, beta = cache
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    grad_att = [encoder_backward(g, c, grads) for g, c in zip(grad_zs, enc_caches)]
    if not attention:
        return grads, grad_att

    grad_inputs = [g * (a + beta) for g, a in zip(grad_att, alphas)]
    grads["residual_beta"] += sum(float((g * v).sum()) for g, v in zip(grad_att, views))
    grad_alphas = [g * v for g, v in zip(grad_att, views)]
    if shared:
        grad_inputs[0] = grad_inputs[0] + attention_weights_backward(
            sum(grad_alphas), att_caches[0], grads
        )
    else:
        for i, (ga, ac) in enumerate(zip(grad_alphas, att_caches)):
            grad_inputs[i] = grad_inputs[i] + attention_weights_backward(ga, ac, grads)
    return grads, grad_inputs


def encode(
    x: np.ndarray,
    params: ModelParams,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout_p: float = 0.0,
    attention: bool = True,
    batch_size: int = 4096,
) -> np.ndarray:
    """Embed a batch onto the unit sphere.

    ``mode="eval"`` is mask-free and deterministic. ``mode="train"`` draws an
    inverted-dropout mask on the second hidden layer from ``rng``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if mode not in ("eval", "train"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "train" and rng is None:
        raise ValueError("train mode needs an rng")
    out = []
    for start in range(0, x.shape[0], batch_size):
        chunk = x[start : start + batch_size]
        mask = None
        if mode == "train" and dropout_p > 0:
            mask = nn.sample_dropout_mask((chunk.shape[0], params.dims.hidden2), dropout_p, rng)
        (z,), _ = forward_views([chunk], params, [mask], attention=attention)
        out.append(z)
    return np.concatenate(out, axis=0) if out else np.zeros((0, params.dims.embed_dim))
