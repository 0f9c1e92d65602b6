"""Windowed-sensor classifier with analytic gradients.

Architecture: stacked 1-D convolutions applied per sensor channel (feature
maps mix, channels stay separate) with ReLU, a dense fusion layer across
channels and maps at each time step, temporal mean pooling, and a dense
softmax head. Everything is float64 and a pure function of its inputs, so
gradient checks and aggregation oracles can be tight.

Parameter traversal order is fixed: for each conv stage its weight then
bias, then fusion weight/bias, then head weight/bias. All flattening,
initialization, and serialization follow that order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dataset import SensorWindow
from .errors import ConfigError, ContractError, NumericError

MAGIC = b"SWCP"  # sensor-window classifier params
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ConvStage:
    filters: int
    kernel: int
    stride: int


@dataclass(frozen=True)
class ModelConfig:
    channels: int
    window: int
    conv_stages: tuple[ConvStage, ...] = (ConvStage(8, 9, 2), ConvStage(16, 9, 2))
    fusion_width: int = 64
    classes: int = 19
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.channels < 1 or self.window < 1:
            raise ConfigError("channels and window must be >= 1")
        if self.fusion_width < 1 or self.classes < 2:
            raise ConfigError("fusion_width must be >= 1 and classes >= 2")
        if not self.conv_stages:
            raise ConfigError("at least one conv stage is required")
        if self.init_scale <= 0:
            raise ConfigError("init_scale must be positive")
        self.temporal_lengths()  # validates kernel/stride against window

    def temporal_lengths(self) -> list[int]:
        """Time axis length after each conv stage."""
        t = self.window
        lengths = []
        for i, st in enumerate(self.conv_stages):
            if st.filters < 1 or st.kernel < 1 or st.stride < 1:
                raise ConfigError(f"conv stage {i}: all dimensions must be >= 1")
            if st.kernel > t:
                raise ConfigError(
                    f"conv stage {i}: kernel {st.kernel} exceeds temporal length {t}"
                )
            t = (t - st.kernel) // st.stride + 1
            lengths.append(t)
        return lengths

    def fingerprint(self) -> str:
        """Architecture identity; parameters from different seeds share it."""
        doc = {
            "channels": self.channels,
            "window": self.window,
            "stages": [[s.filters, s.kernel, s.stride] for s in self.conv_stages],
            "fusion_width": self.fusion_width,
            "classes": self.classes,
        }
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def layer_shapes(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        shapes: list[tuple[str, tuple[int, ...]]] = []
        maps = 1
        for i, st in enumerate(self.conv_stages):
            shapes.append((f"conv{i}.weight", (st.filters, maps, st.kernel)))
            shapes.append((f"conv{i}.bias", (st.filters,)))
            maps = st.filters
        fused_in = maps * self.channels
        shapes.append(("fusion.weight", (self.fusion_width, fused_in)))
        shapes.append(("fusion.bias", (self.fusion_width,)))
        shapes.append(("head.weight", (self.classes, self.fusion_width)))
        shapes.append(("head.bias", (self.classes,)))
        return tuple(shapes)

    def param_count(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layer_shapes())


@dataclass
class ModelParams:
    """Flat parameter vector plus its shape table; the federation unit."""

    flat: np.ndarray
    shapes: tuple[tuple[str, tuple[int, ...]], ...]
    fingerprint: str

    def __post_init__(self) -> None:
        self.flat = np.asarray(self.flat, dtype=np.float64)
        expected = sum(int(np.prod(shape)) for _, shape in self.shapes)
        if self.flat.ndim != 1 or self.flat.size != expected:
            raise ContractError(
                f"flat vector has {self.flat.size} values, shapes demand {expected}"
            )

    def copy(self) -> "ModelParams":
        return ModelParams(self.flat.copy(), self.shapes, self.fingerprint)

    def content_hash(self) -> str:
        return hashlib.sha256(self.flat.tobytes()).hexdigest()[:16]


@dataclass
class AdamState:
    step: int
    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, size: int, learning_rate: float = 0.001) -> "AdamState":
        return cls(
            step=0,
            m=np.zeros(size),
            v=np.zeros(size),
            learning_rate=learning_rate,
        )


@dataclass
class Batch:
    inputs: np.ndarray  # (B, C_ch, W) float64
    targets: np.ndarray  # (B,) int64

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.inputs.ndim != 3 or self.inputs.shape[0] < 1:
            raise ContractError("inputs must be (B, channels, window) with B >= 1")
        if self.targets.shape != (self.inputs.shape[0],):
            raise ContractError("targets length does not match batch size")


def init_params(config: ModelConfig) -> ModelParams:
    """Seeded fan-in-scaled uniform weights, zero biases.

    Weights for a layer with fan-in f are drawn from
    U(-init_scale/sqrt(f), +init_scale/sqrt(f)) in fixed traversal order.
    """
    rng = np.random.default_rng(config.seed)
    pieces: list[np.ndarray] = []
    for name, shape in config.layer_shapes():
        if name.endswith(".bias"):
            pieces.append(np.zeros(shape))
            continue
        fan_in = int(np.prod(shape[1:]))
        bound = config.init_scale / np.sqrt(fan_in)
        pieces.append(rng.uniform(-bound, bound, size=shape).ravel())
    return ModelParams(
        flat=np.concatenate(pieces),
        shapes=config.layer_shapes(),
        fingerprint=config.fingerprint(),
    )


def unflatten(
    flat: np.ndarray, shapes: tuple[tuple[str, tuple[int, ...]], ...]
) -> dict[str, np.ndarray]:
    """Views into the flat vector, keyed by layer name."""
    flat = np.asarray(flat, dtype=np.float64)
    expected = sum(int(np.prod(shape)) for _, shape in shapes)
    if flat.ndim != 1 or flat.size != expected:
        raise ContractError(
            f"flat vector has {flat.size} values, shapes demand {expected}"
        )
    out: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in shapes:
        count = int(np.prod(shape))
        out[name] = flat[offset : offset + count].reshape(shape)
        offset += count
    return out


def flatten(
    layers: dict[str, np.ndarray], shapes: tuple[tuple[str, tuple[int, ...]], ...]
) -> np.ndarray:
    pieces = []
    for name, shape in shapes:
        if name not in layers:
            raise ContractError(f"missing layer {name!r}")
        arr = np.asarray(layers[name], dtype=np.float64)
        if arr.shape != shape:
            raise ContractError(f"layer {name!r} has shape {arr.shape}, wants {shape}")
        pieces.append(arr.ravel())
    return np.concatenate(pieces)


def _check_compat(config: ModelConfig, params: ModelParams) -> None:
    if params.fingerprint != config.fingerprint():
        raise ContractError(
            f"params fingerprint {params.fingerprint} does not match "
            f"config {config.fingerprint()}"
        )


def _ensure_finite(arr: np.ndarray, layer: str) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values in layer {layer!r}")


def forward(
    config: ModelConfig, params: ModelParams, batch: Batch
) -> tuple[np.ndarray, dict]:
    """Logits (B, classes) and the cache needed for the backward pass."""
    _check_compat(config, params)
    b, c, w = batch.inputs.shape
    if c != config.channels or w != config.window:
        raise ContractError(
            f"batch is ({c} channels, {w} samples); config wants "
            f"({config.channels}, {config.window})"
        )
    if batch.targets.size and (
        batch.targets.min() < 0 or batch.targets.max() >= config.classes
    ):
        raise ContractError("target class id outside configured range")

    layers = unflatten(params.flat, params.shapes)
    act = np.ascontiguousarray(batch.inputs.reshape(b, c, 1, w))
    stages: list[tuple[np.ndarray, np.ndarray]] = []  # (input, pre-activation)
    for i, st in enumerate(config.conv_stages):
        z = kernels.conv1d_forward(
            act, layers[f"conv{i}.weight"], layers[f"conv{i}.bias"], st.stride
        )
        _ensure_finite(z, f"conv{i}")
        stages.append((act, z))
        act = np.maximum(z, 0.0)

    _, _, maps, t_len = act.shape
    feats = act.transpose(0, 3, 1, 2).reshape(b, t_len, c * maps)
    fusion_pre = feats @ layers["fusion.weight"].T + layers["fusion.bias"]
    _ensure_finite(fusion_pre, "fusion")
    fused = np.maximum(fusion_pre, 0.0)
    pooled = fused.mean(axis=1)
    logits = pooled @ layers["head.weight"].T + layers["head.bias"]
    _ensure_finite(logits, "head")

    cache = {
        "layers": layers,
        "stages": stages,
        "feats": feats,
        "fusion_pre": fusion_pre,
        "pooled": pooled,
        "t_len": t_len,
        "maps": maps,
    }
    return logits, cache


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def loss_and_grad(
    config: ModelConfig, params: ModelParams, batch: Batch
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient in flat order."""
    logits, cache = forward(config, params, batch)
    b = logits.shape[0]
    rows = np.arange(b)

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[rows, batch.targets]))
    _ensure_finite(np.array(loss), "loss")

    probs = softmax(logits)
    dlogits = probs
    dlogits[rows, batch.targets] -= 1.0
    dlogits /= b

    layers = cache["layers"]
    grads: dict[str, np.ndarray] = {}
    grads["head.weight"] = dlogits.T @ cache["pooled"]
    grads["head.bias"] = dlogits.sum(axis=0)

    dpooled = dlogits @ layers["head.weight"]
    dfused = np.repeat(dpooled[:, None, :], cache["t_len"], axis=1) / cache["t_len"]
    dfusion_pre = dfused * (cache["fusion_pre"] > 0.0)
    grads["fusion.weight"] = np.einsum("btf,btq->fq", dfusion_pre, cache["feats"])
    grads["fusion.bias"] = dfusion_pre.sum(axis=(0, 1))

    dfeats = dfusion_pre @ layers["fusion.weight"]
    bsz, c = batch.inputs.shape[0], batch.inputs.shape[1]
    dact = np.ascontiguousarray(
        dfeats.reshape(bsz, cache["t_len"], c, cache["maps"]).transpose(0, 2, 3, 1)
    )
    for i in reversed(range(len(config.conv_stages))):
        stage_in, pre = cache["stages"][i]
        dz = dact * (pre > 0.0)
        dact, dw, db = kernels.conv1d_backward(
            stage_in, layers[f"conv{i}.weight"], config.conv_stages[i].stride, dz
        )
        grads[f"conv{i}.weight"] = dw
        grads[f"conv{i}.bias"] = db

    grad_flat = flatten(grads, params.shapes)
    _ensure_finite(grad_flat, "gradient")
    return loss, grad_flat


def adam_step(
    params: ModelParams, grad: np.ndarray, state: AdamState
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; purely functional."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.flat.shape:
        raise ContractError("gradient length does not match parameter vector")
    if state.m.shape != params.flat.shape or state.v.shape != params.flat.shape:
        raise ContractError("optimizer state length does not match parameters")
    t = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_flat = params.flat - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    new_params = ModelParams(new_flat, params.shapes, params.fingerprint)
    new_state = AdamState(
        step=t,
        m=m,
        v=v,
        learning_rate=state.learning_rate,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
    return new_params, new_state


def predict_batch(
    config: ModelConfig, params: ModelParams, inputs: np.ndarray
) -> np.ndarray:
    """Argmax class ids for a stack of windows; ties go to the lowest id."""
    targets = np.zeros(inputs.shape[0], dtype=np.int64)
    logits, _ = forward(config, params, Batch(inputs=inputs, targets=targets))
    return logits.argmax(axis=1)


def predict(config: ModelConfig, params: ModelParams, window: SensorWindow) -> int:
    return int(predict_batch(config, params, window.values[None, :, :])[0])


# -- parameter transport ----------------------------------------------------


def params_to_bytes(params: ModelParams) -> bytes:
    """Little-endian binary form: magic, fingerprint, shape table, doubles."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<B", FORMAT_VERSION)
    fp = params.fingerprint.encode()
    out += struct.pack("<H", len(fp)) + fp
    out += struct.pack("<I", len(params.shapes))
    for name, shape in params.shapes:
        name_b = name.encode()
        out += struct.pack("<H", len(name_b)) + name_b
        out += struct.pack("<B", len(shape))
        for dim in shape:
            out += struct.pack("<I", dim)
    out += struct.pack("<Q", params.flat.size)
    out += params.flat.astype("<f8").tobytes()
    return bytes(out)


def params_from_bytes(blob: bytes) -> ModelParams:
    view = memoryview(blob)
    if bytes(view[:4]) != MAGIC:
        raise ContractError("bad magic bytes in parameter blob")
    pos = 4
    try:
        (version,) = struct.unpack_from("<B", view, pos)
        pos += 1
        if version != FORMAT_VERSION:
            raise ContractError(f"unsupported parameter format version {version}")
        (fp_len,) = struct.unpack_from("<H", view, pos)
        pos += 2
        fingerprint = bytes(view[pos : pos + fp_len]).decode()
        pos += fp_len
        (n_layers,) = struct.unpack_from("<I", view, pos)
        pos += 4
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for _ in range(n_layers):
            (name_len,) = struct.unpack_from("<H", view, pos)
            pos += 2
            name = bytes(view[pos : pos + name_len]).decode()
            pos += name_len
            (ndim,) = struct.unpack_from("<B", view, pos)
            pos += 1
            dims = struct.unpack_from(f"<{ndim}I", view, pos)
            pos += 4 * ndim
            shapes.append((name, tuple(int(d) for d in dims)))
        (count,) = struct.unpack_from("<Q", view, pos)
        pos += 8
    except struct.error as exc:
        raise ContractError(f"truncated parameter blob: {exc}") from None
    if pos + 8 * count != len(blob):
        raise ContractError("parameter blob has trailing or missing bytes")
    flat = np.frombuffer(view, dtype="<f8", count=count, offset=pos).astype(np.float64)
    return ModelParams(flat=flat, shapes=tuple(shapes), fingerprint=fingerprint)


def params_to_json(params: ModelParams) -> str:
    """Debug form; floats round-trip exactly through repr."""
    doc = {
        "fingerprint": params.fingerprint,
        "shapes": [[name, list(shape)] for name, shape in params.shapes],
        "values": params.flat.tolist(),
    }
    return json.dumps(doc)


def params_from_json(text: str) -> ModelParams:
    doc = json.loads(text)
    shapes = tuple((name, tuple(dims)) for name, dims in doc["shapes"])
    return ModelParams(
        flat=np.array(doc["values"], dtype=np.float64),
        shapes=shapes,
        fingerprint=doc["fingerprint"],
    )
