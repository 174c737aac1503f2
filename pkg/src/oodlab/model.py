"""Small MLP classifier with hand-derived backpropagation and momentum SGD.

The network maps d-dimensional features through ReLU hidden layers to K+1
logits; the extra output unit is the structural absent category. The
activations feeding the final linear layer are exposed as the penultimate
features used for clustering.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CheckpointError,
    DivergenceError,
    InvalidInputError,
    ShapeError,
    StateError,
)
from .numeric import check_finite

CHECKPOINT_MAGIC = b"DOSCKPT1"


@dataclass
class MlpModel:
    """Fully-connected network: layer_dims = (input, hidden..., K+1)."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]  # one (fan_in, fan_out) block per layer
    biases: list[np.ndarray]   # one (fan_out,) block per layer

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


@dataclass
class ForwardCache:
    """Activations recorded by forward_cached, consumed by backward."""

    inputs: list[np.ndarray]      # input to each linear layer
    pre_acts: list[np.ndarray]    # pre-activation of each linear layer


def init_mlp(layer_dims, rng: np.random.Generator) -> MlpModel:
    """He-uniform fan-in initialization; biases start at zero."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ShapeError(f"layer_dims must list >= 2 positive sizes, got {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)


def forward(model: MlpModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Return (logits, penultimate activations) for a batch of rows."""
    logits, penultimate, _ = forward_cached(model, x)
    return logits, penultimate


def forward_cached(model: MlpModel, x) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    x = check_finite(x, "features")
    if x.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {x.shape}")
    if x.shape[1] != model.input_dim:
        raise ShapeError(
            f"feature dim {x.shape[1]} does not match model input {model.input_dim}"
        )
    h = x
    inputs, pre_acts = [], []
    for i in range(model.n_layers):
        inputs.append(h)
        a = h @ model.weights[i] + model.biases[i]
        pre_acts.append(a)
        h = np.maximum(a, 0.0) if i < model.n_layers - 1 else a
    logits = h
    penultimate = inputs[-1]
    return logits, penultimate, ForwardCache(inputs=inputs, pre_acts=pre_acts)


def backward(model: MlpModel, cache: ForwardCache | None, dlogits) -> list[tuple[np.ndarray, np.ndarray]]:
    """Backpropagate a loss gradient w.r.t. the logits.

    Returns per-layer (dW, db) matching the model's parameter shapes. Requires
    the cache produced by forward_cached on the same inputs.
    """
    if cache is None:
        raise StateError("backward requires the cache from a prior forward_cached")
    dlogits = np.asarray(dlogits, dtype=np.float64)
    if dlogits.shape != cache.pre_acts[-1].shape:
        raise ShapeError(
            f"dlogits shape {dlogits.shape} does not match logits "
            f"{cache.pre_acts[-1].shape}"
        )
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * model.n_layers  # type: ignore
    delta = dlogits
    for i in range(model.n_layers - 1, -1, -1):
        dw = cache.inputs[i].T @ delta
        db = delta.sum(axis=0)
        grads[i] = (dw, db)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (cache.pre_acts[i - 1] > 0.0)
    return grads


@dataclass
class SgdState:
    """Momentum SGD with L2 weight decay folded into the gradient."""

    learning_rate: float
    momentum: float = 0.9
    weight_decay: float = 0.0
    milestones: tuple[int, ...] = ()
    decay_factor: float = 0.1
    velocities: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        if not (0.0 <= self.momentum < 1.0):
            raise InvalidInputError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.learning_rate <= 0.0:
            raise InvalidInputError(f"learning_rate must be > 0, got {self.learning_rate}")


def init_sgd_state(model: MlpModel, learning_rate: float, momentum: float = 0.9,
                   weight_decay: float = 0.0, milestones=(), decay_factor: float = 0.1) -> SgdState:
    velocities = [
        (np.zeros_like(w), np.zeros_like(b))
        for w, b in zip(model.weights, model.biases)
    ]
    return SgdState(
        learning_rate=float(learning_rate),
        momentum=float(momentum),
        weight_decay=float(weight_decay),
        milestones=tuple(int(m) for m in milestones),
        decay_factor=float(decay_factor),
        velocities=velocities,
    )


def lr_at_epoch(state: SgdState, epoch: int) -> float:
    """Initial rate decayed once per milestone already reached."""
    if epoch < 0:
        raise InvalidInputError(f"epoch must be >= 0, got {epoch}")
    n_hit = sum(1 for m in state.milestones if m <= epoch)
    return state.learning_rate * state.decay_factor ** n_hit


def sgd_step(model: MlpModel, grads, state: SgdState, lr: float | None = None) -> tuple[MlpModel, SgdState]:
    """One update: v <- mu*v + g + wd*p; p <- p - lr*v. Returns new model/state."""
    if len(grads) != model.n_layers:
        raise ShapeError("gradient list length does not match layer count")
    if lr is None:
        lr = state.learning_rate
    new_w, new_b, new_v = [], [], []
    for (w, b), (dw, db), (vw, vb) in zip(
        zip(model.weights, model.biases), grads, state.velocities
    ):
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise DivergenceError("non-finite gradient encountered")
        if dw.shape != w.shape or db.shape != b.shape:
            raise ShapeError("gradient shape does not match parameter shape")
        vw2 = state.momentum * vw + dw + state.weight_decay * w
        vb2 = state.momentum * vb + db + state.weight_decay * b
        w2 = w - lr * vw2
        b2 = b - lr * vb2
        if not (np.all(np.isfinite(w2)) and np.all(np.isfinite(b2))):
            raise DivergenceError("parameter update produced non-finite values")
        new_w.append(w2)
        new_b.append(b2)
        new_v.append((vw2, vb2))
    updated = MlpModel(layer_dims=model.layer_dims, weights=new_w, biases=new_b)
    new_state = SgdState(
        learning_rate=state.learning_rate,
        momentum=state.momentum,
        weight_decay=state.weight_decay,
        milestones=state.milestones,
        decay_factor=state.decay_factor,
        velocities=new_v,
    )
    return updated, new_state


@dataclass
class Checkpoint:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    velocities: list[tuple[np.ndarray, np.ndarray]]
    epoch: int
    seed: int
    config_hash: int

    def to_model(self) -> MlpModel:
        return MlpModel(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def config_hash64(text: str) -> int:
    """Stable 64-bit hash of a canonical config string (not Python hash())."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def save_checkpoint(path, model: MlpModel, state: SgdState, epoch: int, seed: int,
                    config_hash: int = 0) -> None:
    """Binary layout: magic, u32 dim count, u32 dims, f64 params, f64 velocity
    buffers, u64 epoch, u64 seed, u64 config hash; all little-endian."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", len(model.layer_dims))]
    parts.append(struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims))
    for w, b in zip(model.weights, model.biases):
        parts.append(w.astype("<f8").tobytes())
        parts.append(b.astype("<f8").tobytes())
    for vw, vb in state.velocities:
        parts.append(vw.astype("<f8").tobytes())
        parts.append(vb.astype("<f8").tobytes())
    parts.append(struct.pack("<QQQ", int(epoch), int(seed), int(config_hash)))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(CHECKPOINT_MAGIC) + 4:
        raise CheckpointError("checkpoint file truncated (no header)")
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(
            f"bad magic / unsupported version: {blob[:len(CHECKPOINT_MAGIC)]!r}"
        )
    off = len(CHECKPOINT_MAGIC)
    (n_dims,) = struct.unpack_from("<I", blob, off)
    off += 4
    if n_dims < 2 or len(blob) < off + 4 * n_dims:
        raise CheckpointError("checkpoint file truncated (dims)")
    dims = struct.unpack_from(f"<{n_dims}I", blob, off)
    off += 4 * n_dims
    n_params = sum(fi * fo + fo for fi, fo in zip(dims[:-1], dims[1:]))
    expected = off + 16 * n_params + 24
    if len(blob) != expected:
        raise CheckpointError(
            f"checkpoint size {len(blob)} does not match layout ({expected} bytes)"
        )

    def read_block(shape):
        nonlocal off
        n = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape).copy()
        off += 8 * n
        return arr

    weights, biases, velocities = [], [], []
    for fi, fo in zip(dims[:-1], dims[1:]):
        weights.append(read_block((fi, fo)))
        biases.append(read_block((fo,)))
    for fi, fo in zip(dims[:-1], dims[1:]):
        velocities.append((read_block((fi, fo)), read_block((fo,))))
    epoch, seed, chash = struct.unpack_from("<QQQ", blob, off)
    return Checkpoint(
        layer_dims=tuple(int(d) for d in dims),
        weights=weights,
        biases=biases,
        velocities=velocities,
        epoch=int(epoch),
        seed=int(seed),
        config_hash=int(chash),
    )
