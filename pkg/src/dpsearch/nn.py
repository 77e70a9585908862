"""Small permutation-invariant networks with hand-written exact backprop.

A network is a per-element tanh MLP encoder, a mean pool over elements, and a
tanh MLP head. Element-arity heads read [pooled, element] rows and emit one
output per element (used for per-customer actions); global-arity heads read
the pooled vector and emit a fixed-size output (skip/take heads, critics).
Everything is float64, and weight files round-trip bit exactly through C99
hex-float strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

WEIGHT_FORMAT_VERSION = 1

KINDS = ("q", "actor", "critic")
ARITIES = ("element", "global")


class WeightFormatError(ValueError):
    """Weight file is corrupt, has the wrong version, or inconsistent shapes."""


class ShapeError(ValueError):
    pass


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ShapeError(f"inconsistent layer shapes {self.w.shape} / {self.b.shape}")


@dataclass
class NetworkParams:
    domain: str
    kind: str
    arity: str
    encoder: list[Layer]
    head: list[Layer]

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ShapeError(f"kind must be one of {KINDS}")
        if self.arity not in ARITIES:
            raise ShapeError(f"arity must be one of {ARITIES}")
        if not self.encoder or not self.head:
            raise ShapeError("encoder and head must each have at least one layer")
        embed = self.encoder[-1].w.shape[0]
        expected = 2 * embed if self.arity == "element" else embed
        if self.head[0].w.shape[1] != expected:
            raise ShapeError(f"head expects input dim {self.head[0].w.shape[1]}, encoder provides {expected}")
        if self.arity == "element" and self.head[-1].w.shape[0] != 1:
            raise ShapeError("element-arity head must emit one output per element")
        if self.kind == "critic" and (self.arity != "global" or self.out_dim != 1):
            raise ShapeError("critic must be a global head with a single output")

    @property
    def n_features(self) -> int:
        return self.encoder[0].w.shape[1]

    @property
    def out_dim(self) -> int:
        return self.head[-1].w.shape[0]

    def layers(self) -> list[Layer]:
        return [*self.encoder, *self.head]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.domain, self.kind, self.arity,
            [Layer(l.w.copy(), l.b.copy()) for l in self.encoder],
            [Layer(l.w.copy(), l.b.copy()) for l in self.head],
        )


def glorot_limit(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_network(domain: str, kind: str, arity: str, n_features: int,
                 out_dim: int = 1, embed_dim: int = 32,
                 encoder_layers: int = 2, hidden_dim: int = 32,
                 head_layers: int = 2, seed: int = 0) -> NetworkParams:
    """Glorot-uniform initialized network with zero biases."""
    rng = np.random.default_rng(seed)

    def make(fan_out: int, fan_in: int) -> Layer:
        lim = glorot_limit(fan_in, fan_out)
        return Layer(rng.uniform(-lim, lim, size=(fan_out, fan_in)), np.zeros(fan_out))

    encoder = []
    d = n_features
    for _ in range(max(1, encoder_layers)):
        encoder.append(make(embed_dim, d))
        d = embed_dim
    head = []
    d = 2 * embed_dim if arity == "element" else embed_dim
    final = 1 if arity == "element" else out_dim
    for _ in range(max(0, head_layers - 1)):
        head.append(make(hidden_dim, d))
        d = hidden_dim
    head.append(make(final, d))
    return NetworkParams(domain, kind, arity, encoder, head)


# -- forward / backward ------------------------------------------------------


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax along the last axis over unmasked entries; masked entries are
    exactly zero. Every row must have at least one unmasked entry."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.shape:
        raise ShapeError(f"mask shape {mask.shape} does not match logits {logits.shape}")
    if not mask.any(axis=-1).all():
        raise ShapeError("softmax over a fully masked row")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    feats: np.ndarray
    enc_inputs: list[np.ndarray]
    enc_acts: list[np.ndarray]
    pooled: np.ndarray
    head_inputs: list[np.ndarray]
    head_acts: list[np.ndarray]
    logits: np.ndarray
    squeeze: bool


def forward_cached(params: NetworkParams, feats: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Raw head outputs (logits / q-values / critic value) plus the cache
    needed for an exact backward pass. Accepts (n, d) or (B, n, d)."""
    feats = np.asarray(feats, dtype=float)
    squeeze = feats.ndim == 2
    if squeeze:
        feats = feats[None]
    if feats.ndim != 3 or feats.shape[2] != params.n_features:
        raise ShapeError(f"expected features (B, n, {params.n_features}), got {feats.shape}")
    h = feats
    enc_inputs, enc_acts = [], []
    for layer in params.encoder:
        enc_inputs.append(h)
        h = np.tanh(h @ layer.w.T + layer.b)
        enc_acts.append(h)
    pooled = h.mean(axis=1)
    if params.arity == "element":
        n = h.shape[1]
        x = np.concatenate([np.repeat(pooled[:, None, :], n, axis=1), h], axis=2)
    else:
        x = pooled
    head_inputs, head_acts = [], []
    for i, layer in enumerate(params.head):
        head_inputs.append(x)
        z = x @ layer.w.T + layer.b
        x = z if i == len(params.head) - 1 else np.tanh(z)
        head_acts.append(x)
    logits = x[..., 0] if params.arity == "element" else x
    return logits, ForwardCache(feats, enc_inputs, enc_acts, pooled,
                                head_inputs, head_acts, logits, squeeze)


def forward(params: NetworkParams, feats: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Network outputs: q-values per action, actor probabilities (masked
    softmax), or the critic scalar."""
    out, cache = forward_cached(params, feats)
    if params.kind == "actor":
        if mask is None:
            raise ShapeError("actor forward requires a mask")
        mask = np.asarray(mask, dtype=bool)
        if cache.squeeze and mask.ndim == 1:
            return masked_softmax(out, mask[None])[0]
        return masked_softmax(out, mask)
    if params.kind == "critic":
        out = out[..., 0]
    return out[0] if cache.squeeze else out


@dataclass
class Grads:
    encoder: list[Layer]
    head: list[Layer]

    def layers(self) -> list[Layer]:
        return [*self.encoder, *self.head]

    @staticmethod
    def zeros_like(params: NetworkParams) -> "Grads":
        return Grads(
            [Layer(np.zeros_like(l.w), np.zeros_like(l.b)) for l in params.encoder],
            [Layer(np.zeros_like(l.w), np.zeros_like(l.b)) for l in params.head],
        )

    def add_scaled(self, other: "Grads", scale: float = 1.0) -> None:
        for mine, theirs in zip(self.layers(), other.layers()):
            mine.w += scale * theirs.w
            mine.b += scale * theirs.b


def _linear_backward(dz: np.ndarray, x: np.ndarray, layer: Layer) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of z = x @ w.T + b given dz; supports 2D and 3D batches."""
    if dz.ndim == 3:
        dw = np.einsum("bno,bni->oi", dz, x)
        db = dz.sum(axis=(0, 1))
    else:
        dw = dz.T @ x
        db = dz.sum(axis=0)
    return dz @ layer.w, dw, db


def backward(params: NetworkParams, cache: ForwardCache, dlogits: np.ndarray) -> Grads:
    """Exact gradients of sum(dlogits * logits) with respect to every weight."""
    dlogits = np.asarray(dlogits, dtype=float)
    if cache.squeeze and dlogits.ndim == cache.logits.ndim - 1:
        dlogits = dlogits[None]
    grads = Grads.zeros_like(params)
    dx = dlogits[..., None] if params.arity == "element" else dlogits
    for i in range(len(params.head) - 1, -1, -1):
        if i != len(params.head) - 1:
            act = cache.head_acts[i]
            dx = dx * (1.0 - act * act)
        dx, dw, db = _linear_backward(dx, cache.head_inputs[i], params.head[i])
        grads.head[i].w[...] = dw
        grads.head[i].b[...] = db
    if params.arity == "element":
        embed = params.encoder[-1].w.shape[0]
        n = cache.enc_acts[-1].shape[1]
        dpooled = dx[:, :, :embed].sum(axis=1)
        dh = dx[:, :, embed:]
    else:
        dpooled = dx
        dh = np.zeros_like(cache.enc_acts[-1])
        n = cache.enc_acts[-1].shape[1]
    dh = dh + dpooled[:, None, :] / n
    for i in range(len(params.encoder) - 1, -1, -1):
        act = cache.enc_acts[i]
        dz = dh * (1.0 - act * act)
        dh, dw, db = _linear_backward(dz, cache.enc_inputs[i], params.encoder[i])
        grads.encoder[i].w[...] = dw
        grads.encoder[i].b[...] = db
    return grads


# -- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    m: list[Layer]
    v: list[Layer]
    step: int = 0

    @staticmethod
    def init(params: NetworkParams) -> "AdamState":
        zeros = lambda: [Layer(np.zeros_like(l.w), np.zeros_like(l.b)) for l in params.layers()]
        return AdamState(zeros(), zeros())


def adam_step(params: NetworkParams, grads: Grads, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> NetworkParams:
    """One bias-corrected Adam update; mutates params and state."""
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for layer, grad, m, v in zip(params.layers(), grads.layers(), state.m, state.v):
        for attr in ("w", "b"):
            g = getattr(grad, attr)
            mm = getattr(m, attr)
            vv = getattr(v, attr)
            mm *= beta1
            mm += (1.0 - beta1) * g
            vv *= beta2
            vv += (1.0 - beta2) * g * g
            update = lr * (mm / c1) / (np.sqrt(vv / c2) + eps)
            getattr(layer, attr)[...] -= update
    return params


# -- serialization -----------------------------------------------------------


def _layer_doc(layer: Layer) -> dict:
    return {
        "rows": int(layer.w.shape[0]),
        "cols": int(layer.w.shape[1]),
        "w": [v.hex() for v in layer.w.ravel().tolist()],
        "b": [v.hex() for v in layer.b.tolist()],
    }


def _layer_from_doc(doc: dict) -> Layer:
    try:
        rows, cols = int(doc["rows"]), int(doc["cols"])
        w = np.array([float.fromhex(v) for v in doc["w"]]).reshape(rows, cols)
        b = np.array([float.fromhex(v) for v in doc["b"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFormatError(f"bad layer record: {exc}") from None
    if b.shape != (rows,):
        raise WeightFormatError("bias length does not match layer rows")
    return Layer(w, b)


def save_params(params: NetworkParams, path: str | Path) -> Path:
    doc = {
        "version": WEIGHT_FORMAT_VERSION,
        "domain": params.domain,
        "kind": params.kind,
        "arity": params.arity,
        "encoder": [_layer_doc(l) for l in params.encoder],
        "head": [_layer_doc(l) for l in params.head],
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=1))
    return path


def load_params(path: str | Path) -> NetworkParams:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise WeightFormatError(f"not a weight file: {exc}") from None
    if not isinstance(doc, dict):
        raise WeightFormatError("weight file must hold a JSON object")
    version = doc.get("version")
    if version != WEIGHT_FORMAT_VERSION:
        raise WeightFormatError(f"unsupported weight format version {version!r}")
    try:
        params = NetworkParams(
            doc["domain"], doc["kind"], doc["arity"],
            [_layer_from_doc(l) for l in doc["encoder"]],
            [_layer_from_doc(l) for l in doc["head"]],
        )
    except KeyError as exc:
        raise WeightFormatError(f"weight file missing field {exc}") from None
    except ShapeError as exc:
        raise WeightFormatError(str(exc)) from None
    return params
