"""Feed-forward inference engine with analytic input gradients.

Loads networks from the repo's manifest+blob format and supports the layer
vocabulary {dense, conv2d, relu, maxpool2d, flatten, softmax}.  Weights are
stored float32 (the on-disk precision); all in-flight arithmetic runs in
float64 so that finite-difference gradient checks at h = 1e-3 stay clean.

The backward pass propagates the squared-error cost between the softmax
output and a target distribution down to the input image.  Softmax is
differentiated through its full Jacobian (the cross-entropy shortcut does
not apply to a squared-error cost).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from advkit.errors import FormatError, ModelValidationError, ShapeError

LAYER_KINDS = ("dense", "conv2d", "relu", "maxpool2d", "flatten", "softmax")


@dataclass
class Layer:
    kind: str
    weights: np.ndarray | None = None  # dense: [out,in]; conv2d: [out_ch,in_ch,kh,kw]
    biases: np.ndarray | None = None   # [out]
    stride: int = 1
    padding: int = 0
    pool_kh: int = 0
    pool_kw: int = 0


@dataclass
class NetworkSpec:
    input_shape: tuple[int, int, int]  # [C, H, W]
    layers: list[Layer]
    num_classes: int
    layer_output_shapes: list[tuple[int, ...]] = field(default_factory=list)


@dataclass
class ForwardTrace:
    inputs: list[np.ndarray]   # input seen by each layer
    outputs: list[np.ndarray]  # output of each layer
    output: np.ndarray         # final distribution, shape [num_classes]


def _conv_out_hw(h: int, w: int, kh: int, kw: int, stride: int, padding: int) -> tuple[int, int]:
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ModelValidationError(f"window {kh}x{kw} does not fit input {h}x{w}")
    return oh, ow


def _infer_shapes(input_shape, layers, num_classes) -> list[tuple[int, ...]]:
    """Propagate shapes through the layer list, enforcing structural invariants."""
    shapes = []
    cur: tuple[int, ...] = tuple(input_shape)
    softmax_seen = False
    for i, layer in enumerate(layers):
        if softmax_seen:
            raise ModelValidationError("softmax must be the last layer")
        if layer.kind == "dense":
            if len(cur) != 1:
                raise ModelValidationError(f"dense layer {i} expects a flat vector, got shape {cur}")
            out, inp = layer.weights.shape
            if inp != cur[0]:
                raise ModelValidationError(f"dense layer {i} expects width {inp}, got {cur[0]}")
            cur = (out,)
        elif layer.kind == "conv2d":
            if len(cur) != 3:
                raise ModelValidationError(f"conv2d layer {i} expects [C,H,W], got shape {cur}")
            out_ch, in_ch, kh, kw = layer.weights.shape
            if in_ch != cur[0]:
                raise ModelValidationError(f"conv2d layer {i} expects {in_ch} channels, got {cur[0]}")
            oh, ow = _conv_out_hw(cur[1], cur[2], kh, kw, layer.stride, layer.padding)
            cur = (out_ch, oh, ow)
        elif layer.kind == "maxpool2d":
            if len(cur) != 3:
                raise ModelValidationError(f"maxpool2d layer {i} expects [C,H,W], got shape {cur}")
            oh, ow = _conv_out_hw(cur[1], cur[2], layer.pool_kh, layer.pool_kw, layer.stride, 0)
            cur = (cur[0], oh, ow)
        elif layer.kind == "flatten":
            cur = (int(np.prod(cur)),)
        elif layer.kind in ("relu", "softmax"):
            pass
        else:
            raise ModelValidationError(f"unknown layer kind {layer.kind!r}")
        if layer.kind == "softmax":
            softmax_seen = True
        shapes.append(cur)
    if not softmax_seen:
        raise ModelValidationError("network must end with a softmax layer")
    if cur != (num_classes,):
        raise ModelValidationError(f"final output shape {cur} does not match num_classes {num_classes}")
    return shapes


def load_model(manifest_path: str | Path) -> NetworkSpec:
    """Load a network from a JSON manifest plus raw little-endian float32 blob."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"cannot read manifest {manifest_path}: {e}") from e

    for key in ("format_version", "input_shape", "num_classes", "weights_file", "weights_sha256", "layers"):
        if key not in manifest:
            raise FormatError(f"manifest missing field {key!r}")
    if manifest["format_version"] != 1:
        raise FormatError(f"unsupported format_version {manifest['format_version']}")
    input_shape = tuple(manifest["input_shape"])
    if len(input_shape) != 3 or any(d < 1 for d in input_shape):
        raise FormatError(f"bad input_shape {input_shape}")

    blob_path = manifest_path.parent / manifest["weights_file"]
    try:
        blob = blob_path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read weight blob {blob_path}: {e}") from e
    if hashlib.sha256(blob).hexdigest() != manifest["weights_sha256"]:
        raise FormatError(f"weight blob {blob_path} fails sha256 check")
    flat = np.frombuffer(blob, dtype="<f4")

    layers: list[Layer] = []
    offset = 0

    def take(n: int) -> np.ndarray:
        nonlocal offset
        if offset + n > flat.size:
            raise FormatError("weight blob shorter than manifest requires")
        out = flat[offset:offset + n].copy()
        offset += n
        return out

    for spec in manifest["layers"]:
        kind = spec.get("kind")
        if kind == "dense":
            inp, out = int(spec["in"]), int(spec["out"])
            w = take(out * inp).reshape(out, inp)
            b = take(out)
            layers.append(Layer("dense", weights=w, biases=b))
        elif kind == "conv2d":
            in_ch, out_ch = int(spec["in_ch"]), int(spec["out_ch"])
            kh, kw = int(spec["kh"]), int(spec["kw"])
            stride, padding = int(spec["stride"]), int(spec["padding"])
            if stride < 1 or padding < 0:
                raise FormatError(f"bad stride/padding in conv2d: {spec}")
            w = take(out_ch * in_ch * kh * kw).reshape(out_ch, in_ch, kh, kw)
            b = take(out_ch)
            layers.append(Layer("conv2d", weights=w, biases=b, stride=stride, padding=padding))
        elif kind == "maxpool2d":
            stride = int(spec["stride"])
            if stride < 1:
                raise FormatError(f"bad stride in maxpool2d: {spec}")
            layers.append(Layer("maxpool2d", stride=stride,
                                pool_kh=int(spec["kh"]), pool_kw=int(spec["kw"])))
        elif kind in ("relu", "flatten", "softmax"):
            layers.append(Layer(kind))
        else:
            raise FormatError(f"unknown layer kind {kind!r} in manifest")

    if offset != flat.size:
        raise FormatError(f"weight blob has {flat.size - offset} unused scalars")

    num_classes = int(manifest["num_classes"])
    shapes = _infer_shapes(input_shape, layers, num_classes)
    return NetworkSpec(input_shape=input_shape, layers=layers,
                       num_classes=num_classes, layer_output_shapes=shapes)


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int):
    """Unfold [C,H,W] into a [C*kh*kw, OH*OW] patch matrix."""
    c, h, w = x.shape
    oh, ow = _conv_out_hw(h, w, kh, kw, stride, padding)
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = x[:, i:i + stride * oh:stride, j:j + stride * ow:stride]
    return cols.reshape(c * kh * kw, oh * ow), oh, ow


def _col2im(dcols: np.ndarray, in_shape, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add patch gradients back to the input plane."""
    c, h, w = in_shape
    oh, ow = _conv_out_hw(h, w, kh, kw, stride, padding)
    dx = np.zeros((c, h + 2 * padding, w + 2 * padding), dtype=dcols.dtype)
    dcols = dcols.reshape(c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            dx[:, i:i + stride * oh:stride, j:j + stride * ow:stride] += dcols[:, i, j]
    if padding:
        dx = dx[:, padding:-padding, padding:-padding]
    return dx


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z))
    return e / np.sum(e)


def _layer_forward(layer: Layer, x: np.ndarray) -> np.ndarray:
    if layer.kind == "dense":
        return layer.weights.astype(np.float64) @ x + layer.biases.astype(np.float64)
    if layer.kind == "conv2d":
        out_ch, in_ch, kh, kw = layer.weights.shape
        cols, oh, ow = _im2col(x, kh, kw, layer.stride, layer.padding)
        wmat = layer.weights.astype(np.float64).reshape(out_ch, -1)
        z = wmat @ cols + layer.biases.astype(np.float64)[:, None]
        return z.reshape(out_ch, oh, ow)
    if layer.kind == "relu":
        return np.maximum(x, 0.0)
    if layer.kind == "maxpool2d":
        cols, oh, ow = _im2col(x, layer.pool_kh, layer.pool_kw, layer.stride, 0)
        c = x.shape[0]
        patches = cols.reshape(c, layer.pool_kh * layer.pool_kw, oh * ow)
        return patches.max(axis=1).reshape(c, oh, ow)
    if layer.kind == "flatten":
        return x.reshape(-1)
    if layer.kind == "softmax":
        return _softmax(x)
    raise ShapeError(f"unknown layer kind {layer.kind!r}")


def forward(net: NetworkSpec, x: np.ndarray) -> ForwardTrace:
    """Run the network on one [C,H,W] image, retaining per-layer tensors for backward."""
    if tuple(x.shape) != tuple(net.input_shape):
        raise ShapeError(f"input shape {x.shape} does not match model {net.input_shape}")
    a = np.asarray(x, dtype=np.float64)
    inputs, outputs = [], []
    for layer in net.layers:
        inputs.append(a)
        a = _layer_forward(layer, a)
        outputs.append(a)
    return ForwardTrace(inputs=inputs, outputs=outputs, output=a)


def _layer_backward(layer: Layer, x: np.ndarray, out: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Apply the layer's input-Jacobian transpose to the downstream gradient g."""
    if layer.kind == "dense":
        return layer.weights.astype(np.float64).T @ g
    if layer.kind == "conv2d":
        out_ch, in_ch, kh, kw = layer.weights.shape
        wmat = layer.weights.astype(np.float64).reshape(out_ch, -1)
        dcols = wmat.T @ g.reshape(out_ch, -1)
        return _col2im(dcols, x.shape, kh, kw, layer.stride, layer.padding)
    if layer.kind == "relu":
        return g * (x > 0)
    if layer.kind == "maxpool2d":
        kh, kw, stride = layer.pool_kh, layer.pool_kw, layer.stride
        cols, oh, ow = _im2col(x, kh, kw, stride, 0)
        c = x.shape[0]
        patches = cols.reshape(c, kh * kw, oh * ow)
        # route to the first maximal element of each window (tie determinism)
        winners = np.argmax(patches, axis=1)
        dcols = np.zeros_like(patches)
        ci, pi = np.meshgrid(np.arange(c), np.arange(oh * ow), indexing="ij")
        dcols[ci, winners, pi] = g.reshape(c, oh * ow)
        return _col2im(dcols.reshape(c * kh * kw, oh * ow), x.shape, kh, kw, stride, 0)
    if layer.kind == "flatten":
        return g.reshape(x.shape)
    if layer.kind == "softmax":
        # full Jacobian: J = diag(a) - a a^T
        return out * (g - np.dot(g, out))
    raise ShapeError(f"unknown layer kind {layer.kind!r}")


def input_gradient(net: NetworkSpec, trace: ForwardTrace, y: np.ndarray) -> np.ndarray:
    """Gradient of C = sum_j (a_j - y_j)^2 with respect to the input image."""
    if trace.output.shape != (net.num_classes,) or y.shape != (net.num_classes,):
        raise ShapeError("trace/target length does not match num_classes")
    if len(trace.inputs) != len(net.layers):
        raise ShapeError("trace does not match network depth")
    g = 2.0 * (trace.output - np.asarray(y, dtype=np.float64))
    for layer, x, out in zip(reversed(net.layers), reversed(trace.inputs), reversed(trace.outputs)):
        if g.shape != out.shape:
            raise ShapeError("stale trace: gradient shape mismatch")
        g = _layer_backward(layer, x, out, g)
    return g


def predict(net: NetworkSpec, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Convenience top-1 prediction; returns (class index, distribution)."""
    trace = forward(net, x)
    return int(np.argmax(trace.output)), trace.output
