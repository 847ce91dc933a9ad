import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from advkit import engine, gradcheck
from advkit.attack import cost, one_hot
from advkit.engine import Layer, NetworkSpec, _infer_shapes
from advkit.errors import FormatError, ModelValidationError, ShapeError


def write_bundle(tmp_path: Path, layers_json, arrays, input_shape=(1, 2, 2), num_classes=2,
                 corrupt_blob=False):
    blob = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)
    if corrupt_blob:
        blob = blob[:-4]
    (tmp_path / "m.bin").write_bytes(blob)
    manifest = {
        "format_version": 1,
        "input_shape": list(input_shape),
        "num_classes": num_classes,
        "weights_file": "m.bin",
        "weights_sha256": hashlib.sha256(blob).hexdigest(),
        "layers": layers_json,
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(manifest))
    return path


def test_load_mlp_tiny(mlp_tiny):
    assert mlp_tiny.input_shape == (1, 28, 28)
    assert mlp_tiny.num_classes == 10
    dense = [l for l in mlp_tiny.layers if l.kind == "dense"]
    assert len(dense) == 2
    assert dense[0].weights.shape == (64, 784)
    assert dense[1].weights.shape == (10, 64)


def test_softmax_mid_network_rejected(tmp_path):
    layers = [
        {"kind": "flatten"},
        {"kind": "softmax"},
        {"kind": "dense", "in": 4, "out": 2},
    ]
    w = np.zeros((2, 4), dtype=np.float32)
    b = np.zeros(2, dtype=np.float32)
    path = write_bundle(tmp_path, layers, [w, b])
    with pytest.raises(ModelValidationError):
        engine.load_model(path)


def test_truncated_blob_rejected(tmp_path):
    layers = [{"kind": "flatten"}, {"kind": "dense", "in": 4, "out": 2}, {"kind": "softmax"}]
    w = np.zeros((2, 4), dtype=np.float32)
    b = np.zeros(2, dtype=np.float32)
    path = write_bundle(tmp_path, layers, [w, b], corrupt_blob=True)
    with pytest.raises(FormatError):
        engine.load_model(path)


def test_bad_sha_rejected(tmp_path):
    layers = [{"kind": "flatten"}, {"kind": "dense", "in": 4, "out": 2}, {"kind": "softmax"}]
    w = np.zeros((2, 4), dtype=np.float32)
    b = np.zeros(2, dtype=np.float32)
    path = write_bundle(tmp_path, layers, [w, b])
    manifest = json.loads(path.read_text())
    manifest["weights_sha256"] = "0" * 64
    path.write_text(json.dumps(manifest))
    with pytest.raises(FormatError):
        engine.load_model(path)


def test_broken_shape_chain_rejected(tmp_path):
    layers = [{"kind": "flatten"}, {"kind": "dense", "in": 5, "out": 2}, {"kind": "softmax"}]
    w = np.zeros((2, 5), dtype=np.float32)
    b = np.zeros(2, dtype=np.float32)
    path = write_bundle(tmp_path, layers, [w, b])
    with pytest.raises(ModelValidationError):
        engine.load_model(path)


def test_zero_net_uniform_output(tmp_path):
    layers = [{"kind": "flatten"}, {"kind": "dense", "in": 4, "out": 2}, {"kind": "softmax"}]
    w = np.zeros((2, 4), dtype=np.float32)
    b = np.zeros(2, dtype=np.float32)
    net = engine.load_model(write_bundle(tmp_path, layers, [w, b]))
    trace = engine.forward(net, np.zeros((1, 2, 2)))
    assert np.allclose(trace.output, [0.5, 0.5])


def test_forward_golden_vector(mlp_tiny, fixtures_dir, probe_images):
    golden = json.loads((fixtures_dir / "golden" / "mlp_tiny_probe00.json").read_text())
    trace = engine.forward(mlp_tiny, probe_images[0])
    assert np.max(np.abs(trace.output - np.array(golden["output"]))) <= 1e-5
    assert int(np.argmax(trace.output)) == golden["top1"]


def test_forward_shape_mismatch(mlp_tiny):
    with pytest.raises(ShapeError):
        engine.forward(mlp_tiny, np.zeros((1, 27, 27)))


def test_softmax_normalized(cnn_tiny, rng):
    for _ in range(5):
        x = rng.uniform(0, 1, size=cnn_tiny.input_shape)
        out = engine.forward(cnn_tiny, x).output
        assert abs(out.sum() - 1.0) <= 1e-6
        assert np.all(out >= 0) and np.all(out <= 1)


def test_forward_deterministic(cnn_tiny, probe_images):
    a = engine.forward(cnn_tiny, probe_images[0])
    b = engine.forward(cnn_tiny, probe_images[0])
    assert np.array_equal(a.output, b.output)
    for za, zb in zip(a.outputs, b.outputs):
        assert np.array_equal(za, zb)


def test_linear_net_scales_logits(rng):
    w = rng.standard_normal((3, 4)).astype(np.float32)
    b = np.zeros(3, dtype=np.float32)
    layers = [Layer("flatten"), Layer("dense", weights=w, biases=b), Layer("softmax")]
    net = NetworkSpec((1, 2, 2), layers, 3, _infer_shapes((1, 2, 2), layers, 3))
    x = rng.uniform(0, 1, size=(1, 2, 2))
    logits1 = engine.forward(net, x).outputs[1]
    logits3 = engine.forward(net, 3.0 * x).outputs[1]
    assert np.max(np.abs(logits3 - 3.0 * logits1)) <= 1e-5


def test_gradient_zero_at_cost_minimum(mlp_tiny, probe_images):
    trace = engine.forward(mlp_tiny, probe_images[0])
    y = trace.output.copy()
    g = engine.input_gradient(mlp_tiny, trace, y)
    assert np.max(np.abs(g)) <= 1e-12


@pytest.mark.parametrize("name", ["mlp_tiny", "cnn_tiny", "mixed_tiny"])
def test_gradient_matches_finite_differences(name, request):
    net = request.getfixturevalue(name)
    result = gradcheck.check_input_gradient(net, probes=100, seed=3)
    assert result.probes == 100
    assert result.passed, f"max rel error {result.max_rel_error:.3e}"


def test_conv1x1_matches_dense(rng):
    """A 1x1-conv net and its dense rewrite must give identical input gradients."""
    c_in, c_out, h, w = 2, 3, 4, 4
    kernel = rng.standard_normal((c_out, c_in, 1, 1)).astype(np.float32)
    bias = rng.standard_normal(c_out).astype(np.float32)
    conv_layers = [
        Layer("conv2d", weights=kernel, biases=bias, stride=1, padding=0),
        Layer("flatten"),
        Layer("softmax"),
    ]
    conv_net = NetworkSpec((c_in, h, w), conv_layers, c_out * h * w,
                           _infer_shapes((c_in, h, w), conv_layers, c_out * h * w))
    # dense equivalent: block structure mapping channel planes
    dense_w = np.zeros((c_out * h * w, c_in * h * w), dtype=np.float32)
    dense_b = np.zeros(c_out * h * w, dtype=np.float32)
    for o in range(c_out):
        for i in range(c_in):
            for p in range(h * w):
                dense_w[o * h * w + p, i * h * w + p] = kernel[o, i, 0, 0]
        dense_b[o * h * w:(o + 1) * h * w] = bias[o]
    dense_layers = [
        Layer("flatten"),
        Layer("dense", weights=dense_w, biases=dense_b),
        Layer("softmax"),
    ]
    dense_net = NetworkSpec((c_in, h, w), dense_layers, c_out * h * w,
                            _infer_shapes((c_in, h, w), dense_layers, c_out * h * w))
    x = rng.uniform(0, 1, size=(c_in, h, w))
    y = one_hot(5, c_out * h * w)
    tc = engine.forward(conv_net, x)
    td = engine.forward(dense_net, x)
    assert np.max(np.abs(tc.output - td.output)) <= 1e-6
    gc = engine.input_gradient(conv_net, tc, y)
    gd = engine.input_gradient(dense_net, td, y).reshape(x.shape)
    assert np.max(np.abs(gc - gd)) <= 1e-6


def test_stale_trace_rejected(mlp_tiny, cnn_tiny, probe_images):
    trace = engine.forward(mlp_tiny, probe_images[0])
    y = one_hot(0, 10)
    bad = engine.ForwardTrace(inputs=trace.inputs[:-1], outputs=trace.outputs[:-1],
                              output=trace.output)
    with pytest.raises(ShapeError):
        engine.input_gradient(mlp_tiny, bad, y)


def test_maxpool_tie_routes_to_first():
    pool = Layer("maxpool2d", stride=2, pool_kh=2, pool_kw=2)
    x = np.full((1, 2, 2), 0.5)
    out = engine._layer_forward(pool, x)
    g = engine._layer_backward(pool, x, out, np.array([[[1.0]]]))
    assert np.flatnonzero(g).tolist() == [0]
    assert g.ravel()[0] == 1.0
