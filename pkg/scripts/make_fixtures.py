"""Generate the checked-in fixture models, probe images and golden vectors.

Everything is seeded, so re-running reproduces the fixtures byte for byte.
The golden forward vector for mlp_tiny is computed by a naive scripted
forward pass written here, independent of the package's engine.

Usage: python scripts/make_fixtures.py [out_dir]
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from advkit.images import save_image  # noqa: E402


def write_bundle(out_dir: Path, name: str, input_shape, num_classes, layer_specs, arrays):
    """Write manifest + little-endian float32 blob (per layer: weights then biases)."""
    blob = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in arrays)
    blob_name = f"{name}.bin"
    (out_dir / blob_name).write_bytes(blob)
    manifest = {
        "format_version": 1,
        "input_shape": list(input_shape),
        "num_classes": num_classes,
        "weights_file": blob_name,
        "weights_sha256": hashlib.sha256(blob).hexdigest(),
        "layers": layer_specs,
    }
    (out_dir / f"{name}.json").write_text(json.dumps(manifest, indent=2) + "\n")


def dense_init(rng, out, inp, gain):
    w = rng.standard_normal((out, inp)) * gain / np.sqrt(inp)
    b = rng.standard_normal(out) * 0.1
    return w.astype(np.float32), b.astype(np.float32)


def conv_init(rng, out_ch, in_ch, kh, kw, gain):
    w = rng.standard_normal((out_ch, in_ch, kh, kw)) * gain / np.sqrt(in_ch * kh * kw)
    b = rng.standard_normal(out_ch) * 0.1
    return w.astype(np.float32), b.astype(np.float32)


def make_mlp_tiny(out_dir: Path, rng):
    w1, b1 = dense_init(rng, 64, 784, gain=1.5)
    w2, b2 = dense_init(rng, 10, 64, gain=1.5)
    write_bundle(
        out_dir, "mlp_tiny", [1, 28, 28], 10,
        [
            {"kind": "flatten"},
            {"kind": "dense", "in": 784, "out": 64},
            {"kind": "relu"},
            {"kind": "dense", "in": 64, "out": 10},
            {"kind": "softmax"},
        ],
        [w1, b1, w2, b2],
    )
    return [w1, b1, w2, b2]


def pooled_features(wc, bc, img):
    """Naive conv(3x3, pad 1) + relu + maxpool(2x2, stride 2), flattened.

    Local scripted forward pass so the fixture construction does not depend
    on the package's engine.
    """
    wc = np.asarray(wc, dtype=np.float64)
    p = np.pad(np.asarray(img, dtype=np.float64), 1)
    maps = []
    for o in range(wc.shape[0]):
        acc = np.zeros((28, 28))
        for di in range(3):
            for dj in range(3):
                acc += wc[o, 0, di, dj] * p[di:di + 28, dj:dj + 28]
        maps.append(np.maximum(acc + float(bc[o]), 0.0))
    maps = np.array(maps)
    return maps.reshape(len(maps), 14, 2, 14, 2).max(axis=(2, 4)).ravel()


def midfreq_template(rng, h=14, w=14, kmax_lo=2, kmax_hi=5):
    """Random mix of 2-D cosine modes with max frequency in (kmax_lo, kmax_hi]."""
    r = np.arange(h)
    c = np.arange(w)
    t = np.zeros(h * w)
    for fr in range(kmax_hi + 1):
        for fc in range(kmax_hi + 1):
            if max(fr, fc) <= kmax_lo:
                continue
            m = np.outer(np.cos(np.pi * fr * (r + 0.5) / h),
                         np.cos(np.pi * fc * (c + 0.5) / w)).ravel()
            t += rng.standard_normal() * m / np.linalg.norm(m)
    return t


def make_cnn_tiny(out_dir: Path, rng, probes):
    """Attackable conv fixture built around the 20 probe images.

    The dense layer combines two channels per class:
      * a "clean" prototype channel -- the mean-removed average pooled map of
        the two probes assigned to the class (probe i -> class i % 10) -- so
        each probe gets its own confident clean prediction, and
      * a high-gain "sensitive" channel of mid-frequency cosine templates
        orthogonalized against all probe pooled maps, which leaves the clean
        predictions untouched but gives gradient descent a strong, nearly
        image-invisible direction to drive any target class with.
    """
    wc = np.array([np.ones((3, 3)) / 9.0 + 0.3 * rng.standard_normal((3, 3)) / 3.0
                   for _ in range(8)])[:, None].astype(np.float32)
    bc = np.full(8, 0.05, dtype=np.float32)

    H = np.array([pooled_features(wc, bc, img[0]) for img in probes])
    Q, _ = np.linalg.qr(H.T)
    hbar = H.mean(axis=0)
    hbar_u = hbar / np.linalg.norm(hbar)
    D = H - hbar

    gain, clean_gain = 200.0, 5.0
    wd = []
    for cls in range(10):
        t_mid = np.concatenate([midfreq_template(rng) for _ in range(8)])
        t_mid -= Q @ (Q.T @ t_mid)
        t_mid /= np.linalg.norm(t_mid)
        t_clean = D[cls] + D[cls + 10]
        t_clean -= (t_clean @ hbar_u) * hbar_u
        t_clean /= np.linalg.norm(t_clean)
        wd.append(gain * t_mid + clean_gain * t_clean)
    wd = np.stack(wd).astype(np.float32)
    bd = (0.3 * rng.standard_normal(10)).astype(np.float32)

    write_bundle(
        out_dir, "cnn_tiny", [1, 28, 28], 10,
        [
            {"kind": "conv2d", "in_ch": 1, "out_ch": 8, "kh": 3, "kw": 3, "stride": 1, "padding": 1},
            {"kind": "relu"},
            {"kind": "maxpool2d", "kh": 2, "kw": 2, "stride": 2},
            {"kind": "flatten"},
            {"kind": "dense", "in": 8 * 14 * 14, "out": 10},
            {"kind": "softmax"},
        ],
        [wc, bc, wd, bd],
    )


def make_mixed_tiny(out_dir: Path, rng):
    wc, bc = conv_init(rng, 4, 1, 3, 3, gain=1.5)
    w1, b1 = dense_init(rng, 32, 4 * 13 * 13, gain=1.5)
    w2, b2 = dense_init(rng, 10, 32, gain=1.5)
    write_bundle(
        out_dir, "mixed_tiny", [1, 28, 28], 10,
        [
            {"kind": "conv2d", "in_ch": 1, "out_ch": 4, "kh": 3, "kw": 3, "stride": 1, "padding": 0},
            {"kind": "relu"},
            {"kind": "maxpool2d", "kh": 2, "kw": 2, "stride": 2},
            {"kind": "flatten"},
            {"kind": "dense", "in": 4 * 13 * 13, "out": 32},
            {"kind": "relu"},
            {"kind": "dense", "in": 32, "out": 10},
            {"kind": "softmax"},
        ],
        [wc, bc, w1, b1, w2, b2],
    )


def smooth_field(rng, h=28, w=28, passes=3):
    """Blurred uniform noise: non-degenerate, vaguely natural test images."""
    img = rng.uniform(0.0, 1.0, size=(h, w))
    for _ in range(passes):
        img = (img
               + np.roll(img, 1, axis=0) + np.roll(img, -1, axis=0)
               + np.roll(img, 1, axis=1) + np.roll(img, -1, axis=1)) / 5.0
    lo, hi = img.min(), img.max()
    return (0.1 + 0.8 * (img - lo) / (hi - lo))


def naive_mlp_forward(params, x_flat):
    """Independent scripted forward pass for the golden vector (no advkit.engine)."""
    w1, b1, w2, b2 = [np.asarray(p, dtype=np.float64) for p in params]
    h = w1 @ x_flat + b1
    h = np.where(h > 0, h, 0.0)
    z = w2 @ h + b2
    e = np.exp(z - z.max())
    return e / e.sum()


def main():
    out_root = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "fixtures"
    models = out_root / "models"
    imgs = out_root / "images"
    golden = out_root / "golden"
    for d in (models, imgs, golden):
        d.mkdir(parents=True, exist_ok=True)

    # probes first: the cnn_tiny fixture is constructed around them
    img_rng = np.random.default_rng(20240818)
    probe_files = []
    probes = []
    for i in range(20):
        img = smooth_field(img_rng)[None, :, :]
        img = np.rint(255.0 * img) / 255.0  # quantize so files carry exact values
        path = imgs / f"probe_{i:02d}.pgm"
        save_image(img.astype(np.float32), path)
        probe_files.append(path)
        probes.append(img)

    rng = np.random.default_rng(20240817)
    mlp_params = make_mlp_tiny(models, rng)
    make_cnn_tiny(models, rng, probes)
    make_mixed_tiny(models, rng)

    # golden forward vector for mlp_tiny on probe_00, via the naive scripted pass
    x = np.frombuffer(probe_files[0].read_bytes().split(b"255\n", 1)[1], dtype=np.uint8)
    x = x.astype(np.float64) / 255.0
    dist = naive_mlp_forward(mlp_params, x)
    (golden / "mlp_tiny_probe00.json").write_text(json.dumps({
        "model": "models/mlp_tiny.json",
        "image": "images/probe_00.pgm",
        "output": [float(v) for v in dist],
        "top1": int(np.argmax(dist)),
    }, indent=2) + "\n")
    print(f"fixtures written to {out_root}")


if __name__ == "__main__":
    main()
