"""Perception-gated iterative attack: targeted gradient descent on the input
plus correlation/structural-similarity perturbation rescaling.

The outer loop alternates two goals until all three termination conditions
hold: (G1) drive the squared-error cost between the softmax output and the
one-hot target below epsilon by descending the input gradient; (G2) keep
the perturbed image perceptually close to the original, shrinking the
perturbation by (1 - score) whenever the correlation or SSIM gate fails
(correlation checked first).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from advkit import engine
from advkit.errors import AlreadyTargetClassError, ShapeError
from advkit.metrics import PerceptualScores, score_pair


@dataclass
class AttackConfig:
    target_class: int
    epsilon: float = 0.0025
    cr_min: float = 0.95
    ssi_min: float = 0.99
    step_size: float = 0.01
    max_inner_iters: int = 500
    max_outer_iters: int = 1000
    clamp_lo: float = 0.0
    clamp_hi: float = 1.0
    seed: int = 42
    init_delta_scale: float = 1e-3
    # scale each step by 1/||grad||_inf so saturated-softmax plateaus (tiny
    # gradients) are still traversed at step_size per pixel
    normalize_steps: bool = True


@dataclass
class TraceRecord:
    outer_iter: int
    inner_iters_total: int
    cost: float
    cr: float
    ssi: float
    predicted_class: int
    target_confidence: float


@dataclass
class AttackReport:
    success: bool
    original_class: int
    target_class: int
    outer_iters_run: int
    inner_iters_run: int
    trace: list[TraceRecord]
    final_perturbation: np.ndarray
    final_adversarial_image: np.ndarray
    post_quantization_success: bool
    post_quantization_class: int

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "original_class": self.original_class,
            "target_class": self.target_class,
            "outer_iters_run": self.outer_iters_run,
            "inner_iters_run": self.inner_iters_run,
            "post_quantization_success": self.post_quantization_success,
            "post_quantization_class": self.post_quantization_class,
            "trace": [
                {
                    "outer_iter": r.outer_iter,
                    "inner_iters_total": r.inner_iters_total,
                    "cost": r.cost,
                    "cr": r.cr,
                    "ssi": r.ssi,
                    "predicted_class": r.predicted_class,
                    "target_confidence": r.target_confidence,
                }
                for r in self.trace
            ],
        }


def one_hot(k: int, n: int) -> np.ndarray:
    if not 0 <= k < n:
        raise ShapeError(f"class index {k} out of range [0, {n})")
    y = np.zeros(n, dtype=np.float64)
    y[k] = 1.0
    return y


def cost(a_L: np.ndarray, y: np.ndarray) -> float:
    """Squared-error distance between output distribution and target distribution."""
    a_L = np.asarray(a_L, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if a_L.shape != y.shape:
        raise ShapeError(f"length mismatch: {a_L.shape} vs {y.shape}")
    d = a_L - y
    return float(np.dot(d, d))


def misclassification_step(net, x, delta, y, eta, clamp_range,
                           max_backoff: int = 10, normalize: bool = False):
    """One gradient-descent step on the perturbation, with geometric step back-off.

    Returns (delta', trace of x+delta').  The step is re-halved up to
    max_backoff times if the cost did not strictly decrease; the perturbed
    image is re-clamped into clamp_range after every candidate step.  With
    normalize=True the gradient is scaled to unit sup-norm first, so eta is
    the per-pixel step length; a full step that leaves the cost flat (a
    saturated-softmax plateau) is then accepted rather than backed off.
    """
    lo, hi = clamp_range
    adv0 = np.clip(x + delta, lo, hi)
    base = engine.forward(net, adv0)
    c0 = cost(base.output, y)
    g = engine.input_gradient(net, base, y)
    gmax = np.max(np.abs(g))
    if gmax == 0.0:
        return delta, base
    step = float(eta) / gmax if normalize else float(eta)
    new_delta, tr = delta, base
    for attempt in range(max_backoff + 1):
        adv = np.clip(adv0 - step * g, lo, hi)
        new_delta = adv - x
        tr = engine.forward(net, adv)
        c1 = cost(tr.output, y)
        if c1 < c0 or (attempt == 0 and c1 - c0 < 1e-10):
            break
        step *= 0.5
    return new_delta, tr


def imperceptibility_rescale(x, delta, scores: PerceptualScores, cr_min: float, ssi_min: float):
    """Shrink the perturbation by (1 - score) for the first failing gate.

    The correlation gate is checked before the SSIM gate; at most one
    rescale happens per call.  A negative score would grow the
    perturbation instead of shrinking it, so it is rejected.
    """
    if scores.cr < cr_min:
        s = scores.cr
    elif scores.ssi < ssi_min:
        s = scores.ssi
    else:
        return delta
    if s < 0.0:
        raise ValueError(f"perceptual score {s} below zero; rescale would amplify the perturbation")
    return delta * (1.0 - s)


def run_attack(net: engine.NetworkSpec, x: np.ndarray, config: AttackConfig) -> AttackReport:
    """Full outer loop; returns a per-iteration trace and the final adversarial image."""
    lo, hi = config.clamp_lo, config.clamp_hi
    x = np.asarray(x, dtype=np.float64)
    if tuple(x.shape) != tuple(net.input_shape):
        raise ShapeError(f"image shape {x.shape} does not match model {net.input_shape}")

    tr0 = engine.forward(net, x)
    original_class = int(np.argmax(tr0.output))
    if original_class == config.target_class:
        raise AlreadyTargetClassError(
            f"image already classified as target class {config.target_class}"
        )
    y = one_hot(config.target_class, net.num_classes)

    rng = np.random.default_rng(config.seed)
    delta = rng.uniform(-config.init_delta_scale, config.init_delta_scale, size=x.shape)
    delta = np.clip(x + delta, lo, hi) - x

    records: list[TraceRecord] = []
    total_inner = 0
    success = False
    for outer in range(1, config.max_outer_iters + 1):
        tr = engine.forward(net, np.clip(x + delta, lo, hi))
        c = cost(tr.output, y)
        for _ in range(config.max_inner_iters):
            if c <= config.epsilon:
                break
            delta, tr = misclassification_step(
                net, x, delta, y, config.step_size, (lo, hi),
                normalize=config.normalize_steps,
            )
            c = cost(tr.output, y)
            total_inner += 1
        adv = np.clip(x + delta, lo, hi)
        scores = score_pair(x, adv)
        records.append(TraceRecord(
            outer_iter=outer,
            inner_iters_total=total_inner,
            cost=c,
            cr=scores.cr,
            ssi=scores.ssi,
            predicted_class=int(np.argmax(tr.output)),
            target_confidence=float(tr.output[config.target_class]),
        ))
        if c <= config.epsilon and scores.cr >= config.cr_min and scores.ssi >= config.ssi_min:
            success = True
            break
        try:
            delta = imperceptibility_rescale(x, delta, scores, config.cr_min, config.ssi_min)
        except ValueError:
            # a negative score means the perturbation is badly off-image;
            # restart G1 from a strongly shrunk perturbation instead
            delta = delta * 0.01

    adv = np.clip(x + delta, lo, hi)
    quantized = np.rint(255.0 * adv) / 255.0
    q_class, _ = engine.predict(net, quantized)
    return AttackReport(
        success=success,
        original_class=original_class,
        target_class=config.target_class,
        outer_iters_run=len(records),
        inner_iters_run=total_inner,
        trace=records,
        final_perturbation=(adv - x).astype(np.float32),
        final_adversarial_image=adv.astype(np.float32),
        post_quantization_success=(q_class == config.target_class),
        post_quantization_class=q_class,
    )
