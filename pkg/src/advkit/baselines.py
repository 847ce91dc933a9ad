"""FGSM and L-BFGS reference attacks, plus the imperceptibility-factor sweep.

Both baselines optimize the same squared-error cost as the main attack so
their objectives are comparable.  The sweep computes each attack's noise
once at its natural scale, then rescales it by each imperceptibility
factor before evaluating success and the perceptual scores.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from advkit import engine
from advkit.attack import cost, one_hot
from advkit.errors import AlreadyTargetClassError
from advkit.metrics import correlation, ssim


@dataclass
class SweepRow:
    if_factor: float
    attack: str
    success: bool
    cr: float
    ssi: float
    predicted_class: int
    target_confidence: float


@dataclass
class SweepResult:
    target_class: int
    rows: list[SweepRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["if", "attack", "success", "cr", "ssi",
                         "predicted_class", "target_confidence"])
        for r in self.rows:
            writer.writerow([r.if_factor, r.attack, r.success, r.cr, r.ssi,
                             r.predicted_class, r.target_confidence])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "target_class": self.target_class,
            "rows": [vars(r) for r in self.rows],
        }, indent=2)


def fgsm(net: engine.NetworkSpec, x: np.ndarray, target: int | None,
         if_factor: float, clamp_range=(0.0, 1.0)):
    """One-step sign-of-gradient perturbation.

    Untargeted (target is None): ascend the cost of the current top-1
    label.  Targeted: descend toward the one-hot target.  Returns
    (adversarial image, raw sign noise); noise entries are in {-1, 0, +1}.
    """
    lo, hi = clamp_range
    x = np.asarray(x, dtype=np.float64)
    trace = engine.forward(net, x)
    if target is None:
        y = one_hot(int(np.argmax(trace.output)), net.num_classes)
        direction = 1.0
    else:
        y = one_hot(target, net.num_classes)
        direction = -1.0
    g = engine.input_gradient(net, trace, y)
    noise = np.sign(g)
    adversarial = np.clip(x + direction * if_factor * noise, lo, hi)
    return adversarial, noise


def _two_loop(g, s_hist, y_hist, rho_hist):
    """Standard limited-memory BFGS two-loop recursion; returns H @ g."""
    q = g.copy()
    alphas = []
    for s, yv, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * yv
    if s_hist:
        s, yv = s_hist[-1], y_hist[-1]
        q *= np.dot(s, yv) / np.dot(yv, yv)
    for (s, yv, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
        b = rho * np.dot(yv, q)
        q += (a - b) * s
    return q


def lbfgs_attack(net: engine.NetworkSpec, x: np.ndarray, target: int,
                 c: float = 0.1, max_iters: int = 100, history: int = 10,
                 clamp_range=(0.0, 1.0)):
    """Minimize c * ||noise||^2 + cost(x + noise, one-hot target) over box-valid noise.

    Limited-memory two-loop recursion with Armijo backtracking (factor 0.5,
    parameter 1e-4) and projection of x + noise onto clamp_range after each
    trial step.  Returns the best iterate by objective as
    (adversarial image, noise).
    """
    lo, hi = clamp_range
    x = np.asarray(x, dtype=np.float64).ravel()
    shape = net.input_shape
    y = one_hot(target, net.num_classes)
    pred0, _ = engine.predict(net, x.reshape(shape))
    if pred0 == target:
        raise AlreadyTargetClassError(f"image already classified as target class {target}")

    box_lo = lo - x
    box_hi = hi - x

    def objective(z):
        trace = engine.forward(net, (x + z).reshape(shape))
        f = c * float(np.dot(z, z)) + cost(trace.output, y)
        g = 2.0 * c * z + engine.input_gradient(net, trace, y).ravel()
        return f, g

    z = np.zeros_like(x)
    f, g = objective(z)
    best_f, best_z = f, z
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []

    for _ in range(max_iters):
        d = -_two_loop(g, s_hist, y_hist, rho_hist)
        if np.dot(d, g) >= 0.0:
            d = -g
        t = 1.0
        accepted = False
        for _ in range(40):
            z_new = np.clip(z + t * d, box_lo, box_hi)
            step = z_new - z
            if not np.any(step):
                break
            f_new, g_new = objective(z_new)
            if f_new <= f + 1e-4 * np.dot(g, step):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        s = z_new - z
        yv = g_new - g
        sy = np.dot(s, yv)
        if sy > 1e-12:
            s_hist.append(s)
            y_hist.append(yv)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        z, f, g = z_new, f_new, g_new
        if f < best_f:
            best_f, best_z = f, z
        if np.linalg.norm(g) < 1e-10:
            break

    noise = best_z.reshape(shape)
    adversarial = np.clip((x + best_z), lo, hi).reshape(shape)
    return adversarial, noise


def run_if_sweep(net: engine.NetworkSpec, x: np.ndarray, target: int,
                 if_values, clamp_range=(0.0, 1.0)) -> SweepResult:
    """Evaluate both baselines at every imperceptibility factor.

    The raw noise is computed once per attack; each row rescales it by one
    factor, clamps, and records success (top-1 equals target) plus the
    perceptual scores of the rescaled adversarial image.
    """
    if_values = sorted(set(float(v) for v in if_values), reverse=True)
    if not if_values or any(v <= 0 for v in if_values):
        raise ValueError("if_values must be non-empty and positive")
    lo, hi = clamp_range
    x = np.asarray(x, dtype=np.float64)

    _, fgsm_noise = fgsm(net, x, target, if_factor=1.0, clamp_range=clamp_range)
    _, lbfgs_noise = lbfgs_attack(net, x, target, clamp_range=clamp_range)
    # orient both so adversarial = x + IF * noise
    oriented = {"fgsm": -fgsm_noise, "lbfgs": lbfgs_noise}

    rows = []
    for v in if_values:
        for name in ("fgsm", "lbfgs"):
            adv = np.clip(x + v * oriented[name], lo, hi)
            pred, dist = engine.predict(net, adv)
            rows.append(SweepRow(
                if_factor=v,
                attack=name,
                success=(pred == target),
                cr=correlation(x, adv),
                ssi=ssim(x, adv),
                predicted_class=pred,
                target_confidence=float(dist[target]),
            ))
    return SweepResult(target_class=target, rows=rows)
