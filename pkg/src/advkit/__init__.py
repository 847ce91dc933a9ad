"""Imperceptible targeted adversarial image generation for small feed-forward nets.

The package is organized around a minimal float32 tensor convention
(:mod:`advkit.tensor_ops`), a from-scratch inference engine with analytic
input gradients (:mod:`advkit.engine`), perceptual similarity metrics
(:mod:`advkit.metrics`), the perception-gated iterative attack
(:mod:`advkit.attack`), FGSM / L-BFGS baselines and the imperceptibility
sweep (:mod:`advkit.baselines`), and image / CLI plumbing
(:mod:`advkit.images`, :mod:`advkit.cli`).
"""

from advkit.errors import (
    AdvkitError,
    AlreadyTargetClassError,
    DegenerateImageError,
    FormatError,
    IoError,
    ModelValidationError,
    ShapeError,
)

__version__ = "0.1.0"

__all__ = [
    "AdvkitError",
    "AlreadyTargetClassError",
    "DegenerateImageError",
    "FormatError",
    "IoError",
    "ModelValidationError",
    "ShapeError",
]
