"""Volume-aware Dice, soft Dice and cross-entropy losses with gradients."""

from ._core import LesionMetricsError, WeightMapCache, cross_entropy, soft_dice, va_dice

__all__ = ["LesionMetricsError", "WeightMapCache", "cross_entropy", "soft_dice", "va_dice"]
