"""Classification stage: piecewise-linear transfer functions and opacity correction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Classified",
    "ControlPoint",
    "TransferFunction",
    "classify",
    "correct_opacity",
]


def _check_unit(value: float, what: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{what} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True)
class ControlPoint:
    """One row of the transfer table: scalar position -> color + opacity.

    Colors are linear-light; opacity is the per-sample alpha at the
    reference step length.
    """

    scalar: float
    color: tuple[float, float, float]
    opacity: float

    def __post_init__(self):
        object.__setattr__(self, "scalar", _check_unit(self.scalar, "scalar"))
        object.__setattr__(
            self, "color", tuple(_check_unit(c, "color channel") for c in self.color)
        )
        if len(self.color) != 3:
            raise ValueError(f"color must have three channels, got {self.color}")
        object.__setattr__(self, "opacity", _check_unit(self.opacity, "opacity"))


@dataclass(frozen=True)
class Classified:
    color: tuple[float, float, float]
    opacity: float


@dataclass(frozen=True)
class TransferFunction:
    points: tuple[ControlPoint, ...]
    name: str = ""

    def __post_init__(self):
        pts = tuple(self.points)
        if len(pts) < 2:
            raise ValueError(f"a transfer function needs >= 2 control points, got {len(pts)}")
        for i in range(1, len(pts)):
            if pts[i].scalar <= pts[i - 1].scalar:
                raise ValueError(
                    f"control-point scalars must be strictly increasing: "
                    f"point {i} at {pts[i].scalar} after {pts[i - 1].scalar}"
                )
        object.__setattr__(self, "points", pts)

    def as_arrays(self) -> tuple[np.ndarray, ...]:
        """(scalars, r, g, b, opacity) as float64 arrays, for bulk evaluation."""
        s = np.array([p.scalar for p in self.points])
        r = np.array([p.color[0] for p in self.points])
        g = np.array([p.color[1] for p in self.points])
        b = np.array([p.color[2] for p in self.points])
        a = np.array([p.opacity for p in self.points])
        return s, r, g, b, a

    def classify(self, s: float) -> Classified:
        return classify(self, s)


def classify(tf: TransferFunction, s: float) -> Classified:
    """Color and opacity at scalar ``s`` by linear interpolation.

    Below the first / above the last control point clamps to that endpoint.
    """
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"scalar must lie in [0, 1], got {s}")
    pts = tf.points
    # Identical segment search to _kernels.classify — keep in sync.
    if s <= pts[0].scalar:
        return Classified(pts[0].color, pts[0].opacity)
    if s >= pts[-1].scalar:
        return Classified(pts[-1].color, pts[-1].opacity)
    i = 0
    while pts[i + 1].scalar <= s:
        i += 1
    a, b = pts[i], pts[i + 1]
    f = (s - a.scalar) / (b.scalar - a.scalar)
    color = (
        a.color[0] * (1.0 - f) + b.color[0] * f,
        a.color[1] * (1.0 - f) + b.color[1] * f,
        a.color[2] * (1.0 - f) + b.color[2] * f,
    )
    return Classified(color, a.opacity * (1.0 - f) + b.opacity * f)


def correct_opacity(alpha: float, step: float, reference_step: float) -> float:
    """Re-express a per-sample alpha declared at ``reference_step`` for ``step``.

    Transparency is exponentiated by step/reference_step, so renders keep
    the same optical depth per millimeter at any sampling rate.
    """
    alpha = _check_unit(alpha, "alpha")
    if step <= 0.0 or reference_step <= 0.0:
        raise ValueError(
            f"step lengths must be positive, got step={step} reference_step={reference_step}"
        )
    return 1.0 - (1.0 - alpha) ** (step / reference_step)
