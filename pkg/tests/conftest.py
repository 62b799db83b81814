from __future__ import annotations

import numpy as np
import pytest

from volray import ControlPoint, RaySample, Classified, TransferFunction
from volray.volume import ScalarVolume


def random_transfer_function(rng: np.random.Generator, n_points: int = 5) -> TransferFunction:
    scalars = np.sort(rng.random(n_points))
    # keep positions strictly increasing and anchored to the full range
    scalars[0] = 0.0
    scalars[-1] = 1.0
    while np.any(np.diff(scalars) <= 0):
        scalars = np.sort(rng.random(n_points))
        scalars[0] = 0.0
        scalars[-1] = 1.0
    points = tuple(
        ControlPoint(
            scalar=float(s),
            color=tuple(rng.random(3)),
            opacity=float(rng.random()),
        )
        for s in scalars
    )
    return TransferFunction(points=points)


def random_samples(rng: np.random.Generator, n: int) -> list[RaySample]:
    out = []
    t = 0.0
    for _ in range(n):
        t += float(rng.random()) + 0.01
        out.append(
            RaySample(
                t=t,
                scalar=float(rng.random()),
                classified=Classified(color=tuple(rng.random(3)), opacity=float(rng.random())),
            )
        )
    return out


def random_volume_grid(rng: np.random.Generator, dims=(4, 4, 4)) -> ScalarVolume:
    return ScalarVolume.from_grid(rng.random(dims))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)
