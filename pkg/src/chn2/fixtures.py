"""Bundled aggregated-sample configurations used by tests and demos.

The two ball-union configurations below reproduce the qualitative regime of
a few well-separated aggregates inside a [0, 200]^2 window, with expected
in-region counts of roughly 2000 and 2500 points. The window and intensity
are documented package choices; only the centers/radii shapes are pinned.
"""

from __future__ import annotations

import numpy as np

from .geometry import Window
from .pointprocess import CoxBallSpec, Sample, gen_cox_balls

WINDOW_200 = Window(np.zeros(2), np.full(2, 200.0))

# Three aggregates, radii 40/20/30, lam tuned for ~2000 points in the union.
# Centers are spread so the smallest surface-to-surface gap (~66) clearly
# exceeds late-level within-aggregate merge distances.
COX_THREE_BALLS = CoxBallSpec(
    lam=0.22,
    centers=np.array([[45.0, 45.0], [175.0, 45.0], [110.0, 165.0]]),
    radii=np.array([40.0, 20.0, 30.0]),
)
COX_THREE_BALLS_SEED = 11

# Four aggregates, radii 30/20/30/30, lam tuned for ~2500 points.
COX_FOUR_BALLS = CoxBallSpec(
    lam=0.26,
    centers=np.array([[40.0, 40.0], [160.0, 40.0], [40.0, 160.0], [160.0, 160.0]]),
    radii=np.array([30.0, 20.0, 30.0, 30.0]),
)
COX_FOUR_BALLS_SEED = 13


def cox_fixture(name: str, seed: int | None = None) -> Sample:
    if name == "three_balls":
        spec, default_seed = COX_THREE_BALLS, COX_THREE_BALLS_SEED
    elif name == "four_balls":
        spec, default_seed = COX_FOUR_BALLS, COX_FOUR_BALLS_SEED
    else:
        raise ValueError(f"unknown fixture {name!r}")
    return gen_cox_balls(spec, WINDOW_200, 2, default_seed if seed is None else seed)
