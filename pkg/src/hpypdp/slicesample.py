"""Univariate slice sampling with stepping out and shrinkage (Neal, 2003)."""

from __future__ import annotations

import math
import random
from typing import Callable


def slice_sample(
    logf: Callable[[float], float],
    x0: float,
    rng: random.Random,
    lower: float = -math.inf,
    upper: float = math.inf,
    width: float = 1.0,
    max_steps: int = 32,
) -> float:
    """Return one slice-sampling update of ``x0`` under the unnormalised log density ``logf``.

    ``lower``/``upper`` are exclusive bounds; ``x0`` must lie strictly inside
    them with finite log density.
    """
    fx = logf(x0)
    if not math.isfinite(fx):
        raise ValueError(f"slice sampler started at x={x0} with log density {fx}")
    level = fx + math.log(1.0 - rng.random())  # log(u * f(x0)), u in (0, 1]

    left = x0 - width * rng.random()
    right = left + width
    j = int(max_steps * rng.random())
    k = max_steps - 1 - j
    while j > 0 and left > lower and logf(left) > level:
        left -= width
        j -= 1
    while k > 0 and right < upper and logf(right) > level:
        right += width
        k -= 1
    left = max(left, lower)
    right = min(right, upper)

    while True:
        x = left + (right - left) * rng.random()
        if lower < x < upper:
            fx = logf(x)
            if fx > level:
                return x
        if x < x0:
            left = x
        else:
            right = x
        if right - left < 1e-12:
            return x0
