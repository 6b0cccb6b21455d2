"""Marking strategies for the adaptive loop.

Both shipped strategies guarantee that no unmarked indicator exceeds the
smallest marked one, which is the structural property the convergence of
the adaptive loop rests on (checked by :func:`verify_marking_property`
with the identity marking function).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

__all__ = [
    "MarkStrategy",
    "MarkingConfig",
    "mark",
    "mark_doerfler",
    "mark_maximum",
    "verify_marking_property",
]


class MarkStrategy(Enum):
    DOERFLER = "doerfler"
    MAXIMUM = "maximum"


@dataclass(frozen=True)
class MarkingConfig:
    strategy: MarkStrategy
    theta: float

    def __post_init__(self):
        if self.strategy is MarkStrategy.DOERFLER:
            if not (0.0 < self.theta <= 1.0):
                raise ValueError(f"Doerfler marking needs theta in (0, 1], got {self.theta}")
        elif not (0.0 <= self.theta <= 1.0):
            raise ValueError(f"maximum marking needs theta in [0, 1], got {self.theta}")


def mark_doerfler(indicators: np.ndarray, theta: float) -> np.ndarray:
    """Minimal set carrying at least the theta-fraction of the squared total.

    Indicators are sorted descending (ties broken by element index), and the
    shortest prefix with sum of squares >= theta * total is marked.  Sorting
    makes every unmarked indicator at most the smallest marked one, and the
    prefix is minimal: dropping its last element breaks the bulk inequality.
    """
    indicators = np.asarray(indicators, dtype=float)
    if not (0.0 < theta <= 1.0):
        raise ValueError(f"Doerfler marking needs theta in (0, 1], got {theta}")
    if indicators.size == 0:
        return np.empty(0, dtype=np.int64)
    eta2 = indicators**2
    order = np.lexsort((np.arange(indicators.size), -eta2))
    csum = np.cumsum(eta2[order])
    total = csum[-1]
    if total == 0.0:
        return np.empty(0, dtype=np.int64)
    cut = int(np.searchsorted(csum, theta * total, side="left"))
    return np.sort(order[: cut + 1]).astype(np.int64)


def mark_maximum(indicators: np.ndarray, theta: float) -> np.ndarray:
    """All elements with indicator >= (1 - theta) times the largest one."""
    indicators = np.asarray(indicators, dtype=float)
    if not (0.0 <= theta <= 1.0):
        raise ValueError(f"maximum marking needs theta in [0, 1], got {theta}")
    if indicators.size == 0:
        return np.empty(0, dtype=np.int64)
    top = indicators.max()
    if top == 0.0:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero(indicators >= (1.0 - theta) * top).astype(np.int64)


def mark(indicators: np.ndarray, config: MarkingConfig) -> np.ndarray:
    if config.strategy is MarkStrategy.DOERFLER:
        return mark_doerfler(indicators, config.theta)
    return mark_maximum(indicators, config.theta)


def verify_marking_property(
    indicators: np.ndarray,
    marks: np.ndarray,
    marking_function: Optional[Callable[[float], float]] = None,
) -> bool:
    """Check max over unmarked indicators <= M(max over marked indicators).

    ``marking_function`` defaults to the identity.  An empty mark set is
    admissible only when every indicator vanishes.
    """
    indicators = np.asarray(indicators, dtype=float)
    marks = np.asarray(marks, dtype=np.int64)
    if marking_function is None:
        marking_function = lambda t: t
    if marks.size == 0:
        return bool(np.all(indicators == 0.0))
    unmarked = np.ones(indicators.size, dtype=bool)
    unmarked[marks] = False
    if not unmarked.any():
        return True
    return float(indicators[unmarked].max()) <= marking_function(float(indicators[marks].max()))
