"""
Random instances for the existence-frequency experiments.

Cultures:
    ic    impartial culture: every preference order equally likely.
    spup  single-peaked, uniform peak: the peak is uniform on the axis
          r1 < r2 < ... < rm, then the order grows one step left or right with
          equal probability until a side runs out.

Cardinal utilities follow the order: each agent draws m values uniformly from
the value range, sorts them descending and hands them out along its order, so
the most preferred resource gets the largest value. Weights are drawn after
all agents, uniformly from the weight range.

Randomness comes from numpy's PCG64 seeded through SeedSequence. derive_rng
mixes a base seed with integer keys (culture, weight range, n, trial) via the
SeedSequence spawn key, so every trial owns an independent stream no matter
which worker evaluates it.
"""
from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fairalloc.model import Instance

PreferenceOrder = tuple[int, ...]


class Culture(str, Enum):
    IC = "ic"
    SPUP = "spup"


class GenConfig(BaseModel):
    """Parameters of one generated instance."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., ge=1, description="Number of agents.")
    m: int = Field(..., ge=1, description="Number of resources.")
    culture: Culture = Culture.IC
    value_range: tuple[int, int] = Field((1, 10_000), description="Inclusive utility value range.")
    weight_range: tuple[int, int] = Field((1, 100), description="Inclusive weight range.")
    seed: int = Field(0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_ranges(self) -> GenConfig:
        for name in ("value_range", "weight_range"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise ValueError(f"{name} must satisfy 1 <= lo <= hi, got ({lo}, {hi})")
        return self


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys))))


# ---------------------------------------------------------------------------
# Preference orders
# ---------------------------------------------------------------------------

def gen_order_ic(m: int, rng: np.random.Generator) -> PreferenceOrder:
    return tuple(int(r) for r in rng.permutation(m))


def gen_order_spup(m: int, rng: np.random.Generator) -> PreferenceOrder:
    peak = int(rng.integers(m))
    order = [peak]
    left, right = peak - 1, peak + 1
    while len(order) < m:
        go_left = right >= m or (left >= 0 and rng.integers(2) == 0)
        if go_left:
            order.append(left)
            left -= 1
        else:
            order.append(right)
            right += 1
    return tuple(order)


def is_single_peaked(order: Sequence[int], axis: Sequence[int] | None = None) -> bool:
    """
    True iff order is single-peaked on axis (identity axis by default).

    Equivalently, every prefix of the order occupies a contiguous stretch of
    the axis.

    Raises:
        ValueError: if order and axis are not permutations of the same set.
    """
    axis = list(range(len(order))) if axis is None else list(axis)
    if sorted(order) != sorted(axis) or len(set(axis)) != len(axis):
        raise ValueError("order and axis must be permutations of the same resources")
    position = {r: p for p, r in enumerate(axis)}
    lo = hi = position[order[0]] if order else 0
    for r in order[1:]:
        p = position[r]
        if p == lo - 1:
            lo = p
        elif p == hi + 1:
            hi = p
        else:
            return False
    return True


_ORDER_DRAWS = {
    Culture.IC: gen_order_ic,
    Culture.SPUP: gen_order_spup,
}


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

def gen_instance_with_orders(
    config: GenConfig, rng: np.random.Generator | None = None
) -> tuple[Instance, list[PreferenceOrder]]:
    """Generated instance together with each agent's generating preference order."""
    rng = rng if rng is not None else derive_rng(config.seed)
    draw = _ORDER_DRAWS[config.culture]
    lo, hi = config.value_range
    utilities = np.zeros((config.n, config.m), dtype=np.int64)
    orders: list[PreferenceOrder] = []
    for agent in range(config.n):
        order = draw(config.m, rng)
        values = np.sort(rng.integers(lo, hi + 1, size=config.m))[::-1]
        utilities[agent, list(order)] = values
        orders.append(order)
    wlo, whi = config.weight_range
    weights = rng.integers(wlo, whi + 1, size=config.n)
    return Instance(weights, utilities), orders


def gen_instance(config: GenConfig, rng: np.random.Generator | None = None) -> Instance:
    """Deterministic in (config, rng): without rng the stream is derived from config.seed."""
    return gen_instance_with_orders(config, rng)[0]
